#include "metrics/report.hpp"

#include <cstdio>
#include <sstream>

#include "core/tensor.hpp"

namespace cdrn {

std::string render_report_markdown(const std::vector<EvalRow>& rows,
                                   const std::string& protocol_note) {
    std::ostringstream os;
    os << "# Deraining and Detection Evaluation Metrics\n\n";
    if (!protocol_note.empty()) os << "Protocol: " << protocol_note << "\n\n";
    os << "| Model | PSNR | SSIM | mAP | mAR |\n";
    os << "|-------|------|------|-----|-----|\n";
    for (const EvalRow& r : rows) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%.2f | %.4f | %.4f | %.4f", r.psnr, r.ssim, r.map, r.mar);
        os << "| " << r.model << " | " << buf << " |\n";
    }
    return os.str();
}

std::string render_report_csv(const std::vector<EvalRow>& rows) {
    std::ostringstream os;
    os << "model,psnr,ssim,map,mar\n";
    for (const EvalRow& r : rows) {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g", r.model.c_str(), r.psnr,
                      r.ssim, r.map, r.mar);
        os << buf << "\n";
    }
    return os.str();
}

std::vector<EvalRow> parse_report_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "model,psnr,ssim,map,mar")
        fail("parse_report_csv: missing or unexpected header");
    std::vector<EvalRow> rows;
    int number = 1;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) continue;
        EvalRow r;
        std::istringstream ls(line);
        std::string field;
        if (!std::getline(ls, r.model, ',')) fail("parse_report_csv: bad line " + std::to_string(number));
        double* slots[4] = {&r.psnr, &r.ssim, &r.map, &r.mar};
        for (double* slot : slots) {
            if (!std::getline(ls, field, ','))
                fail("parse_report_csv: bad line " + std::to_string(number));
            *slot = std::stod(field);
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace cdrn
