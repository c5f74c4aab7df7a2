#pragma once

#include <string>
#include <vector>

namespace cdrn {

struct EvalRow {
    std::string model;
    double psnr = 0;
    double ssim = 0;
    double map = 0;
    double mar = 0;
};

// Markdown table with PSNR at two decimals and SSIM/mAP/mAR at four, one
// protocol line in the header. Row order is preserved.
std::string render_report_markdown(const std::vector<EvalRow>& rows,
                                   const std::string& protocol_note);

// Full-precision CSV that round-trips through parse_report_csv.
std::string render_report_csv(const std::vector<EvalRow>& rows);
std::vector<EvalRow> parse_report_csv(const std::string& text);

}  // namespace cdrn
