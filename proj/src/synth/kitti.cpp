#include "synth/kitti.hpp"

#include <sstream>

#include "core/tensor.hpp"

namespace cdrn {

KittiLabels parse_kitti_labels(const std::string& text, const std::vector<std::string>& classes) {
    KittiLabels out;
    std::istringstream lines(text);
    std::string line;
    int number = 0;
    while (std::getline(lines, line)) {
        ++number;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream fields(line);
        std::string type;
        double truncated, occluded, alpha, x1, y1, x2, y2;
        if (!(fields >> type >> truncated >> occluded >> alpha >> x1 >> y1 >> x2 >> y2))
            fail("kitti label line " + std::to_string(number) + " is malformed: '" + line + "'");
        Box box{static_cast<float>(x1), static_cast<float>(y1), static_cast<float>(x2),
                static_cast<float>(y2)};
        if (type == "DontCare") {
            out.ignore.push_back(box);
            continue;
        }
        for (std::size_t c = 0; c < classes.size(); ++c) {
            if (classes[c] == type) {
                if (!box.valid())
                    fail("kitti label line " + std::to_string(number) + " has a degenerate box");
                out.annotations.push_back({static_cast<int>(c), box});
                break;
            }
        }
    }
    return out;
}

}  // namespace cdrn
