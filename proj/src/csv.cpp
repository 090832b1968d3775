#include "semsim/csv.hpp"

#include <cstdio>

namespace semsim {

std::string format_g9(double v) {
    char buf[64];
    snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string csv_join(const std::vector<std::string>& cells) {
    std::string out;
    for (size_t i = 0; i < cells.size(); i++) {
        if (i) out += ',';
        out += cells[i];
    }
    return out;
}

} // namespace semsim
