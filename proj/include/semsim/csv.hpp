#pragma once

#include <string>
#include <vector>

namespace semsim {

// Shortest-round-trip numeric formatting used for every CSV cell; integers
// print without a decimal point so files stay byte-deterministic.
std::string format_g9(double v);

std::string csv_join(const std::vector<std::string>& cells);

} // namespace semsim
