#include "ddsbl/dd_grid.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "ddsbl/errors.hpp"

namespace ddsbl {

DDGrid::DDGrid(int doppler_bins, int delay_bins)
    : doppler_bins_(doppler_bins), delay_bins_(delay_bins) {
  if (doppler_bins < 1 || delay_bins < 1) {
    throw DimensionError("DDGrid dimensions must be positive");
  }
  values_.assign(static_cast<std::size_t>(doppler_bins) * static_cast<std::size_t>(delay_bins),
                 cd{0.0, 0.0});
}

double DDGrid::energy() const {
  double e = 0.0;
  for (const cd& v : values_) e += std::norm(v);
  return e;
}

bool DDGrid::all_finite() const {
  for (const cd& v : values_) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  }
  return true;
}

void DDGrid::write_csv(std::ostream& os) const {
  os << std::setprecision(17);
  for (int k = 0; k < doppler_bins_; ++k) {
    for (int l = 0; l < delay_bins_; ++l) {
      const cd& v = (*this)(k, l);
      if (l > 0) os << ',';
      os << v.real() << ',' << v.imag();
    }
    os << '\n';
  }
}

DDGrid DDGrid::read_csv(std::istream& is) {
  std::vector<std::vector<cd>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> nums;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) nums.push_back(std::stod(cell));
    if (nums.size() % 2 != 0) throw DimensionError("DDGrid CSV row has an odd value count");
    std::vector<cd> row;
    for (std::size_t i = 0; i < nums.size(); i += 2) row.emplace_back(nums[i], nums[i + 1]);
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw DimensionError("DDGrid CSV rows have different lengths");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DimensionError("empty DDGrid CSV");
  DDGrid grid(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
  for (int k = 0; k < grid.doppler_bins(); ++k) {
    for (int l = 0; l < grid.delay_bins(); ++l) grid(k, l) = rows[k][l];
  }
  return grid;
}

}  // namespace ddsbl
