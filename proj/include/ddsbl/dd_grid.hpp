#pragma once

#include <complex>
#include <iosfwd>
#include <span>
#include <vector>

namespace ddsbl {

using cd = std::complex<double>;

/// Complex symbols on the delay-Doppler lattice, indexed (k, l) with k the
/// Doppler bin in [0, N) and l the delay bin in [0, M). Storage is row-major
/// over k.
class DDGrid {
 public:
  DDGrid() = default;
  DDGrid(int doppler_bins, int delay_bins);

  int doppler_bins() const { return doppler_bins_; }
  int delay_bins() const { return delay_bins_; }
  std::size_t size() const { return values_.size(); }

  cd& operator()(int k, int l) { return values_[index(k, l)]; }
  const cd& operator()(int k, int l) const { return values_[index(k, l)]; }

  std::span<cd> values() { return values_; }
  std::span<const cd> values() const { return values_; }

  double energy() const;
  bool all_finite() const;

  // One text line per Doppler row: "re,im,re,im,..." with 17 significant digits.
  void write_csv(std::ostream& os) const;
  static DDGrid read_csv(std::istream& is);

  friend bool operator==(const DDGrid&, const DDGrid&) = default;

 private:
  std::size_t index(int k, int l) const {
    return static_cast<std::size_t>(k) * static_cast<std::size_t>(delay_bins_) +
           static_cast<std::size_t>(l);
  }

  int doppler_bins_ = 0;
  int delay_bins_ = 0;
  std::vector<cd> values_;
};

}  // namespace ddsbl
