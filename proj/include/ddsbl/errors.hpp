#pragma once

#include <stdexcept>
#include <string>

namespace ddsbl {

// Array shapes disagree with SystemParams / PilotLayout, or a layout overflows the grid.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A request that cannot be satisfied (too many paths, sparsity above Q, ...).
class InfeasibleError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Solver state became non-finite.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ddsbl
