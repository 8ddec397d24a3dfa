#pragma once

#include <cstddef>
#include <vector>

#include "sinsim/matrix.hpp"

namespace sinsim {

/// Two augmented views of the same source samples and, once the model has
/// run, their representations h = encoder(x) and projections z = head(h).
struct BatchPair {
  Matrix x1;
  Matrix x2;
  Matrix h1;
  Matrix h2;
  Matrix z1;
  Matrix z2;
  /// Row i of x1 and x2 both derive from source sample pair_index[i].
  std::vector<std::size_t> pair_index;
};

}  // namespace sinsim
