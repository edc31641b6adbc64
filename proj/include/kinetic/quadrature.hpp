#pragma once

#include <vector>

namespace kinetic {

struct GaussRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

// Gauss-Legendre rule by Newton iteration on the Legendre recurrence.
const GaussRule& gauss_legendre(int order);

}  // namespace kinetic
