#pragma once

#include <vector>

namespace kinetic {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  int points = 0;
};

// Ordinary least squares y = intercept + slope x; needs at least two distinct x.
LinearFit ols(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace kinetic
