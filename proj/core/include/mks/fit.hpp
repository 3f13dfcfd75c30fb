#pragma once

// Least-squares decay fits of error-versus-cutoff data.

#include <string>
#include <utility>
#include <vector>

namespace mks {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Ordinary least squares y = slope x + intercept. Needs two distinct x.
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

struct DecayFit {
  /// "exponential": log err = slope E_c + intercept.
  /// "algebraic":   log err = slope log E_c + intercept.
  std::string model;
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  LinearFit exponential;
  LinearFit algebraic;
  int points = 0;  // points above the floor that entered the fit
};

/// Fits both models to the (E_c, err) pairs with err > floor and selects the
/// one with the higher R^2. Throws std::invalid_argument with fewer than
/// four such points.
DecayFit fit_decay(const std::vector<std::pair<double, double>>& errors, double floor = 0.0);

}  // namespace mks
