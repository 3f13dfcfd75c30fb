#include "mks/fit.hpp"

#include <cmath>
#include <stdexcept>

namespace mks {

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_line: need at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit_line: abscissae are all equal");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.slope * x[i] + f.intercept);
    ss_res += r * r;
  }
  f.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return f;
}

DecayFit fit_decay(const std::vector<std::pair<double, double>>& errors, double floor) {
  std::vector<double> ec, log_ec, log_err;
  for (const auto& [e, err] : errors) {
    if (!(err > floor) || !(e > 0.0) || !std::isfinite(err)) continue;
    ec.push_back(e);
    log_ec.push_back(std::log(e));
    log_err.push_back(std::log(err));
  }
  if (ec.size() < 4) throw std::invalid_argument("fit_decay: fewer than four errors above the floor");
  DecayFit d;
  d.points = static_cast<int>(ec.size());
  d.exponential = fit_line(ec, log_err);
  d.algebraic = fit_line(log_ec, log_err);
  const LinearFit& best = d.exponential.r2 >= d.algebraic.r2 ? d.exponential : d.algebraic;
  d.model = &best == &d.exponential ? "exponential" : "algebraic";
  d.slope = best.slope;
  d.intercept = best.intercept;
  d.r2 = best.r2;
  return d;
}

}  // namespace mks
