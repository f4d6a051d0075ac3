#include "gle/quadrature.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>

namespace gle {
namespace {

using GK = boost::math::quadrature::gauss_kronrod<double, 61>;

double adaptive(const std::function<double(double)>& f, double a, double b, double tol,
                int depth, double& err) {
  double e = 0.0;
  const double v = GK::integrate(f, a, b, 0, 0.0, &e);
  if (e <= tol || depth >= 40) {
    err += e;
    return v;
  }
  const double mid = 0.5 * (a + b);
  return adaptive(f, a, mid, 0.5 * tol, depth + 1, err) +
         adaptive(f, mid, b, 0.5 * tol, depth + 1, err);
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b, double abs_tol,
                 double* error_estimate) {
  double err = 0.0;
  double v = 0.0;
  if (std::isinf(a) || std::isinf(b)) {
    // Boost maps infinite ranges onto finite ones internally.
    v = GK::integrate(f, a, b, 15, abs_tol, &err);
  } else {
    v = adaptive(f, a, b, abs_tol, 0, err);
  }
  if (error_estimate) *error_estimate = err;
  return v;
}

}  // namespace gle
