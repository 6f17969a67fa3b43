#pragma once

// Independent reference computations used by unit and acceptance tests.

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace treefx::testing {

/// log of the integral over mu of prod_i N(r_i; mu, sigma^2) N(mu; m0, tau^2),
/// by adaptive Gauss-Kronrod quadrature around the maximizer.
inline double quadrature_leaf_log_likelihood(const std::vector<double>& r, double sigma, double tau, double m0) {
  const double s2 = sigma * sigma;
  const double t2 = tau * tau;
  auto log_integrand = [&](double mu) {
    double ll = 0.0;
    for (double v : r) ll += -0.5 * std::log(2.0 * std::numbers::pi * s2) - (v - mu) * (v - mu) / (2.0 * s2);
    ll += -0.5 * std::log(2.0 * std::numbers::pi * t2) - (mu - m0) * (mu - m0) / (2.0 * t2);
    return ll;
  };
  // Locate the peak numerically rather than from the conjugate formula.
  double lo = m0 - 50.0 * tau;
  double hi = m0 + 50.0 * tau;
  for (double v : r) {
    lo = std::min(lo, v - 1.0);
    hi = std::max(hi, v + 1.0);
  }
  for (int it = 0; it < 200; ++it) {
    const double a = lo + (hi - lo) / 3.0;
    const double b = hi - (hi - lo) / 3.0;
    if (log_integrand(a) < log_integrand(b)) {
      lo = a;
    } else {
      hi = b;
    }
  }
  const double peak = 0.5 * (lo + hi);
  const double top = log_integrand(peak);
  const double width = 1.0 / std::sqrt(static_cast<double>(r.size()) / s2 + 1.0 / t2);
  auto f = [&](double mu) { return std::exp(log_integrand(mu) - top); };
  double error = 0.0;
  const double integral = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      f, peak - 40.0 * width, peak + 40.0 * width, 15, 1e-14, &error);
  return top + std::log(integral);
}

/// Two-sided one-sample Kolmogorov-Smirnov p-value (asymptotic series).
template <class Cdf>
double ks_pvalue(std::vector<double> sample, Cdf cdf) {
  std::sort(sample.begin(), sample.end());
  const auto n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double F = cdf(sample[i]);
    d = std::max({d, F - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - F});
  }
  const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double p = 0.0;
  for (int j = 1; j <= 100; ++j) {
    p += 2.0 * ((j % 2) ? 1.0 : -1.0) * std::exp(-2.0 * j * j * lambda * lambda);
  }
  return std::clamp(p, 0.0, 1.0);
}

/// Total variation distance between two probability vectors.
inline double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  double tv = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) tv += std::abs(p[i] - q[i]);
  return 0.5 * tv;
}

}  // namespace treefx::testing
