#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include <boost/math/tools/toms748_solve.hpp>

#include "shotcorr/errors.hpp"
#include "shotcorr/numerics.hpp"

namespace shotcorr {
namespace {

constexpr int kMaxHalley = 50;

// 1/e split into a double and its rounding remainder, so that x + 1/e is
// accurate next to the branch point.
constexpr double kInvEHi = 0.36787944117144233;
constexpr double kInvELo = -1.2428753672788363e-17;

double halley(double x, double w) {
  for (int i = 0; i < kMaxHalley; ++i) {
    const double ew = std::exp(w);
    const double f = w * ew - x;
    const double wp1 = w + 1.0;
    if (wp1 == 0.0) break;
    const double denom = ew * wp1 - 0.5 * (w + 2.0) * f / wp1;
    const double step = f / denom;
    w -= step;
    if (std::abs(step) <= 1e-15 * (1.0 + std::abs(w))) break;
  }
  return w;
}

// Series in p = sqrt(2 (e x + 1)) about the branch point; p -> -p gives W_{-1}.
double branch_series(double p) {
  return -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0 + p * (-43.0 / 540.0 + p * (769.0 / 17280.0 +
                                                                                           p * (-221.0 / 8505.0))))));
}

// e * (x + 1/e), with arguments within rounding of -1/e mapped onto the
// branch point. Throws for x < -1/e.
double branch_distance(double x, const char* who) {
  const double s = (x + kInvEHi) + kInvELo;
  if (s < -4e-17) throw DomainError(std::string(who) + ": argument below -1/e");
  return std::max(0.0, std::numbers::e * s);
}

}  // namespace

double lambert_w(double x) {
  if (std::isnan(x)) throw DomainError("lambert_w: NaN argument");
  const double p = std::sqrt(2.0 * branch_distance(x, "lambert_w"));
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return x;
  if (p < 1e-3) return branch_series(p);
  double w;
  if (x < -0.25) {
    w = branch_series(p);
  } else if (x < 3.0) {
    w = std::log1p(x);
  } else {
    const double l1 = std::log(x);
    const double l2 = std::log(l1);
    w = l1 - l2 + l2 / l1;
  }
  return halley(x, w);
}

double lambert_w_minus1(double x) {
  if (std::isnan(x) || x >= 0.0) throw DomainError("lambert_w_minus1: argument must lie in [-1/e, 0)");
  const double p = std::sqrt(2.0 * branch_distance(x, "lambert_w_minus1"));
  if (p < 1e-3) return branch_series(-p);
  double w;
  if (x < -0.25) {
    w = branch_series(-p);
  } else {
    const double l1 = std::log(-x);
    const double l2 = std::log(-l1);
    w = l1 - l2 + l2 / l1;
  }
  return halley(x, w);
}

double gamma_fn(double x) {
  if (!(x > 0.0)) throw DomainError("gamma_fn: argument must be > 0");
  if (x < 0.5) {
    // Reflection keeps the Lanczos sum in its accurate range.
    return std::numbers::pi / (std::sin(std::numbers::pi * x) * gamma_fn(1.0 - x));
  }
  static constexpr std::array<double, 9> kCoef = {
      0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
      771.32342877765313,   -176.61502916214059,   12.507343278686905,
      -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
  constexpr double kG = 7.0;
  const double z = x - 1.0;
  double a = kCoef[0];
  for (std::size_t i = 1; i < kCoef.size(); ++i) a += kCoef[i] / (z + static_cast<double>(i));
  const double t = z + kG + 0.5;
  const double log_prefactor = (z + 0.5) * std::log(t) - t;
  return std::sqrt(2.0 * std::numbers::pi) * std::exp(log_prefactor) * a;
}

double find_root(const std::function<double(double)>& g, std::pair<double, double> bracket,
                 const RootOptions& options) {
  auto [lo, hi] = bracket;
  if (lo > hi) std::swap(lo, hi);
  const double glo = g(lo);
  const double ghi = g(hi);
  if (glo == 0.0) return lo;
  if (ghi == 0.0) return hi;
  if (std::signbit(glo) == std::signbit(ghi)) {
    throw DomainError("find_root: no sign change in bracket");
  }
  boost::uintmax_t iterations = options.max_iterations;
  auto tol = [rel = options.rel_tol](double a, double b) {
    return std::abs(b - a) <= rel * std::max(std::abs(a), std::abs(b));
  };
  const auto [a, b] = boost::math::tools::toms748_solve(g, lo, hi, glo, ghi, tol, iterations);
  return 0.5 * (a + b);
}

}  // namespace shotcorr
