#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

namespace shotcorr {

// Integration window and tolerances for integrals over angular frequency.
//
// The window [omega_min, omega_max] is covered by one leading panel
// [omega_min, log_start] followed by logarithmically spaced panels up to
// omega_max (four per decade before refinement). Breakpoints (kinks, hard
// cutoffs, table nodes) are always panel edges.
struct QuadratureSpec {
  double rel_tol = 1e-8;
  double abs_tol = 1e-30;
  std::size_t max_panels = 200000;
  double omega_min = 0.0;
  double omega_max = 0.0;
  double log_start = 0.0;  // <= omega_min: chosen as omega_max * 1e-12
  std::vector<double> breakpoints;
};

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  std::size_t panels = 0;
  std::size_t evaluations = 0;
  // The requested relative tolerance was unreachable because the integral is
  // many orders below the integrand's magnitude; error is then bounded by
  // 1e-14 * integral of |f| instead.
  bool roundoff_limited = false;
};

// Generic integrand. Panels are additionally capped at one oscillation
// period (osc_period_hint, in rad/s) so that each Gauss rule sees at least
// twelve nodes per period; pass 0 for non-oscillatory integrands.
// Throws NumericalError when max_panels is exhausted.
QuadratureResult integrate_spectral(const std::function<double(double)>& f, double osc_period_hint,
                                    const QuadratureSpec& spec);

// Oscillatory factors that multiply a smooth spectral envelope.
enum class Oscillation {
  SinSquaredHalf,  // sin^2(omega * time / 2)
  CosSquaredHalf,  // cos^2(omega * time / 2)
  Cosine,          // cos(omega * time)
};

struct OscillatoryFactor {
  Oscillation kind;
  double time;  // seconds
};

// envelope(omega) * prod_i factor_i(omega). The envelope must be smooth on
// logarithmic scales (it may be singular at omega = 0 as long as the product
// is not).
struct FilteredIntegrand {
  std::function<double(double)> envelope;
  std::vector<OscillatoryFactor> factors;
};

// Filter-function integrals. On panels where a factor completes less than
// about one radian of phase per half-width the product is integrated
// pointwise with Gauss-Legendre rules. Faster factors are expanded into
// cosines and integrated with a Filon-type rule: the remaining smooth part is
// projected on Legendre polynomials and each cosine is integrated exactly
// through spherical Bessel moments, so the cost does not grow with omega*time.
// Error per panel is estimated by order doubling (12 vs 24 nodes).
QuadratureResult integrate_filtered(const FilteredIntegrand& integrand, const QuadratureSpec& spec);

// Principal branch W0 of the Lambert W function, x >= -1/e.
double lambert_w(double x);

// Lower branch W_{-1}, -1/e <= x < 0, returning w <= -1.
double lambert_w_minus1(double x);

// Gamma function for x > 0 (Lanczos approximation).
double gamma_fn(double x);

struct RootOptions {
  double rel_tol = 1e-12;
  std::size_t max_iterations = 200;
};

// Root of g on [lo, hi]; requires g(lo) * g(hi) <= 0.
double find_root(const std::function<double(double)>& g, std::pair<double, double> bracket,
                 const RootOptions& options = {});

}  // namespace shotcorr
