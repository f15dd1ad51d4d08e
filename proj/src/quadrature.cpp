#include "shotcorr/numerics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <string>

#include "shotcorr/errors.hpp"

namespace shotcorr {
namespace {

// Phase swept across a panel half-width below which an oscillatory factor is
// treated as part of the smooth integrand.
constexpr double kSlowPhase = 2.0;
constexpr int kPanelsPerDecade = 4;

struct GaussRule {
  int n = 0;
  std::vector<double> x;
  std::vector<double> w;
  // (2l+1)/2 * w_q * P_l(x_q), row-major [l][q]; discrete Legendre projection.
  std::vector<double> projection;

  explicit GaussRule(int order) : n(order), x(order), w(order), projection(order * order) {
    for (int i = 0; i < n; ++i) {
      double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p0 = 1.0, p1 = z;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (z * p1 - p0) / (z * z - 1.0);
        const double dz = p1 / dp;
        z -= dz;
        if (std::abs(dz) < 1e-16) break;
      }
      x[i] = z;
      w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    for (int q = 0; q < n; ++q) {
      double p0 = 1.0, p1 = x[q];
      for (int l = 0; l < n; ++l) {
        double pl;
        if (l == 0) {
          pl = 1.0;
        } else if (l == 1) {
          pl = x[q];
        } else {
          pl = ((2.0 * l - 1.0) * x[q] * p1 - (l - 1.0) * p0) / l;
          p0 = p1;
          p1 = pl;
        }
        projection[l * n + q] = 0.5 * (2.0 * l + 1.0) * w[q] * pl;
      }
    }
  }
};

const GaussRule& coarse_rule() {
  static const GaussRule rule(12);
  return rule;
}

const GaussRule& fine_rule() {
  static const GaussRule rule(24);
  return rule;
}

// j_l(k) for l = 0..n-1 and k > 0. Upward recurrence is stable for l < k;
// otherwise Miller's downward recurrence normalised by sum (2l+1) j_l^2 = 1.
void spherical_bessel(double k, int n, std::array<double, 64>& out) {
  if (k >= n) {
    const double s = std::sin(k), c = std::cos(k);
    out[0] = s / k;
    if (n > 1) out[1] = s / (k * k) - c / k;
    for (int l = 1; l + 1 < n; ++l) out[l + 1] = (2.0 * l + 1.0) / k * out[l] - out[l - 1];
    return;
  }
  const int start = n + 16 + static_cast<int>(std::sqrt(40.0 * n));
  std::array<double, 128> f{};
  f[start + 1] = 0.0;
  f[start] = 1.0;
  for (int l = start; l >= 1; --l) {
    f[l - 1] = (2.0 * l + 1.0) / k * f[l] - f[l + 1];
    if (std::abs(f[l - 1]) > 1e100) {
      for (int m = l - 1; m <= start + 1; ++m) f[m] *= 1e-100;
    }
  }
  double norm = 0.0;
  for (int l = start; l >= 0; --l) norm += (2.0 * l + 1.0) * f[l] * f[l];
  double scale = 1.0 / std::sqrt(norm);
  // Fix the overall sign against the closed forms of j0 or j1.
  const double j0 = std::sin(k) / k;
  const double j1 = std::sin(k) / (k * k) - std::cos(k) / k;
  if (std::abs(j0) >= std::abs(j1)) {
    if ((j0 < 0) != (f[0] < 0)) scale = -scale;
  } else {
    if ((j1 < 0) != (f[1] < 0)) scale = -scale;
  }
  for (int l = 0; l < n; ++l) out[l] = f[l] * scale;
}

struct Panel {
  double a, b, value, error, magnitude;
};

struct ByError {
  bool operator()(const Panel& p, const Panel& q) const { return p.error < q.error; }
};

struct PanelEstimate {
  double coarse = 0.0;
  double fine = 0.0;
  double magnitude = 0.0;  // integral of |smooth part|, sets the roundoff floor
};

// Relative to the integrand's L1 magnitude, the accuracy double arithmetic can
// deliver when the integral itself is much smaller (oscillatory cancellation).
constexpr double kRoundoffFloor = 1e-14;

std::vector<double> initial_edges(const QuadratureSpec& spec, double period) {
  const double lo = spec.omega_min;
  const double hi = spec.omega_max;
  if (!(hi > lo) || !std::isfinite(hi) || lo < 0.0) {
    throw DomainError("quadrature window must satisfy 0 <= omega_min < omega_max < inf");
  }
  if (spec.rel_tol <= 0.0 || spec.max_panels < 1) {
    throw DomainError("quadrature tolerance and panel budget must be positive");
  }
  double start = spec.log_start;
  if (start <= lo) start = lo > 0.0 ? lo : hi * 1e-12;
  start = std::min(start, hi);

  std::vector<double> edges;
  edges.push_back(lo);
  if (start > lo) edges.push_back(start);
  const double decades = std::log10(hi / start);
  const int n = std::max(1, static_cast<int>(std::ceil(kPanelsPerDecade * decades)));
  for (int i = 1; i <= n; ++i) edges.push_back(start * std::pow(hi / start, static_cast<double>(i) / n));
  edges.back() = hi;
  for (double bp : spec.breakpoints) {
    if (bp > lo && bp < hi) edges.push_back(bp);
  }
  std::sort(edges.begin(), edges.end());
  std::vector<double> unique;
  for (double e : edges) {
    if (unique.empty() || e - unique.back() > 1e-14 * std::max(1.0, e)) unique.push_back(e);
  }
  unique.back() = hi;

  if (period > 0.0) {
    std::vector<double> split;
    for (std::size_t i = 0; i + 1 < unique.size(); ++i) {
      const double a = unique[i], b = unique[i + 1];
      const double pieces = std::ceil((b - a) / period);
      if (pieces > static_cast<double>(spec.max_panels)) {
        throw NumericalError("oscillation period requires more panels than max_panels", 0.0,
                             std::numeric_limits<double>::infinity());
      }
      const auto m = static_cast<std::size_t>(std::max(1.0, pieces));
      for (std::size_t j = 0; j < m; ++j) split.push_back(a + (b - a) * static_cast<double>(j) / m);
    }
    split.push_back(hi);
    unique = std::move(split);
  }
  if (unique.size() - 1 > spec.max_panels) {
    throw NumericalError("initial panelling exceeds max_panels", 0.0, std::numeric_limits<double>::infinity());
  }
  return unique;
}

template <typename Rule>
QuadratureResult adaptive(const std::vector<double>& edges, const QuadratureSpec& spec, Rule&& rule,
                          std::size_t evals_per_panel) {
  std::priority_queue<Panel, std::vector<Panel>, ByError> open;
  std::vector<Panel> closed;
  double total = 0.0, total_error = 0.0, stuck_error = 0.0, magnitude = 0.0;
  std::size_t evaluations = 0;

  auto evaluate = [&](double a, double b) {
    const PanelEstimate est = rule(a, b);
    evaluations += evals_per_panel;
    return Panel{a, b, est.fine, std::abs(est.fine - est.coarse), est.magnitude};
  };

  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    Panel p = evaluate(edges[i], edges[i + 1]);
    total += p.value;
    total_error += p.error;
    magnitude += p.magnitude;
    open.push(p);
  }
  std::size_t count = edges.size() - 1;

  auto tolerance = [&] {
    return std::max({spec.rel_tol * std::abs(total), spec.abs_tol, kRoundoffFloor * magnitude});
  };

  while (total_error + stuck_error > tolerance()) {
    if (open.empty()) break;
    if (count >= spec.max_panels) {
      throw NumericalError("spectral quadrature did not converge within max_panels (" +
                               std::to_string(spec.max_panels) + ")",
                           total, total_error + stuck_error);
    }
    const Panel worst = open.top();
    open.pop();
    const double width = worst.b - worst.a;
    if (width <= 8.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(worst.a), std::abs(worst.b))) {
      total_error -= worst.error;
      stuck_error += worst.error;
      closed.push_back(worst);
      continue;
    }
    const double mid = (worst.a > 0.0 && worst.b / worst.a > 4.0) ? std::sqrt(worst.a * worst.b)
                                                                  : 0.5 * (worst.a + worst.b);
    const Panel left = evaluate(worst.a, mid);
    const Panel right = evaluate(mid, worst.b);
    total += left.value + right.value - worst.value;
    total_error += left.error + right.error - worst.error;
    magnitude += left.magnitude + right.magnitude - worst.magnitude;
    open.push(left);
    open.push(right);
    ++count;
  }

  while (!open.empty()) {
    closed.push_back(open.top());
    open.pop();
  }
  std::sort(closed.begin(), closed.end(), [](const Panel& p, const Panel& q) { return p.a < q.a; });
  // Neumaier summation in frequency order.
  double sum = 0.0, comp = 0.0, err = 0.0;
  for (const Panel& p : closed) {
    const double t = sum + p.value;
    comp += std::abs(sum) >= std::abs(p.value) ? (sum - t) + p.value : (p.value - t) + sum;
    sum = t;
    err += p.error;
  }
  sum += comp;
  QuadratureResult result{sum, err, closed.size(), evaluations, false};
  const double requested = std::max(spec.rel_tol * std::abs(sum), spec.abs_tol);
  if (result.error > requested) {
    if (result.error > kRoundoffFloor * magnitude) {
      throw NumericalError("spectral quadrature stalled on unresolvable panels", sum, result.error);
    }
    result.roundoff_limited = true;
  }
  return result;
}

double factor_value(const OscillatoryFactor& f, double omega) {
  const double phase = omega * f.time;
  switch (f.kind) {
    case Oscillation::SinSquaredHalf: {
      const double s = std::sin(0.5 * phase);
      return s * s;
    }
    case Oscillation::CosSquaredHalf: {
      const double c = std::cos(0.5 * phase);
      return c * c;
    }
    case Oscillation::Cosine:
      return std::cos(phase);
  }
  return 0.0;
}

struct CosineTerm {
  double coef;
  double freq;
};

// Expands a product of oscillatory factors into sum_t coef_t cos(omega freq_t).
std::vector<CosineTerm> expand(const std::vector<const OscillatoryFactor*>& fast) {
  std::vector<CosineTerm> terms{{1.0, 0.0}};
  for (const OscillatoryFactor* f : fast) {
    std::vector<CosineTerm> next;
    const double t = f->time;
    for (const CosineTerm& term : terms) {
      switch (f->kind) {
        case Oscillation::SinSquaredHalf:
          next.push_back({0.5 * term.coef, term.freq});
          next.push_back({-0.25 * term.coef, term.freq + t});
          next.push_back({-0.25 * term.coef, std::abs(term.freq - t)});
          break;
        case Oscillation::CosSquaredHalf:
          next.push_back({0.5 * term.coef, term.freq});
          next.push_back({0.25 * term.coef, term.freq + t});
          next.push_back({0.25 * term.coef, std::abs(term.freq - t)});
          break;
        case Oscillation::Cosine:
          next.push_back({0.5 * term.coef, term.freq + t});
          next.push_back({0.5 * term.coef, std::abs(term.freq - t)});
          break;
      }
    }
    std::sort(next.begin(), next.end(), [](const CosineTerm& p, const CosineTerm& q) { return p.freq < q.freq; });
    terms.clear();
    for (const CosineTerm& term : next) {
      if (!terms.empty() && terms.back().freq == term.freq) {
        terms.back().coef += term.coef;
      } else {
        terms.push_back(term);
      }
    }
  }
  return terms;
}

struct FilonValue {
  double value;
  double magnitude;
};

FilonValue filon_panel(const FilteredIntegrand& integrand, const GaussRule& rule, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);

  std::vector<const OscillatoryFactor*> slow, fast;
  for (const OscillatoryFactor& f : integrand.factors) {
    (h * f.time > kSlowPhase ? fast : slow).push_back(&f);
  }

  std::array<double, 64> g{};
  double pointwise = 0.0, magnitude = 0.0;
  if (fast.empty()) {
    for (int q = 0; q < rule.n; ++q) {
      const double omega = c + h * rule.x[q];
      double v = integrand.envelope(omega);
      for (const OscillatoryFactor* f : slow) v *= factor_value(*f, omega);
      pointwise += rule.w[q] * v;
      magnitude += rule.w[q] * std::abs(v);
    }
    return {h * pointwise, h * magnitude};
  }

  const std::vector<CosineTerm> terms = expand(fast);
  std::vector<CosineTerm> slow_terms, fast_terms;
  double coef_sum = 0.0;
  for (const CosineTerm& t : terms) {
    if (t.coef == 0.0) continue;
    coef_sum += std::abs(t.coef);
    (h * t.freq > kSlowPhase ? fast_terms : slow_terms).push_back(t);
  }

  for (int q = 0; q < rule.n; ++q) {
    const double omega = c + h * rule.x[q];
    double v = integrand.envelope(omega);
    for (const OscillatoryFactor* f : slow) v *= factor_value(*f, omega);
    g[q] = v;
    magnitude += rule.w[q] * std::abs(v);
    double s = 0.0;
    for (const CosineTerm& t : slow_terms) s += t.coef * std::cos(omega * t.freq);
    pointwise += rule.w[q] * v * s;
  }

  std::array<double, 64> coeff{};
  for (int l = 0; l < rule.n; ++l) {
    double s = 0.0;
    for (int q = 0; q < rule.n; ++q) s += rule.projection[l * rule.n + q] * g[q];
    coeff[l] = s;
  }

  double oscillatory = 0.0;
  std::array<double, 64> jl{};
  for (const CosineTerm& t : fast_terms) {
    const double k = h * t.freq;
    spherical_bessel(k, rule.n, jl);
    const double phi = std::fmod(t.freq * c, 2.0 * std::numbers::pi);
    const double cp = std::cos(phi), sp = std::sin(phi);
    // Re[e^{i phi} i^l] cycles through cos, -sin, -cos, sin.
    double s = 0.0;
    for (int l = 0; l < rule.n; ++l) {
      double rot = 0.0;
      switch (l & 3) {
        case 0: rot = cp; break;
        case 1: rot = -sp; break;
        case 2: rot = -cp; break;
        default: rot = sp; break;
      }
      s += coeff[l] * jl[l] * rot;
    }
    oscillatory += t.coef * 2.0 * s;
  }
  return {h * (pointwise + oscillatory), h * magnitude * coef_sum};
}

}  // namespace

QuadratureResult integrate_spectral(const std::function<double(double)>& f, double osc_period_hint,
                                    const QuadratureSpec& spec) {
  const std::vector<double> edges = initial_edges(spec, osc_period_hint);
  auto rule = [&](double a, double b) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    PanelEstimate est;
    const GaussRule& g12 = coarse_rule();
    const GaussRule& g24 = fine_rule();
    for (int q = 0; q < g12.n; ++q) est.coarse += g12.w[q] * f(c + h * g12.x[q]);
    for (int q = 0; q < g24.n; ++q) {
      const double v = f(c + h * g24.x[q]);
      est.fine += g24.w[q] * v;
      est.magnitude += g24.w[q] * std::abs(v);
    }
    est.coarse *= h;
    est.fine *= h;
    est.magnitude *= h;
    return est;
  };
  return adaptive(edges, spec, rule, 36);
}

QuadratureResult integrate_filtered(const FilteredIntegrand& integrand, const QuadratureSpec& spec) {
  if (!integrand.envelope) throw DomainError("filtered integrand needs an envelope");
  for (const OscillatoryFactor& f : integrand.factors) {
    if (!(f.time >= 0.0) || !std::isfinite(f.time)) throw DomainError("oscillation time must be finite and >= 0");
  }
  const std::vector<double> edges = initial_edges(spec, 0.0);
  auto rule = [&](double a, double b) {
    const FilonValue coarse = filon_panel(integrand, coarse_rule(), a, b);
    const FilonValue fine = filon_panel(integrand, fine_rule(), a, b);
    return PanelEstimate{coarse.value, fine.value, fine.magnitude};
  };
  return adaptive(edges, spec, rule, 36);
}

}  // namespace shotcorr
