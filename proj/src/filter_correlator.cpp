#include "shotcorr/filter_correlator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "shotcorr/errors.hpp"

namespace shotcorr {
namespace {

void check_pair(const EvolutionPair& pair) {
  if (!(pair.tau > 0.0) || !std::isfinite(pair.tau)) throw DomainError("evolution time tau must be > 0");
  if (!(pair.delta_t >= 0.0) || !std::isfinite(pair.delta_t)) throw DomainError("delay delta_t must be >= 0");
}

// (prefactor/pi) S(w) / w^2, the common envelope of phase filters.
FilteredIntegrand phase_integrand(const SpectrumModel& spectrum, double prefactor) {
  FilteredIntegrand f;
  const double scale = prefactor / std::numbers::pi;
  f.envelope = [&spectrum, scale](double w) { return scale * spectrum(w) / (w * w); };
  return f;
}

QuadratureSpec window_for(const SpectrumModel& spectrum, const EvolutionPair& pair, const QuadratureSpec& tol) {
  const double t_short = pair.delta_t > 0.0 ? std::min(pair.tau, pair.delta_t) : pair.tau;
  const double t_long = std::max(pair.tau, pair.delta_t);
  return spectral_window(spectrum, t_short, t_long, true, tol);
}

double chi_term(const SpectrumModel& spectrum, const EvolutionPair& pair, Oscillation delay_factor,
                const QuadratureSpec& tol) {
  check_pair(pair);
  FilteredIntegrand f = phase_integrand(spectrum, 16.0);
  f.factors = {{Oscillation::SinSquaredHalf, pair.tau}, {delay_factor, pair.delta_t}};
  return integrate_filtered(f, window_for(spectrum, pair, tol)).value;
}

void check_coupling(const SpectrumModel& spectrum, const QubitParams& qubit) {
  if (qubit.coupling_c == 0.0) return;
  if (const auto* m = std::get_if<OverhauserModel>(&spectrum.params())) {
    const double a = std::abs(m->coupling_c), b = std::abs(qubit.coupling_c);
    if (std::abs(a - b) > 1e-12 * std::max(a, b)) {
      throw DomainError("qubit coupling_c disagrees with the Overhauser spectrum's coupling_c");
    }
  }
}

}  // namespace

void QubitParams::validate() const {
  if (!std::isfinite(omega_q)) throw DomainError("QubitParams: omega_q must be finite");
  if (!std::isfinite(coupling_c)) throw DomainError("QubitParams: coupling_c must be finite");
  if (!(readout_flip_prob >= 0.0 && readout_flip_prob < 0.5)) {
    throw DomainError("QubitParams: readout_flip_prob must lie in [0, 0.5)");
  }
  if (!(dead_time >= 0.0) || !std::isfinite(dead_time)) throw DomainError("QubitParams: dead_time must be >= 0");
}

double filter_F(double omega, const EvolutionPair& pair) {
  if (!(omega >= 0.0)) throw DomainError("filter_F: omega must be >= 0");
  const double s = std::sin(0.5 * omega * pair.tau);
  return 4.0 * s * s * std::cos(omega * pair.delta_t);
}

double phase_variance(const SpectrumModel& spectrum, double tau, const QuadratureSpec& tolerances) {
  check_pair({tau, 0.0});
  FilteredIntegrand f = phase_integrand(spectrum, 4.0);
  f.factors = {{Oscillation::SinSquaredHalf, tau}};
  return integrate_filtered(f, window_for(spectrum, {tau, 0.0}, tolerances)).value;
}

double phase_cross_correlation(const SpectrumModel& spectrum, const EvolutionPair& pair,
                               const QuadratureSpec& tolerances) {
  check_pair(pair);
  FilteredIntegrand f = phase_integrand(spectrum, 4.0);
  f.factors = {{Oscillation::SinSquaredHalf, pair.tau}};
  if (pair.delta_t > 0.0) f.factors.push_back({Oscillation::Cosine, pair.delta_t});
  return integrate_filtered(f, window_for(spectrum, pair, tolerances)).value;
}

double chi_minus(const SpectrumModel& spectrum, const EvolutionPair& pair, const QuadratureSpec& tolerances) {
  if (pair.delta_t == 0.0) {
    check_pair(pair);
    return 0.0;
  }
  return chi_term(spectrum, pair, Oscillation::SinSquaredHalf, tolerances);
}

double chi_plus(const SpectrumModel& spectrum, const EvolutionPair& pair, const QuadratureSpec& tolerances) {
  return chi_term(spectrum, pair, Oscillation::CosSquaredHalf, tolerances);
}

CorrelatorValue autocorrelation_analytic(const SpectrumModel& spectrum, const EvolutionPair& pair,
                                         const QubitParams& qubit, const QuadratureSpec& tolerances) {
  qubit.validate();
  check_coupling(spectrum, qubit);
  CorrelatorValue out;
  out.chi_minus = chi_minus(spectrum, pair, tolerances);
  out.chi_plus = chi_plus(spectrum, pair, tolerances);
  out.value = 0.5 * std::cos(2.0 * qubit.omega_q * pair.tau) * std::exp(-0.5 * out.chi_plus) +
              0.5 * std::exp(-0.5 * out.chi_minus);
  out.physical = pair.physical();
  return out;
}

double t2_star(const SpectrumModel& spectrum, const QuadratureSpec& tolerances) {
  const double var = variance(spectrum, tolerances);
  if (!(var > 0.0)) throw DomainError("T2* undefined for this spectrum: zero noise variance");
  auto g = [&](double tau) { return phase_variance(spectrum, tau, tolerances) - 1.0; };
  double lo = 1.0 / std::sqrt(var);
  double hi = lo;
  double glo = g(lo);
  double ghi = glo;
  for (int i = 0; i < 60 && glo > 0.0; ++i) {
    hi = lo;
    ghi = glo;
    lo /= 4.0;
    glo = g(lo);
  }
  for (int i = 0; i < 60 && ghi < 0.0; ++i) {
    lo = hi;
    glo = ghi;
    hi *= 4.0;
    ghi = g(hi);
  }
  if (glo > 0.0 || ghi < 0.0) throw DomainError("T2* undefined for this spectrum: phase variance never reaches 1");
  return find_root(g, {lo, hi}, {1e-11, 200});
}

const char* to_string(ChiRegime regime) noexcept {
  switch (regime) {
    case ChiRegime::Quadratic: return "quadratic";
    case ChiRegime::Linear: return "linear";
    case ChiRegime::Plateau: return "plateau";
  }
  return "unknown";
}

ChiApproximation chi_minus_approx(const OverhauserModel& model, const EvolutionPair& pair) {
  check_pair(pair);
  SpectrumModel validated(model);
  (void)validated;
  const double c2 = model.coupling_c * model.coupling_c;
  const double tau2 = pair.tau * pair.tau;
  const double dt = pair.delta_t;
  const bool has_cutoff = std::isfinite(model.omega_e);
  const double t_e = has_cutoff ? 1.0 / model.omega_e : 0.0;
  const double t_l = 1.0 / model.omega_l;
  const double field_var = overhauser_field_variance(model);

  ChiApproximation out;
  out.prefactor_a = gamma_fn(1.0 / model.gamma + 1.0);
  out.short_evolution_violated = has_cutoff && pair.tau * model.omega_e >= 0.1;
  out.plateau_alternative = 2.0 * c2 * (tau2 / std::numbers::pi) * field_var * field_var;

  if (has_cutoff && dt < t_e) {
    out.regime = ChiRegime::Quadratic;
    out.value = out.prefactor_a / std::numbers::pi * c2 * model.omega_e * model.omega_l * model.omega_l * tau2 *
                model.s0 * dt * dt;
  } else if (dt < t_l) {
    out.regime = ChiRegime::Linear;
    out.value = c2 * model.omega_l * model.omega_l * tau2 * model.s0 * dt;
  } else {
    out.regime = ChiRegime::Plateau;
    out.value = 2.0 * c2 * tau2 * field_var;
  }
  auto near = [dt](double boundary) { return boundary > 0.0 && dt > boundary / 3.0 && dt < boundary * 3.0; };
  out.crossover = near(t_e) || near(t_l);
  return out;
}

LinearizedCorrelator autocorrelation_linearized(const SpectrumModel& spectrum, const EvolutionPair& pair,
                                                const QuadratureSpec& tolerances) {
  check_pair(pair);
  double structure = 0.0;  // <beta^2> - <beta beta'>
  if (pair.delta_t > 0.0) {
    FilteredIntegrand f;
    f.envelope = [&spectrum](double w) { return 2.0 * spectrum(w) / std::numbers::pi; };
    f.factors = {{Oscillation::SinSquaredHalf, pair.delta_t}};
    structure = integrate_filtered(f, spectral_window(spectrum, pair.delta_t, pair.delta_t, false, tolerances)).value;
  }
  LinearizedCorrelator out;
  const double tau2 = pair.tau * pair.tau;
  out.value = 0.5 - 0.5 * tau2 * structure;
  out.precondition = tau2 * std::abs(structure);
  out.valid = out.precondition < 0.1;
  return out;
}

double correct_fidelity(double raw_correlation, double epsilon) {
  if (!(epsilon >= 0.0 && epsilon < 0.5)) throw DomainError("correct_fidelity: epsilon must lie in [0, 0.5)");
  const double contrast = 1.0 - 2.0 * epsilon;
  return raw_correlation / (contrast * contrast);
}

}  // namespace shotcorr
