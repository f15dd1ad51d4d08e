#pragma once

// Shot-to-shot correlator of free-induction-decay outcomes for Gaussian
// dephasing noise.
//
// With phases dPhi accumulated over windows of length tau centred at t and
// t + delta_t, the ideal correlator of the +-1 outcomes is
//   <P P'> = 1/2 cos(2 Omega tau) exp(-chi_+ / 2) + 1/2 exp(-chi_- / 2),
//   chi_-+ = (16/pi) int_0^inf S(w) sin^2(w tau/2) {sin^2 | cos^2}(w dt/2) / w^2 dw.
// chi_+ and chi_- are integrated directly rather than assembled from the
// phase variance and cross-correlation; that difference cancels badly when
// <dPhi^2> >> 1 and chi_- = O(1).

#include "shotcorr/numerics.hpp"
#include "shotcorr/spectra.hpp"

namespace shotcorr {

struct QubitParams {
  double omega_q = 0.0;            // qubit splitting Omega, rad/s
  double coupling_c = 0.0;         // rad/(s T); 0 = not specified
  double readout_flip_prob = 0.0;  // symmetric flip probability, [0, 0.5)
  double dead_time = 0.0;          // s, lower bound on delta_t - tau

  void validate() const;
};

struct EvolutionPair {
  double tau = 0.0;      // s, free evolution
  double delta_t = 0.0;  // s, delay between window centres

  // The measurement cycle can only be realised for delta_t >= tau.
  bool physical() const noexcept { return delta_t >= tau; }
};

// 4 sin^2(w tau / 2) cos(w delta_t).
double filter_F(double omega, const EvolutionPair& pair);

// <dPhi(tau)^2> = (4/pi) int S sin^2(w tau/2) / w^2 dw.
double phase_variance(const SpectrumModel& spectrum, double tau, const QuadratureSpec& tolerances = {});

// <dPhi(tau, t) dPhi(tau, t + delta_t)> = (1/pi) int S F / w^2 dw.
double phase_cross_correlation(const SpectrumModel& spectrum, const EvolutionPair& pair,
                               const QuadratureSpec& tolerances = {});

double chi_minus(const SpectrumModel& spectrum, const EvolutionPair& pair, const QuadratureSpec& tolerances = {});
double chi_plus(const SpectrumModel& spectrum, const EvolutionPair& pair, const QuadratureSpec& tolerances = {});

struct CorrelatorValue {
  double value = 0.0;
  double chi_minus = 0.0;
  double chi_plus = 0.0;
  bool physical = true;  // false when delta_t < tau
};

// Ideal correlator; readout errors are not applied here (see correct_fidelity).
// If qubit.coupling_c is set and the spectrum is an OverhauserModel, the two
// couplings must agree in magnitude.
CorrelatorValue autocorrelation_analytic(const SpectrumModel& spectrum, const EvolutionPair& pair,
                                         const QubitParams& qubit = {}, const QuadratureSpec& tolerances = {});

// Evolution time with <dPhi(T2*)^2> = 1. Throws DomainError when the phase
// variance never reaches 1.
double t2_star(const SpectrumModel& spectrum, const QuadratureSpec& tolerances = {});

enum class ChiRegime { Quadratic, Linear, Plateau };

const char* to_string(ChiRegime regime) noexcept;

// Short-evolution approximations of chi_- for the Overhauser spectrum:
//   dt << 1/omega_e            : (a/pi) c^2 omega_e omega_l^2 tau^2 s0 dt^2,  a = Gamma(1/gamma + 1)
//   1/omega_e << dt << 1/omega_l: c^2 omega_l^2 tau^2 s0 dt
//   dt >> 1/omega_l            : 2 c^2 tau^2 <dBz^2> = c^2 s0 omega_l tau^2
// The plateau is the dt -> inf limit of the Lorentzian integral. The
// alternative reading 2 c^2 (tau^2/pi) <dBz^2>^2 is reported alongside for
// comparison (it is not dimensionally a phase and disagrees with quadrature).
struct ChiApproximation {
  double value = 0.0;
  ChiRegime regime = ChiRegime::Linear;
  bool crossover = false;            // delta_t within a factor 3 of a regime boundary
  bool short_evolution_violated = false;  // tau * omega_e >= 0.1
  double prefactor_a = 0.0;
  double plateau_alternative = 0.0;  // 2 c^2 (tau^2/pi) <dBz^2>^2
};

ChiApproximation chi_minus_approx(const OverhauserModel& model, const EvolutionPair& pair);

struct LinearizedCorrelator {
  double value = 0.0;
  double precondition = 0.0;  // tau^2 |<beta beta'> - <beta^2>|
  bool valid = true;          // precondition < 0.1
};

// 1/2 + tau^2/2 <beta(t) beta(t + dt)> - tau^2/2 <beta^2>; the bracket is
// integrated as (2/pi) int S sin^2(w dt/2) dw to avoid cancellation.
LinearizedCorrelator autocorrelation_linearized(const SpectrumModel& spectrum, const EvolutionPair& pair,
                                                const QuadratureSpec& tolerances = {});

// Undo the attenuation (1 - 2 eps)^2 that independent symmetric readout flips
// apply to <s s'>.
double correct_fidelity(double raw_correlation, double epsilon);

}  // namespace shotcorr
