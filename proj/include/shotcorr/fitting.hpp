#pragma once

// Parameter estimation from measured correlation curves.
//
// Parameters are addressed by name:
//   overhauser: s0, omega_l, omega_e, gamma, coupling_c
//   power_law:  amplitude, alpha, omega_low, omega_high
// Free parameters with a positive lower bound are optimized in log
// coordinates.

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "shotcorr/errors.hpp"
#include "shotcorr/filter_correlator.hpp"
#include "shotcorr/montecarlo.hpp"
#include "shotcorr/spectra.hpp"

namespace shotcorr {

enum class ModelFamily { Overhauser, PowerLaw };

const char* to_string(ModelFamily family) noexcept;
ModelFamily model_family_from_string(const std::string& name);
std::vector<std::string> family_parameters(ModelFamily family);

using ParamMap = std::map<std::string, double>;

SpectrumModel model_from_params(ModelFamily family, const ParamMap& params);

struct FitProblem {
  CorrelationCurve data;
  ModelFamily family = ModelFamily::Overhauser;
  std::map<std::string, std::pair<double, double>> bounds;  // free parameters
  ParamMap fixed;
  QubitParams qubit;
  QuadratureSpec tolerances;

  std::vector<std::string> free_names() const;

  // Every stderr > 0, finite bounds lo < hi, free and fixed parameters
  // disjoint and together complete. Throws ConfigError.
  void validate() const;
};

// A forward-model point failed; index is the data row.
class FitEvaluationError : public NumericalError {
 public:
  FitEvaluationError(const std::string& what, std::size_t index) : NumericalError(what, 0.0, 0.0), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

// Ideal correlator of the model on the data's (tau, delta_t) abscissae.
// `free_values` must lie inside the bounds (DomainError otherwise).
CorrelationCurve predict(const FitProblem& problem, const ParamMap& free_values);

double chi_squared(const FitProblem& problem, const CorrelationCurve& model);

struct FitOptions {
  int n_starts = 8;           // the initial point plus Halton points in the bounds
  int max_evaluations = 10000;  // forward-model curves, shared by all starts
  double polish_step = 1e-3;  // relative coordinate step of the stationarity check
  unsigned threads = 1;
};

struct FitResult {
  ParamMap params;        // free and fixed
  ParamMap uncertainty;   // sqrt of the covariance diagonal, free parameters
  std::vector<std::string> free_names;
  std::vector<std::vector<double>> covariance;  // 2 H^-1, PSD, order of free_names
  double chi_squared = 0.0;
  int dof = 0;
  bool converged = false;
  int n_evals = 0;
  int best_start = -1;
  std::vector<std::string> notes;
};

// Weighted least squares by Nelder-Mead with restarts. The best start is the
// lowest chi^2, ties broken by lexicographic parameter order. Failure of all
// starts gives converged = false with notes, not an exception.
FitResult fit(const FitProblem& problem, const ParamMap& init, const FitOptions& options = {});

// JSON document: family, parameters {name: {value, uncertainty, free}},
// chi_squared, dof, converged, n_evals, covariance, notes.
std::string fit_result_json(const FitResult& result, ModelFamily family);

// Threshold on chi^2(other) - chi^2(best) above which the cutoff exponent
// counts as identified. Chosen here; not derived from a statistical test.
inline constexpr double kGammaDiscriminationThreshold = 9.0;

struct GammaDiscrimination {
  int gamma_hat = 0;
  double delta_chi_squared = 0.0;
  bool indeterminate = true;
  FitResult fit_gamma1;
  FitResult fit_gamma2;
};

// Fits gamma = 1 and gamma = 2 with free s0 and omega_e starting from
// `reference` (omega_l and coupling stay fixed). Bounds span a factor
// `range` around the reference values. Requires data over at least
// [0.1, 10] / reference.omega_e in delta_t unless check_span is false;
// throws DomainError otherwise and NumericalError if either fit does not
// converge.
GammaDiscrimination discriminate_gamma(const CorrelationCurve& data, const OverhauserModel& reference,
                                       const FitOptions& options = {}, double range = 30.0,
                                       bool check_span = true);

struct AlphaSlopeOptions {
  // Optional model to evaluate chi_+; without it chi_+ is taken as negligible.
  const SpectrumModel* chi_plus_model = nullptr;
  double omega_q = 0.0;
  double omega_low = 0.0;  // 0 = unknown, skips the upper range check
};

struct AlphaEstimate {
  double alpha = 0.0;
  double slope = 0.0;
  double slope_stderr = 0.0;
  bool logarithmic = false;  // chi_- linear in ln(delta_t) fits better than a power law
  double chi2_power = 0.0;
  double chi2_log = 0.0;
  bool chi_plus_checked = false;
  bool chi_plus_negligible = true;  // exp(-chi_+/2) < 1e-3 at every point
};

// alpha = 1 + slope of ln chi_- against ln delta_t, with
// chi_- = -2 ln(2 corr - cos(2 Omega tau) exp(-chi_+/2)). Requires one tau,
// delta_t within [10 tau, 0.1 / omega_low], >= 1.5 decades and correlations
// in (0.02, 0.48); throws DomainError otherwise.
AlphaEstimate estimate_alpha_slope(const CorrelationCurve& data, const AlphaSlopeOptions& options = {});

}  // namespace shotcorr
