#pragma once

// Noise power spectra of the dephasing process beta(t).
//
// Convention: S is two-sided, S(w) = S(-w), and only w >= 0 is evaluated.
// Moments use (1/pi) * integral_0^inf, so that
//   <beta^2>                 = (1/pi) int_0^inf S(w) dw
//   <beta(t) beta(t + dt)>   = (1/pi) int_0^inf S(w) cos(w dt) dw.
// All frequencies are angular (rad/s).

#include <iosfwd>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "shotcorr/numerics.hpp"

namespace shotcorr {

// Bohr magneton over hbar, rad/(s T). The coupling of an electron spin with
// g-factor g is |g| * kBohrMagnetonOverHbar.
inline constexpr double kBohrMagnetonOverHbar = 8.794100793e10;

// omega_e value that disables the exponential roll-off.
inline constexpr double kNoCutoff = std::numeric_limits<double>::infinity();

// Lorentzian field spectrum with exponential roll-off, scaled to beta:
//   S_beta(w) = c^2 * s0 / (1 + (w / omega_l)^2) * exp(-(w / omega_e)^gamma)
struct OverhauserModel {
  double s0 = 0.0;          // T^2 s, field spectrum at w -> 0
  double omega_l = 0.0;     // rad/s
  double omega_e = kNoCutoff;  // rad/s
  double gamma = 1.0;
  double coupling_c = 0.0;  // rad/(s T)
};

// S(w) = amplitude * w^-alpha on [omega_low, omega_high], constant below
// omega_low and zero above omega_high. amplitude is S at w = 1 rad/s.
struct PowerLawModel {
  double amplitude = 0.0;  // rad^2/s
  double alpha = 1.0;
  double omega_low = 0.0;
  double omega_high = 0.0;
};

// Band-limited white noise: S = level for w <= omega_high.
struct WhiteModel {
  double level = 0.0;  // rad^2/s
  double omega_high = 0.0;
};

// Log-log interpolated table; S = 0 outside [omega.front(), omega.back()].
struct TabulatedModel {
  std::vector<double> omega;
  std::vector<double> value;
};

// Where a spectrum has structure, used to lay out integration windows and
// mode grids.
struct SpectralSupport {
  double knee_low = 0.0;   // 0 when the spectrum is flat down to w = 0
  double knee_high = 0.0;
  double upper = std::numeric_limits<double>::infinity();  // S negligible above
  std::vector<double> breakpoints;
};

class SpectrumModel {
 public:
  using Variant = std::variant<OverhauserModel, PowerLawModel, WhiteModel, TabulatedModel>;

  // Constructors validate the model invariants and throw DomainError.
  SpectrumModel(OverhauserModel model);
  SpectrumModel(PowerLawModel model);
  SpectrumModel(WhiteModel model);
  SpectrumModel(TabulatedModel model);

  const Variant& params() const noexcept { return model_; }
  const char* family() const noexcept;

  // Unchecked evaluation for w >= 0.
  double operator()(double omega) const noexcept;

  SpectralSupport support() const;

  // The same shape with S multiplied by factor >= 0.
  SpectrumModel scaled(double factor) const;

 private:
  Variant model_;
};

// S_beta(omega); throws DomainError for omega < 0.
double evaluate(const SpectrumModel& spectrum, double omega);

// <beta^2>. Only the tolerance fields of `tolerances` are used.
double variance(const SpectrumModel& spectrum, const QuadratureSpec& tolerances = {});

// <beta(t) beta(t + delta_t)> for delta_t >= 0.
double beta_autocorrelation(const SpectrumModel& spectrum, double delta_t, const QuadratureSpec& tolerances = {});

// Integration window for a spectral integral whose filter involves the
// timescales t_short <= t_long (0 when absent). `filtered` marks integrands
// carrying the extra 1/w^2 of phase filters, which need less headroom above
// the spectrum's knees.
QuadratureSpec spectral_window(const SpectrumModel& spectrum, double t_short, double t_long, bool filtered,
                               const QuadratureSpec& tolerances);

// s0 of the Lorentzian that gives rms field `rms_field` (T):
// s0 = 2 <dBz^2> / omega_l (exact without roll-off).
double overhauser_s0_for_rms(double rms_field, double omega_l);

// Field variance s0 * omega_l / 2 of the Lorentzian without roll-off.
double overhauser_field_variance(const OverhauserModel& model);

// Two-column CSV with header `omega_rad_per_s,S`, rows strictly ascending.
TabulatedModel parse_tabulated_csv(std::istream& in);
TabulatedModel load_tabulated_csv(const std::string& path);

}  // namespace shotcorr
