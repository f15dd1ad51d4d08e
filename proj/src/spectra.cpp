#include "shotcorr/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "shotcorr/errors.hpp"

namespace shotcorr {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

bool positive_finite(double x) { return x > 0.0 && std::isfinite(x); }

void validate(const OverhauserModel& m) {
  if (!positive_finite(m.s0)) throw DomainError("OverhauserModel: s0 must be > 0");
  if (!positive_finite(m.omega_l)) throw DomainError("OverhauserModel: omega_l must be > 0");
  if (!(m.omega_e > m.omega_l)) throw DomainError("OverhauserModel: omega_l < omega_e required");
  if (!positive_finite(m.gamma)) throw DomainError("OverhauserModel: gamma must be > 0");
  if (!std::isfinite(m.coupling_c) || m.coupling_c == 0.0) {
    throw DomainError("OverhauserModel: coupling_c must be finite and nonzero");
  }
}

void validate(const PowerLawModel& m) {
  if (!(m.amplitude >= 0.0) || !std::isfinite(m.amplitude)) throw DomainError("PowerLawModel: amplitude must be >= 0");
  if (!(m.alpha >= 0.0 && m.alpha < 3.0)) throw DomainError("PowerLawModel: alpha must lie in [0, 3)");
  if (!positive_finite(m.omega_high)) throw DomainError("PowerLawModel: omega_high must be finite and > 0");
  if (!(m.omega_low >= 0.0 && m.omega_low < m.omega_high)) {
    throw DomainError("PowerLawModel: 0 <= omega_low < omega_high required");
  }
  if (m.alpha >= 1.0 && !(m.omega_low > 0.0)) {
    throw DomainError("PowerLawModel: omega_low > 0 required for alpha >= 1");
  }
}

void validate(const WhiteModel& m) {
  if (!(m.level >= 0.0) || !std::isfinite(m.level)) throw DomainError("WhiteModel: level must be >= 0");
  if (!positive_finite(m.omega_high)) throw DomainError("WhiteModel: omega_high must be finite and > 0");
}

void validate(const TabulatedModel& m) {
  if (m.omega.size() != m.value.size() || m.omega.size() < 2) {
    throw DomainError("TabulatedModel: need at least two (omega, S) pairs");
  }
  for (std::size_t i = 0; i < m.omega.size(); ++i) {
    if (!positive_finite(m.omega[i])) throw DomainError("TabulatedModel: omega must be finite and > 0");
    if (!(m.value[i] >= 0.0) || !std::isfinite(m.value[i])) throw DomainError("TabulatedModel: S must be >= 0");
    if (i > 0 && !(m.omega[i] > m.omega[i - 1])) throw DomainError("TabulatedModel: omega must be strictly increasing");
  }
}

double eval_model(const OverhauserModel& m, double w) {
  const double x = w / m.omega_l;
  double s = m.coupling_c * m.coupling_c * m.s0 / (1.0 + x * x);
  if (std::isfinite(m.omega_e)) s *= std::exp(-std::pow(w / m.omega_e, m.gamma));
  return s;
}

double eval_model(const PowerLawModel& m, double w) {
  if (w > m.omega_high) return 0.0;
  if (m.alpha == 0.0) return m.amplitude;
  if (w <= 0.0 && m.omega_low == 0.0) return std::numeric_limits<double>::infinity();
  return m.amplitude * std::pow(std::max(w, m.omega_low), -m.alpha);
}

double eval_model(const WhiteModel& m, double w) { return w <= m.omega_high ? m.level : 0.0; }

double eval_model(const TabulatedModel& m, double w) {
  if (w < m.omega.front() || w > m.omega.back()) return 0.0;
  const auto it = std::upper_bound(m.omega.begin(), m.omega.end(), w);
  const std::size_t i = it == m.omega.end() ? m.omega.size() - 2 : static_cast<std::size_t>(it - m.omega.begin()) - 1;
  const double w0 = m.omega[i], w1 = m.omega[i + 1];
  const double s0 = m.value[i], s1 = m.value[i + 1];
  if (s0 > 0.0 && s1 > 0.0) {
    const double t = std::log(w / w0) / std::log(w1 / w0);
    return s0 * std::pow(s1 / s0, t);
  }
  return s0 + (s1 - s0) * (w - w0) / (w1 - w0);
}

}  // namespace

SpectrumModel::SpectrumModel(OverhauserModel model) : model_(model) { validate(model); }
SpectrumModel::SpectrumModel(PowerLawModel model) : model_(model) { validate(model); }
SpectrumModel::SpectrumModel(WhiteModel model) : model_(model) { validate(model); }
SpectrumModel::SpectrumModel(TabulatedModel model) : model_(std::move(model)) {
  validate(std::get<TabulatedModel>(model_));
}

const char* SpectrumModel::family() const noexcept {
  return std::visit(Overloaded{[](const OverhauserModel&) { return "overhauser"; },
                               [](const PowerLawModel&) { return "power_law"; },
                               [](const WhiteModel&) { return "white"; },
                               [](const TabulatedModel&) { return "tabulated"; }},
                    model_);
}

double SpectrumModel::operator()(double omega) const noexcept {
  return std::visit([omega](const auto& m) { return eval_model(m, omega); }, model_);
}

SpectralSupport SpectrumModel::support() const {
  return std::visit(
      Overloaded{
          [](const OverhauserModel& m) {
            SpectralSupport s;
            s.knee_low = m.omega_l;
            if (std::isfinite(m.omega_e)) {
              s.knee_high = m.omega_e;
              // exp(-80) below the roll-off.
              s.upper = m.omega_e * std::pow(80.0, 1.0 / m.gamma);
              s.breakpoints = {m.omega_l, m.omega_e};
            } else {
              s.knee_high = m.omega_l;
              s.breakpoints = {m.omega_l};
            }
            return s;
          },
          [](const PowerLawModel& m) {
            SpectralSupport s;
            s.knee_low = m.omega_low;
            s.knee_high = m.omega_high;
            s.upper = m.omega_high;
            s.breakpoints = {m.omega_high};
            if (m.omega_low > 0.0) s.breakpoints.push_back(m.omega_low);
            return s;
          },
          [](const WhiteModel& m) {
            SpectralSupport s;
            s.knee_high = m.omega_high;
            s.upper = m.omega_high;
            s.breakpoints = {m.omega_high};
            return s;
          },
          [](const TabulatedModel& m) {
            SpectralSupport s;
            s.knee_low = m.omega.front();
            s.knee_high = m.omega.back();
            s.upper = m.omega.back();
            s.breakpoints = m.omega;
            return s;
          }},
      model_);
}

SpectrumModel SpectrumModel::scaled(double factor) const {
  if (!(factor >= 0.0) || !std::isfinite(factor)) throw DomainError("scale factor must be finite and >= 0");
  return std::visit(Overloaded{[&](OverhauserModel m) { m.s0 *= factor; return SpectrumModel(m); },
                               [&](PowerLawModel m) { m.amplitude *= factor; return SpectrumModel(m); },
                               [&](WhiteModel m) { m.level *= factor; return SpectrumModel(m); },
                               [&](TabulatedModel m) {
                                 for (double& v : m.value) v *= factor;
                                 return SpectrumModel(std::move(m));
                               }},
                    model_);
}

double evaluate(const SpectrumModel& spectrum, double omega) {
  if (!(omega >= 0.0)) throw DomainError("evaluate: omega must be >= 0");
  return spectrum(omega);
}

QuadratureSpec spectral_window(const SpectrumModel& spectrum, double t_short, double t_long, bool filtered,
                               const QuadratureSpec& tolerances) {
  const SpectralSupport sup = spectrum.support();
  QuadratureSpec spec = tolerances;
  double low = std::numeric_limits<double>::infinity();
  if (sup.knee_low > 0.0) low = sup.knee_low;
  if (t_long > 0.0) low = std::min(low, 1.0 / t_long);
  double high;
  if (std::isfinite(sup.upper)) {
    high = sup.upper;
  } else {
    double base = sup.knee_high;
    if (t_short > 0.0) base = std::max(base, 1.0 / t_short);
    high = base * (filtered ? 1e3 : 1e12);
  }
  if (!std::isfinite(low)) low = high * 1e-9;
  spec.omega_min = 0.0;
  spec.log_start = std::min(low * 1e-3, high * 1e-3);
  spec.omega_max = high;
  spec.breakpoints = sup.breakpoints;
  return spec;
}

double variance(const SpectrumModel& spectrum, const QuadratureSpec& tolerances) {
  return beta_autocorrelation(spectrum, 0.0, tolerances);
}

double beta_autocorrelation(const SpectrumModel& spectrum, double delta_t, const QuadratureSpec& tolerances) {
  if (!(delta_t >= 0.0) || !std::isfinite(delta_t)) throw DomainError("beta_autocorrelation: delta_t must be >= 0");
  FilteredIntegrand f;
  f.envelope = [&spectrum](double w) { return spectrum(w) / std::numbers::pi; };
  if (delta_t > 0.0) f.factors.push_back({Oscillation::Cosine, delta_t});
  return integrate_filtered(f, spectral_window(spectrum, delta_t, delta_t, false, tolerances)).value;
}

double overhauser_s0_for_rms(double rms_field, double omega_l) {
  if (!positive_finite(rms_field) || !positive_finite(omega_l)) {
    throw DomainError("overhauser_s0_for_rms: rms and omega_l must be > 0");
  }
  return 2.0 * rms_field * rms_field / omega_l;
}

double overhauser_field_variance(const OverhauserModel& model) { return 0.5 * model.s0 * model.omega_l; }

TabulatedModel parse_tabulated_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("tabulated spectrum: empty file");
  line.erase(std::remove_if(line.begin(), line.end(), [](char ch) { return ch == '\r' || ch == ' '; }), line.end());
  if (line != "omega_rad_per_s,S") {
    throw ConfigError("tabulated spectrum: header must be 'omega_rad_per_s,S'");
  }
  TabulatedModel model;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::istringstream ss(line);
    double w = 0.0, s = 0.0;
    char comma = 0;
    if (!(ss >> w >> comma >> s) || comma != ',') {
      throw ConfigError("tabulated spectrum: malformed row " + std::to_string(row));
    }
    if (!model.omega.empty() && !(w > model.omega.back())) {
      throw ConfigError("tabulated spectrum: row " + std::to_string(row) + " is not in ascending omega order");
    }
    model.omega.push_back(w);
    model.value.push_back(s);
  }
  validate(model);
  return model;
}

TabulatedModel load_tabulated_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open tabulated spectrum file: " + path);
  return parse_tabulated_csv(in);
}

}  // namespace shotcorr
