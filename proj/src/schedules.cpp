#include "shotcorr/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

#include "shotcorr/csv.hpp"
#include "shotcorr/errors.hpp"
#include "shotcorr/numerics.hpp"

namespace shotcorr {

double tau_constant_contrast(const OverhauserModel& model, double delta_t, double target) {
  if (!(delta_t > 0.0) || !std::isfinite(delta_t)) throw DomainError("tau_constant_contrast: delta_t must be > 0");
  if (!(target > 0.0)) throw DomainError("tau_constant_contrast: target must be > 0");
  const double coef = model.coupling_c * model.coupling_c * model.omega_l * model.omega_l * model.s0;
  if (!(coef > 0.0) || !std::isfinite(coef)) {
    throw DomainError("tau_constant_contrast: middle-branch coefficient c^2 omega_l^2 s0 must be > 0");
  }
  return std::sqrt(target / (coef * delta_t));
}

const char* to_string(LambertVariant variant) noexcept {
  switch (variant) {
    case LambertVariant::TauDtLog: return "tau_dt_log";
    case LambertVariant::ExactConstancy: return "exact_constancy";
    case LambertVariant::ShortEvolution: return "short_evolution";
  }
  return "unknown";
}

LambertVariant lambert_variant_from_string(const std::string& name) {
  for (LambertVariant v :
       {LambertVariant::TauDtLog, LambertVariant::ExactConstancy, LambertVariant::ShortEvolution}) {
    if (name == to_string(v)) return v;
  }
  throw ConfigError("unknown Lambert schedule variant '" + name +
                    "' (expected tau_dt_log, exact_constancy or short_evolution)");
}

double tau_oneoverf(double c_level, double delta_t, LambertVariant variant) {
  if (!(delta_t > 0.0) || !std::isfinite(delta_t)) throw DomainError("tau_oneoverf: delta_t must be > 0");
  if (!(c_level > 0.0) || !std::isfinite(c_level)) throw DomainError("tau_oneoverf: c_level must be > 0");
  const double dt2 = delta_t * delta_t;
  auto too_small = [&] {
    std::ostringstream msg;
    msg << "delta_t too small for this contrast level: delta_t = " << delta_t << " s";
    return DomainError(msg.str());
  };
  if (variant == LambertVariant::ShortEvolution) {
    // tau < delta_t needs W-1 < -3, i.e. delta_t^2 > 2c/3.
    if (!(dt2 > 2.0 * c_level / 3.0)) throw too_small();
    const double w = lambert_w_minus1(-2.0 * c_level * std::exp(-3.0) / dt2);
    return delta_t * std::exp(1.5 + 0.5 * w);
  }
  constexpr double kBranch = -1.0 / std::numbers::e;
  double x = -2.0 * c_level / dt2;
  if (x < kBranch * (1.0 + 1e-12)) throw too_small();
  x = std::max(x, kBranch);  // absorb rounding at the branch point
  const double w = lambert_w(x);
  return delta_t * std::exp(variant == LambertVariant::TauDtLog ? w : 0.5 * w);
}

double oneoverf_c_level(double amplitude, double chi_target) {
  if (!(amplitude > 0.0) || !(chi_target > 0.0)) throw DomainError("oneoverf_c_level: arguments must be > 0");
  return std::numbers::pi * chi_target / (2.0 * amplitude);
}

Schedule build_schedule(const SpectrumModel& model, const std::vector<double>& delta_t_grid,
                        const ScheduleRule& rule) {
  if (delta_t_grid.empty()) throw DomainError("build_schedule: empty delta_t grid");
  for (std::size_t i = 1; i < delta_t_grid.size(); ++i) {
    if (!(delta_t_grid[i] > delta_t_grid[i - 1])) {
      throw DomainError("build_schedule: delta_t grid must be strictly increasing");
    }
  }
  const auto* overhauser = std::get_if<OverhauserModel>(&model.params());
  double c_level = rule.c_level;
  if (rule.kind == ScheduleRule::Kind::ConstantContrast) {
    if (!overhauser) throw DomainError("constant-contrast schedule requires an Overhauser spectrum");
  } else if (!(c_level > 0.0)) {
    const auto* power = std::get_if<PowerLawModel>(&model.params());
    if (!power) throw DomainError("1/f schedule requires a power-law spectrum or an explicit c_level");
    c_level = oneoverf_c_level(power->amplitude, rule.target);
  }

  Schedule schedule;
  schedule.rule = rule;
  schedule.rule.c_level = rule.kind == ScheduleRule::Kind::OneOverF ? c_level : 0.0;
  std::ostringstream failed;
  std::size_t n_failed = 0;
  for (double dt : delta_t_grid) {
    SchedulePoint p;
    p.delta_t = dt;
    try {
      p.tau = rule.kind == ScheduleRule::Kind::ConstantContrast ? tau_constant_contrast(*overhauser, dt, rule.target)
                                                                : tau_oneoverf(c_level, dt, rule.variant);
    } catch (const DomainError&) {
      failed << (n_failed++ ? ", " : "") << dt;
      continue;
    }
    if (p.tau > dt) p.flags |= kFlagUnphysical;
    if (overhauser && std::isfinite(overhauser->omega_e) && p.tau * overhauser->omega_e >= 0.1) {
      p.flags |= kFlagLongEvolution;
    }
    schedule.points.push_back(p);
  }
  if (n_failed > 0) {
    throw DomainError("schedule rule has no solution at delta_t = " + failed.str() + " s");
  }
  return schedule;
}

std::string flags_to_string(std::uint32_t flags) {
  std::string out;
  auto add = [&out](const char* name) {
    if (!out.empty()) out += '|';
    out += name;
  };
  if (flags & kFlagUnphysical) add("unphysical");
  if (flags & kFlagLongEvolution) add("long_evolution");
  return out;
}

void write_schedule_csv(std::ostream& out, const Schedule& schedule) {
  out << "delta_t_s,tau_s,flags\n";
  for (const SchedulePoint& p : schedule.points) {
    out << csv_number(p.delta_t) << ',' << csv_number(p.tau) << ',' << flags_to_string(p.flags) << '\n';
  }
}

}  // namespace shotcorr
