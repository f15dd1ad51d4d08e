#pragma once

// Evolution-time schedules tau(delta_t) that hold the correlation signal at a
// fixed level.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "shotcorr/spectra.hpp"

namespace shotcorr {

// tau such that the linear-regime approximation c^2 omega_l^2 s0 tau^2 dt
// equals `target`.
double tau_constant_contrast(const OverhauserModel& model, double delta_t, double target = 2.0);

// Lambert-W schedules for 1/f noise. With w = W(x):
//   TauDtLog       tau = dt exp[W0(-2c/dt^2)]        holds tau dt ln(dt/tau) = 2c
//   ExactConstancy tau = dt exp[W0(-2c/dt^2) / 2]    holds tau^2 ln(dt/tau) = c
//   ShortEvolution tau = dt e^{3/2} exp[W-1(-2c e^{-3}/dt^2) / 2]
//                                                    holds tau^2 (ln(dt/tau) + 3/2) = c
// The principal branch only reaches tau >= dt/e (or dt e^{-1/2}); the last
// form takes the W-1 branch, which gives tau << dt, and includes the
// 3/2 tau^2 term of the exact 1/f result
//   chi_- = (2A/pi) tau^2 (ln(dt/tau) + 3/2) + O(tau^4/dt^2).
enum class LambertVariant { TauDtLog, ExactConstancy, ShortEvolution };

const char* to_string(LambertVariant variant) noexcept;
LambertVariant lambert_variant_from_string(const std::string& name);

// c_level in s^2. Throws DomainError ("delta_t too small for this contrast
// level") when the schedule has no solution with tau < delta_t.
double tau_oneoverf(double c_level, double delta_t, LambertVariant variant);

// c_level for which the ShortEvolution schedule holds chi_- = chi_target on a
// pure 1/f spectrum S = amplitude / omega.
double oneoverf_c_level(double amplitude, double chi_target);

enum ScheduleFlag : std::uint32_t {
  kFlagNone = 0,
  kFlagUnphysical = 1u << 0,      // tau > delta_t
  kFlagLongEvolution = 1u << 1,   // tau * omega_e >= 0.1
};

struct SchedulePoint {
  double delta_t = 0.0;
  double tau = 0.0;
  std::uint32_t flags = kFlagNone;
};

struct ScheduleRule {
  enum class Kind { ConstantContrast, OneOverF };
  Kind kind = Kind::ConstantContrast;
  // ConstantContrast: linear-term value. OneOverF: chi_- level, converted to
  // c_level from the PowerLawModel amplitude unless c_level is given.
  double target = 2.0;
  double c_level = 0.0;
  LambertVariant variant = LambertVariant::ShortEvolution;
};

struct Schedule {
  std::vector<SchedulePoint> points;
  ScheduleRule rule;
};

// Applies `rule` at every grid point. The constant-contrast rule needs an
// OverhauserModel, the 1/f rule a PowerLawModel (or an explicit c_level).
// Throws DomainError listing every delta_t where the rule has no solution.
Schedule build_schedule(const SpectrumModel& model, const std::vector<double>& delta_t_grid,
                        const ScheduleRule& rule);

std::string flags_to_string(std::uint32_t flags);

// CSV with header `delta_t_s,tau_s,flags`; flags are '|'-separated names.
void write_schedule_csv(std::ostream& out, const Schedule& schedule);

}  // namespace shotcorr
