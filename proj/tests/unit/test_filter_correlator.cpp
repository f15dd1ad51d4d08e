#include <catch_amalgamated.hpp>
#include <cmath>
#include <numbers>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "shotcorr/errors.hpp"
#include "shotcorr/filter_correlator.hpp"

using namespace shotcorr;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double kPi = std::numbers::pi;

// (16/pi) S sin^2(w tau/2) g(w dt / 2)^2 / w^2 by dense quadrature.
template <class G>
double chi_oracle(const SpectrumModel& s, double tau, double dt, G&& g, double hi) {
  auto f = [&](double w) {
    const double a = std::sin(0.5 * w * tau);
    const double b = g(0.5 * w * dt);
    return 16.0 / kPi * s(w) * a * a * b * b / (w * w);
  };
  const double period = 2.0 * kPi / std::max(tau, dt);
  return oracle::dense_from_zero(f, std::min(1e-3 / dt, 1e-6), hi, 1.0005, period / 8.0);
}

double sin_fn(double x) { return std::sin(x); }
double cos_fn(double x) { return std::cos(x); }

SpectrumModel reference() { return SpectrumModel(fixture::overhauser()); }

}  // namespace

TEST_CASE("filter_F: extremal values", "[filter]") {
  CHECK(filter_F(0.0, {1.0, 2.0}) == 0.0);
  CHECK_THAT(filter_F(kPi, {1.0, 2.0}), WithinAbs(4.0, 1e-14));
  CHECK_THAT(filter_F(kPi, {1.0, 1.0}), WithinAbs(-4.0, 1e-14));
  CHECK_THROWS_AS(filter_F(-1.0, {1.0, 1.0}), DomainError);
}

TEST_CASE("phase correlations: white noise closed forms", "[filter]") {
  const double s0 = 2e5, tau = 1e-6;
  const SpectrumModel white(WhiteModel{s0, 1e4 / tau});
  CHECK_THAT(phase_variance(white, tau), WithinRel(s0 * tau, 1e-2));
  CHECK_THAT(phase_cross_correlation(white, {tau, 0.0}), WithinRel(phase_variance(white, tau), 1e-10));
  for (double dt : {tau, 3.0 * tau, 1e3 * tau}) {
    CHECK(std::abs(phase_cross_correlation(white, {tau, dt})) < 1e-3 * s0 * tau);
    CHECK_THAT(chi_minus(white, {tau, dt}), WithinRel(2.0 * s0 * tau, 1e-2));
    CHECK_THAT(chi_plus(white, {tau, dt}), WithinRel(2.0 * s0 * tau, 1e-2));
    CHECK_THAT(autocorrelation_analytic(white, {tau, dt}).value, WithinRel(std::exp(-s0 * tau), 1e-2));
  }
}

TEST_CASE("phase_variance: small-tau limit", "[filter]") {
  const SpectrumModel s = reference();
  const double tau = 1e-3 / fixture::kOmegaE;
  const double ratio = phase_variance(s, tau) / (tau * tau * variance(s));
  CHECK(ratio <= 1.0);
  CHECK(ratio > 0.999);
}

TEST_CASE("phase_cross_correlation: Overhauser against dense oracle", "[filter]") {
  const SpectrumModel s = reference();
  const double tau = 50e-9, dt = 1e-3;
  auto f = [&](double w) {
    const double a = std::sin(0.5 * w * tau);
    return 4.0 / kPi * s(w) * a * a * std::cos(w * dt) / (w * w);
  };
  const double ref = oracle::dense_from_zero(f, 1e-4, s.support().upper, 1.0005, 2.0 * kPi / dt / 8.0);
  CHECK_THAT(phase_cross_correlation(s, {tau, dt}), WithinRel(ref, 1e-6));
}

TEST_CASE("chi: Overhauser against dense oracle", "[filter]") {
  const SpectrumModel s = reference();
  const double tau = 50e-9;
  const double hi = s.support().upper;
  for (double dt : {1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2}) {
    CAPTURE(dt);
    CHECK_THAT(chi_minus(s, {tau, dt}), WithinRel(chi_oracle(s, tau, dt, sin_fn, hi), 1e-4));
    CHECK_THAT(chi_plus(s, {tau, dt}), WithinRel(chi_oracle(s, tau, dt, cos_fn, hi), 1e-4));
  }
}

TEST_CASE("chi_minus: Lorentzian and pure 1/f closed forms", "[filter]") {
  const double c = 3e10, s0 = 1e-6, wl = 0.7;
  const SpectrumModel lor(OverhauserModel{s0, wl, kNoCutoff, 1.0, c});
  for (double tau : {1e-8, 1e-6}) {
    for (double dt : {1e-6, 1e-3, 1.0, 30.0}) {
      if (dt < tau) continue;
      CAPTURE(tau, dt);
      CHECK_THAT(chi_minus(lor, {tau, dt}), WithinRel(oracle::chi_minus_lorentzian(c, s0, wl, tau, dt), 1e-6));
    }
    CHECK_THAT(phase_variance(lor, tau), WithinRel(oracle::lorentzian_phase_variance(c, s0, wl, tau), 1e-6));
  }
  // 1/f with cutoffs far outside the probed band.
  const double tau = 1e-6;
  const SpectrumModel flicker(PowerLawModel{1e4, 1.0, 1e-4 / tau * 1e-5, 1e4 / tau});
  for (double dt : {1e-5, 1e-4, 1e-3}) {
    CAPTURE(dt);
    CHECK_THAT(chi_minus(flicker, {tau, dt}), WithinRel(oracle::chi_minus_one_over_f(1e4, tau, dt), 2e-3));
  }
}

TEST_CASE("chi: zero delay", "[filter]") {
  const SpectrumModel s = reference();
  CHECK(chi_minus(s, {1e-7, 0.0}) == 0.0);
  CHECK_THAT(chi_plus(s, {1e-7, 0.0}), WithinRel(4.0 * phase_variance(s, 1e-7), 1e-8));
  const CorrelatorValue v = autocorrelation_analytic(s, {1e-7, 0.0});
  CHECK_THAT(v.value, WithinRel(0.5 * (1.0 + std::exp(-2.0 * phase_variance(s, 1e-7))), 1e-8));
  CHECK_FALSE(v.physical);
  CHECK_THROWS_AS(chi_minus(s, {0.0, 1.0}), DomainError);
  CHECK_THROWS_AS(chi_minus(s, {1e-7, -1.0}), DomainError);
}

TEST_CASE("autocorrelation_analytic: Overhauser limits", "[filter]") {
  const SpectrumModel s = reference();
  // tau = 50 ns is several T2*, so the chi_+ term is gone and the correlator
  // saturates at 1/2 while the chi_- factor approaches 1.
  const CorrelatorValue short_delay = autocorrelation_analytic(s, {50e-9, 1e-6});
  CHECK_THAT(short_delay.value, WithinAbs(0.5, 1e-2));
  CHECK(std::exp(-0.5 * short_delay.chi_minus) > 0.99);
  CHECK(autocorrelation_analytic(s, {5e-6, 100.0}).value < 1e-6);
  QubitParams mismatched;
  mismatched.coupling_c = 2.0 * fixture::kCoupling;
  CHECK_THROWS_AS(autocorrelation_analytic(s, {1e-7, 1e-6}, mismatched), DomainError);
  QubitParams flipped;
  flipped.coupling_c = -fixture::kCoupling;
  CHECK_NOTHROW(autocorrelation_analytic(s, {1e-7, 1e-6}, flipped));
}

TEST_CASE("t2_star: closed forms and scaling", "[filter]") {
  const double s0 = 1e6;
  const SpectrumModel white(WhiteModel{s0, 1e10});
  CHECK_THAT(t2_star(white), WithinRel(1.0 / s0, 1e-2));
  CHECK_THAT(t2_star(white.scaled(4.0)), WithinRel(t2_star(white) / 4.0, 1e-3));

  const SpectrumModel s = reference();
  const double t2 = t2_star(s);
  CHECK_THAT(phase_variance(s, t2), WithinRel(1.0, 1e-9));
  // Quasistatic limit: <dPhi^2> = tau^2 c^2 <dBz^2> = 1.
  CHECK_THAT(t2, WithinRel(1.0 / (fixture::kCoupling * fixture::kRms), 1e-2));

  CHECK_THROWS_AS(t2_star(SpectrumModel(WhiteModel{0.0, 1.0})), DomainError);
}

TEST_CASE("chi_minus_approx: prefactors and branches", "[filter][approx]") {
  CHECK_THAT(chi_minus_approx(fixture::overhauser(1.0), {50e-9, 1e-6}).prefactor_a, WithinRel(1.0, 1e-12));
  CHECK_THAT(chi_minus_approx(fixture::overhauser(2.0), {50e-9, 1e-6}).prefactor_a,
             WithinRel(std::sqrt(kPi) / 2.0, 1e-12));

  const OverhauserModel m = fixture::overhauser();
  const double tau = 50e-9;
  const double d1 = 1e-3, d2 = 1e-2;
  const auto a1 = chi_minus_approx(m, {tau, d1});
  const auto a2 = chi_minus_approx(m, {tau, d2});
  REQUIRE(a1.regime == ChiRegime::Linear);
  REQUIRE(a2.regime == ChiRegime::Linear);
  CHECK_THAT(std::log(a2.value / a1.value) / std::log(d2 / d1), WithinAbs(1.0, 1e-12));
  CHECK_FALSE(a1.short_evolution_violated);
  CHECK(chi_minus_approx(m, {5e-6, 1e-3}).short_evolution_violated);
  CHECK(chi_minus_approx(m, {tau, 1.0 / m.omega_e}).crossover);
  CHECK_FALSE(chi_minus_approx(m, {tau, 1e-3}).crossover);
  CHECK(std::string(to_string(chi_minus_approx(m, {tau, 1e-8}).regime)) == "quadratic");
}

TEST_CASE("chi_minus_approx: each branch within 20% of quadrature", "[filter][approx]") {
  for (double gamma : {1.0, 2.0}) {
    const OverhauserModel m = fixture::overhauser(gamma);
    const SpectrumModel s(m);
    const double tau = 50e-9;
    const double mid = std::sqrt((10.0 / m.omega_e) * (0.1 / m.omega_l));
    for (double dt : {1e-2 / m.omega_e, mid, 1e2 / m.omega_l}) {
      CAPTURE(gamma, dt);
      const ChiApproximation a = chi_minus_approx(m, {tau, dt});
      CHECK_FALSE(a.crossover);
      CHECK_THAT(a.value, WithinRel(chi_minus(s, {tau, dt}), 0.2));
    }
    // The literal plateau reading is off by many orders of magnitude.
    const ChiApproximation plateau = chi_minus_approx(m, {tau, 1e2 / m.omega_l});
    CHECK(plateau.plateau_alternative < 1e-3 * chi_minus(s, {tau, 1e2 / m.omega_l}));
  }
}

TEST_CASE("autocorrelation_linearized: limits and agreement", "[filter][linear]") {
  const SpectrumModel s = reference();
  const double var = variance(s);
  const auto zero = autocorrelation_linearized(s, {1e-7, 0.0});
  CHECK(zero.value == 0.5);
  const auto far = autocorrelation_linearized(s, {1e-7, 1e4});
  CHECK_THAT(far.value, WithinRel(0.5 - 0.5 * 1e-14 * var, 1e-6));
  CHECK_FALSE(far.valid);

  for (double tau : {50e-9, 200e-9, 1e-6}) {
    for (double dt = tau; dt < 1.0; dt *= 3.0) {
      const auto lin = autocorrelation_linearized(s, {tau, dt});
      if (lin.precondition >= 1e-2) break;
      CAPTURE(tau, dt);
      CHECK_THAT(lin.value, WithinAbs(autocorrelation_analytic(s, {tau, dt}).value, 1e-3));
    }
  }
}

TEST_CASE("correct_fidelity: inverse attenuation", "[filter]") {
  CHECK(correct_fidelity(0.3, 0.0) == 0.3);
  CHECK_THAT(correct_fidelity(0.125, 0.25), WithinRel(0.5, 1e-15));
  CHECK_THROWS_AS(correct_fidelity(0.1, 0.5), DomainError);
  CHECK_THROWS_AS(correct_fidelity(0.1, -0.1), DomainError);
}

TEST_CASE("echo equivalence at delta_t = tau", "[filter][property]") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    const double rms = 1e-3 * (1.0 + 4.0 * u(rng));
    const double we = fixture::kOmegaE * std::pow(10.0, 2.0 * u(rng) - 1.0);
    const double gamma = u(rng) < 0.5 ? 1.0 : 2.0;
    const SpectrumModel s(fixture::overhauser(gamma, rms, we));
    const double tau = std::pow(10.0, -8.0 + 3.0 * u(rng));
    auto echo = [&](double w) {
      const double a = std::sin(0.5 * w * tau);
      return 16.0 / kPi * s(w) * a * a * a * a / (w * w);
    };
    const double ref = oracle::dense_from_zero(echo, 1e-6, s.support().upper, 1.0005, 2.0 * kPi / tau / 8.0);
    CAPTURE(i, tau, we, gamma);
    CHECK_THAT(chi_minus(s, {tau, tau}), WithinRel(ref, 1e-6));
  }
}

TEST_CASE("trig closure, bounds and omega isolation", "[filter][property]") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::vector<SpectrumModel> models{reference(), SpectrumModel(fixture::overhauser(2.0)),
                                          SpectrumModel(PowerLawModel{1e6, 1.0, 1e-2, 1e9}),
                                          SpectrumModel(WhiteModel{1e6, 1e10})};
  for (const SpectrumModel& s : models) {
    for (int i = 0; i < 15; ++i) {
      const double tau = std::pow(10.0, -8.0 + 2.0 * u(rng));
      const double dt = tau * std::pow(10.0, 5.0 * u(rng));
      const EvolutionPair p{tau, dt};
      CAPTURE(s.family(), tau, dt);
      const double cm = chi_minus(s, p), cp = chi_plus(s, p);
      CHECK(cm >= 0.0);
      CHECK(cp >= 0.0);
      CHECK_THAT(cm + cp, WithinRel(4.0 * phase_variance(s, tau), 1e-6));
      const double c0 = autocorrelation_analytic(s, p).value;
      CHECK(c0 >= 0.0);
      CHECK(c0 <= 1.0);
      QubitParams q;
      q.omega_q = 1e7 * u(rng);
      const CorrelatorValue v = autocorrelation_analytic(s, p, q);
      const double rest = v.value - 0.5 * std::cos(2.0 * q.omega_q * tau) * std::exp(-0.5 * v.chi_plus);
      CHECK_THAT(rest, WithinAbs(0.5 * std::exp(-0.5 * cm), 1e-15));
    }
  }
}

TEST_CASE("low-frequency insensitivity of chi_minus", "[filter][property]") {
  const double tau = 1e-6, dt = 1e-4;
  const double w0 = 1e-3 / dt, width = 1e-3 * w0, height = 1e9, floor = 1e4;
  const double lo = 1e-6, hi = 1e9;
  const SpectrumModel spike(TabulatedModel{{w0, w0 + width}, {height, height}});
  // White floor plus the spike, as one table with near-vertical edges.
  const double eps = 1.0 + 1e-12;
  TabulatedModel sum{{lo, w0, w0 * eps, w0 + width, (w0 + width) * eps, hi},
                     {floor, floor, floor + height, floor + height, floor, floor}};
  const SpectrumModel flat(TabulatedModel{{lo, hi}, {floor, floor}});
  const double delta = chi_minus(SpectrumModel(sum), {tau, dt}) - chi_minus(flat, {tau, dt});
  CHECK(std::abs(delta) < 1e-4 * 4.0 * phase_variance(spike, tau));
}

TEST_CASE("large-delay factorization", "[filter][property]") {
  const SpectrumModel s = reference();
  for (double tau : {20e-9, 50e-9}) {
    const double pv = phase_variance(s, tau);
    const double v = autocorrelation_analytic(s, {tau, 1e3 / fixture::kOmegaL}).value;
    CHECK_THAT(v, WithinRel(std::exp(-pv), 1e-5));
  }
}
