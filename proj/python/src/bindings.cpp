#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "shotcorr/errors.hpp"
#include "shotcorr/filter_correlator.hpp"
#include "shotcorr/fitting.hpp"
#include "shotcorr/montecarlo.hpp"
#include "shotcorr/schedules.hpp"
#include "shotcorr/spectra.hpp"

namespace py = pybind11;
using namespace shotcorr;

namespace {

QuadratureSpec tolerance(double rel_tol) {
  QuadratureSpec spec;
  spec.rel_tol = rel_tol;
  return spec;
}

void bind_spectra(py::module_& m) {
  py::class_<OverhauserModel>(m, "OverhauserModel")
      .def(py::init([](double s0, double omega_l, double omega_e, double gamma, double coupling_c) {
             return OverhauserModel{s0, omega_l, omega_e, gamma, coupling_c};
           }),
           py::arg("s0"), py::arg("omega_l"), py::arg("omega_e") = kNoCutoff, py::arg("gamma") = 1.0,
           py::arg("coupling_c"))
      .def_readwrite("s0", &OverhauserModel::s0)
      .def_readwrite("omega_l", &OverhauserModel::omega_l)
      .def_readwrite("omega_e", &OverhauserModel::omega_e)
      .def_readwrite("gamma", &OverhauserModel::gamma)
      .def_readwrite("coupling_c", &OverhauserModel::coupling_c);

  py::class_<PowerLawModel>(m, "PowerLawModel")
      .def(py::init([](double amplitude, double alpha, double omega_low, double omega_high) {
             return PowerLawModel{amplitude, alpha, omega_low, omega_high};
           }),
           py::arg("amplitude"), py::arg("alpha"), py::arg("omega_low"), py::arg("omega_high"))
      .def_readwrite("amplitude", &PowerLawModel::amplitude)
      .def_readwrite("alpha", &PowerLawModel::alpha)
      .def_readwrite("omega_low", &PowerLawModel::omega_low)
      .def_readwrite("omega_high", &PowerLawModel::omega_high);

  py::class_<WhiteModel>(m, "WhiteModel")
      .def(py::init([](double level, double omega_high) { return WhiteModel{level, omega_high}; }), py::arg("level"),
           py::arg("omega_high"))
      .def_readwrite("level", &WhiteModel::level)
      .def_readwrite("omega_high", &WhiteModel::omega_high);

  py::class_<TabulatedModel>(m, "TabulatedModel")
      .def(py::init([](std::vector<double> omega, std::vector<double> value) {
             return TabulatedModel{std::move(omega), std::move(value)};
           }),
           py::arg("omega"), py::arg("value"))
      .def_readonly("omega", &TabulatedModel::omega)
      .def_readonly("value", &TabulatedModel::value);

  py::class_<SpectrumModel>(m, "Spectrum")
      .def(py::init<OverhauserModel>())
      .def(py::init<PowerLawModel>())
      .def(py::init<WhiteModel>())
      .def(py::init<TabulatedModel>())
      .def_property_readonly("family", &SpectrumModel::family)
      .def("__call__", [](const SpectrumModel& s, double omega) { return evaluate(s, omega); }, py::arg("omega"))
      .def("scaled", &SpectrumModel::scaled, py::arg("factor"));

  py::implicitly_convertible<OverhauserModel, SpectrumModel>();
  py::implicitly_convertible<PowerLawModel, SpectrumModel>();
  py::implicitly_convertible<WhiteModel, SpectrumModel>();
  py::implicitly_convertible<TabulatedModel, SpectrumModel>();

  m.attr("BOHR_MAGNETON_OVER_HBAR") = kBohrMagnetonOverHbar;
  m.def("variance", [](const SpectrumModel& s, double rel_tol) { return variance(s, tolerance(rel_tol)); },
        py::arg("spectrum"), py::arg("rel_tol") = 1e-8);
  m.def("beta_autocorrelation",
        [](const SpectrumModel& s, double dt, double rel_tol) { return beta_autocorrelation(s, dt, tolerance(rel_tol)); },
        py::arg("spectrum"), py::arg("delta_t"), py::arg("rel_tol") = 1e-8);
  m.def("overhauser_s0_for_rms", &overhauser_s0_for_rms, py::arg("rms_field"), py::arg("omega_l"));
  m.def("load_tabulated_csv", &load_tabulated_csv, py::arg("path"));
}

void bind_correlator(py::module_& m) {
  py::class_<QubitParams>(m, "QubitParams")
      .def(py::init([](double omega_q, double coupling_c, double readout_flip_prob, double dead_time) {
             QubitParams q{omega_q, coupling_c, readout_flip_prob, dead_time};
             q.validate();
             return q;
           }),
           py::arg("omega_q") = 0.0, py::arg("coupling_c") = 0.0, py::arg("readout_flip_prob") = 0.0,
           py::arg("dead_time") = 0.0)
      .def_readwrite("omega_q", &QubitParams::omega_q)
      .def_readwrite("coupling_c", &QubitParams::coupling_c)
      .def_readwrite("readout_flip_prob", &QubitParams::readout_flip_prob)
      .def_readwrite("dead_time", &QubitParams::dead_time);

  py::class_<CorrelatorValue>(m, "CorrelatorValue")
      .def_readonly("value", &CorrelatorValue::value)
      .def_readonly("chi_minus", &CorrelatorValue::chi_minus)
      .def_readonly("chi_plus", &CorrelatorValue::chi_plus)
      .def_readonly("physical", &CorrelatorValue::physical);

  auto pair_fn = [](auto f) {
    return [f](const SpectrumModel& s, double tau, double dt, double rel_tol) {
      return f(s, EvolutionPair{tau, dt}, tolerance(rel_tol));
    };
  };
  m.def("chi_minus", pair_fn([](const SpectrumModel& s, const EvolutionPair& p, const QuadratureSpec& q) {
          return chi_minus(s, p, q);
        }),
        py::arg("spectrum"), py::arg("tau"), py::arg("delta_t"), py::arg("rel_tol") = 1e-8);
  m.def("chi_plus", pair_fn([](const SpectrumModel& s, const EvolutionPair& p, const QuadratureSpec& q) {
          return chi_plus(s, p, q);
        }),
        py::arg("spectrum"), py::arg("tau"), py::arg("delta_t"), py::arg("rel_tol") = 1e-8);
  m.def("phase_variance",
        [](const SpectrumModel& s, double tau, double rel_tol) { return phase_variance(s, tau, tolerance(rel_tol)); },
        py::arg("spectrum"), py::arg("tau"), py::arg("rel_tol") = 1e-8);
  m.def(
      "autocorrelation",
      [](const SpectrumModel& s, double tau, double dt, const QubitParams& q, double rel_tol) {
        return autocorrelation_analytic(s, {tau, dt}, q, tolerance(rel_tol));
      },
      py::arg("spectrum"), py::arg("tau"), py::arg("delta_t"), py::arg("qubit") = QubitParams{},
      py::arg("rel_tol") = 1e-8);
  m.def(
      "autocorrelation_linearized",
      [](const SpectrumModel& s, double tau, double dt) {
        const LinearizedCorrelator r = autocorrelation_linearized(s, {tau, dt});
        return py::make_tuple(r.value, r.precondition, r.valid);
      },
      py::arg("spectrum"), py::arg("tau"), py::arg("delta_t"));
  m.def(
      "chi_minus_approx",
      [](const OverhauserModel& model, double tau, double dt) {
        const ChiApproximation a = chi_minus_approx(model, {tau, dt});
        return py::make_tuple(a.value, to_string(a.regime));
      },
      py::arg("model"), py::arg("tau"), py::arg("delta_t"));
  m.def("t2_star", [](const SpectrumModel& s) { return t2_star(s); }, py::arg("spectrum"));
  m.def("correct_fidelity", &correct_fidelity, py::arg("raw_correlation"), py::arg("epsilon"));
}

void bind_schedules(py::module_& m) {
  m.def("tau_constant_contrast", &tau_constant_contrast, py::arg("model"), py::arg("delta_t"),
        py::arg("target") = 2.0);
  m.def(
      "tau_oneoverf",
      [](double c_level, double dt, const std::string& variant) {
        return tau_oneoverf(c_level, dt, lambert_variant_from_string(variant));
      },
      py::arg("c_level"), py::arg("delta_t"), py::arg("variant") = "short_evolution");
  m.def("oneoverf_c_level", &oneoverf_c_level, py::arg("amplitude"), py::arg("chi_target"));
}

void bind_montecarlo(py::module_& m) {
  py::class_<CorrelationPoint>(m, "CorrelationPoint")
      .def(py::init([](double dt, double tau, double value, double std_error) {
             return CorrelationPoint{dt, tau, value, std_error, 0};
           }),
           py::arg("delta_t"), py::arg("tau"), py::arg("value"), py::arg("stderr"))
      .def_readonly("delta_t", &CorrelationPoint::delta_t)
      .def_readonly("tau", &CorrelationPoint::tau)
      .def_readonly("value", &CorrelationPoint::value)
      .def_readonly("stderr", &CorrelationPoint::std_error)
      .def_readonly("n_pairs", &CorrelationPoint::n_pairs);

  m.def(
      "simulate",
      [](const SpectrumModel& s, double tau, double dt, std::size_t n_cycles, std::size_t n_records,
         std::size_t max_lag, std::uint64_t seed, const QubitParams& q, std::size_t n_modes, unsigned threads) {
        Protocol p{tau, dt, n_cycles, q, seed};
        p.validate();
        MonteCarloOptions o;
        o.grid.n_modes = n_modes;
        o.n_records = n_records;
        o.threads = threads;
        std::vector<ShotRecord> records;
        {
          py::gil_scoped_release release;
          records = run_records(s, p, o);
        }
        return estimate_curve(records, max_lag).points;
      },
      py::arg("spectrum"), py::arg("tau"), py::arg("delta_t"), py::arg("n_cycles"), py::arg("n_records") = 1,
      py::arg("max_lag") = 1, py::arg("seed") = 0, py::arg("qubit") = QubitParams{},
      py::arg("n_modes") = kDefaultModes, py::arg("threads") = 1);
}

void bind_fitting(py::module_& m) {
  m.def(
      "discriminate_gamma",
      [](const std::vector<CorrelationPoint>& points, const OverhauserModel& reference, bool check_span) {
        GammaDiscrimination g;
        {
          py::gil_scoped_release release;
          g = discriminate_gamma(CorrelationCurve{points}, reference, {}, 30.0, check_span);
        }
        py::dict d;
        d["gamma_hat"] = g.gamma_hat;
        d["delta_chi_squared"] = g.delta_chi_squared;
        d["indeterminate"] = g.indeterminate;
        return d;
      },
      py::arg("data"), py::arg("reference"), py::arg("check_span") = true);
  m.def(
      "estimate_alpha_slope",
      [](const std::vector<CorrelationPoint>& points) {
        const AlphaEstimate a = estimate_alpha_slope(CorrelationCurve{points});
        py::dict d;
        d["alpha"] = a.alpha;
        d["slope"] = a.slope;
        d["slope_stderr"] = a.slope_stderr;
        d["logarithmic"] = a.logarithmic;
        return d;
      },
      py::arg("data"));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Shot-to-shot correlations of qubit measurements under Gaussian dephasing noise.";

  static py::exception<DomainError> domain_error(m, "DomainError", PyExc_ValueError);
  static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  static py::exception<NumericalError> numerical_error(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const DomainError& e) {
      domain_error(e.what());
    } catch (const ConfigError& e) {
      config_error(e.what());
    } catch (const NumericalError& e) {
      numerical_error(e.what());
    }
  });

  bind_spectra(m);
  bind_correlator(m);
  bind_schedules(m);
  bind_montecarlo(m);
  bind_fitting(m);
}
