#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include "cli.hpp"
#include "config.hpp"
#include "shotcorr/csv.hpp"
#include "shotcorr/errors.hpp"
#include "shotcorr/filter_correlator.hpp"

#ifndef SHOTCORR_VERSION
#define SHOTCORR_VERSION "unknown"
#endif

namespace shotcorr::cli {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr double kRefOmegaL = 2.0 * std::numbers::pi * 0.1;
constexpr double kRefOmegaE = 2.0 * std::numbers::pi * 1.0e4;
constexpr double kRefG = -0.44;
constexpr double kAssumedRms = 2.0e-3;

unsigned worker_count(unsigned threads) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  return threads;
}

ordered_json base_sidecar(const std::string& command, const json& config, const RunOptions& o) {
  ordered_json j;
  j["command"] = command;
  j["version"] = SHOTCORR_VERSION;
  j["freq_units"] = o.freq_units == FreqUnits::Hz ? "hz" : "rad";
  j["config"] = config;
  j["notes"] = ordered_json::array();
  return j;
}

std::uint64_t run_seed(const Section& top) {
  const RunOptions& o = top.options();
  if (o.seed_given) return o.seed;
  if (!top.has("seed")) return 0;
  const json& v = top.raw("seed");
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    top.fail("seed", "expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

OverhauserModel require_overhauser(const SpectrumModel& s, const Section& top) {
  const auto* m = std::get_if<OverhauserModel>(&s.params());
  if (!m) top.fail("spectrum.family", "this command needs an overhauser spectrum");
  return *m;
}

std::string point_flags(double tau, double delta_t, double omega_e) {
  std::uint32_t f = kFlagNone;
  if (tau > delta_t) f |= kFlagUnphysical;
  if (std::isfinite(omega_e) && tau * omega_e >= 0.1) f |= kFlagLongEvolution;
  return flags_to_string(f);
}

// chi
CommandOutput cmd_chi(const Section& top, const json& config) {
  top.allow({"spectrum", "qubit", "grid", "quadrature", "seed"});
  const SpectrumModel spectrum = parse_spectrum(top.sub("spectrum"));
  const QubitParams qubit = parse_qubit(top.optional_sub("qubit"), &spectrum);
  const QuadratureSpec tol = parse_quadrature(top.optional_sub("quadrature"));
  const Section grid = top.sub("grid");
  grid.allow({"tau", "delta_t"});
  const std::vector<double> taus = grid.time_grid("tau");
  const std::vector<double> dts = grid.time_grid("delta_t");
  for (double t : taus) {
    if (!(t > 0.0)) grid.fail("tau", "evolution times must be > 0");
  }

  const auto* overhauser = std::get_if<OverhauserModel>(&spectrum.params());
  const std::size_t n = taus.size() * dts.size();
  std::vector<CorrelatorValue> values(n);
  parallel_for(n, top.options().threads, [&](std::size_t i) {
    values[i] = autocorrelation_analytic(spectrum, {taus[i / dts.size()], dts[i % dts.size()]}, qubit, tol);
  });

  std::ostringstream csv;
  csv << "delta_t_s,tau_s,chi_minus,chi_plus,correlation" << (overhauser ? ",regime" : "") << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    const EvolutionPair pair{taus[i / dts.size()], dts[i % dts.size()]};
    const CorrelatorValue& v = values[i];
    csv << csv_number(pair.delta_t) << ',' << csv_number(pair.tau) << ',' << csv_number(v.chi_minus) << ','
        << csv_number(v.chi_plus) << ',' << csv_number(v.value);
    if (overhauser) csv << ',' << to_string(chi_minus_approx(*overhauser, pair).regime);
    csv << '\n';
  }
  CommandOutput out;
  out.files.push_back({"", csv.str()});
  out.sidecar = base_sidecar("chi", config, top.options());
  if (overhauser) out.sidecar["notes"].push_back("regime: short-evolution regime of the chi_- approximation");
  return out;
}

// Curve CSV with corrected and raw columns.
std::string curve_csv(const CorrelationCurve& raw, double epsilon) {
  const double gain = (1.0 - 2.0 * epsilon) * (1.0 - 2.0 * epsilon);
  std::ostringstream csv;
  csv << "delta_t_s,tau_s,correlation,stderr,n_pairs,correlation_raw,stderr_raw\n";
  for (const CorrelationPoint& p : raw.points) {
    csv << csv_number(p.delta_t) << ',' << csv_number(p.tau) << ',' << csv_number(correct_fidelity(p.value, epsilon))
        << ',' << csv_number(p.std_error / gain) << ',' << p.n_pairs << ',' << csv_number(p.value) << ','
        << csv_number(p.std_error) << '\n';
  }
  return csv.str();
}

// simulate
CommandOutput cmd_simulate(const Section& top, const json& config) {
  top.allow({"spectrum", "qubit", "protocol", "seed"});
  const SpectrumModel spectrum = parse_spectrum(top.sub("spectrum"));
  const QubitParams qubit = parse_qubit(top.optional_sub("qubit"), &spectrum);
  const Section p = top.sub("protocol");
  p.allow({"tau", "delta_t", "n_cycles", "n_records", "max_lag", "n_modes", "omega_min", "omega_max",
           "independent_cycles", "write_shots"});

  // delta_t is one delay (lags 1..max_lag of one record set) or a grid of
  // delays, each simulated as an independent protocol with its own seed.
  const json& dt_node = p.raw("delta_t");
  const bool grid_mode = dt_node.is_array() || (dt_node.is_object() && !dt_node.contains("value"));
  const std::vector<double> delays = grid_mode ? p.time_grid("delta_t") : std::vector<double>{p.time("delta_t")};
  const std::uint64_t master = run_seed(top);

  // tau is shared, or with a delta_t grid a list paired with it point by point.
  std::vector<double> taus;
  if (p.raw("tau").is_array()) {
    if (!grid_mode) p.fail("tau", "a list of evolution times needs a delta_t grid");
    taus = p.time_grid("tau");
    if (taus.size() != delays.size()) p.fail("tau", "needs one entry per delta_t");
  } else {
    taus.assign(delays.size(), p.time("tau"));
  }
  for (double t : taus) {
    if (!(t > 0.0)) p.fail("tau", "must be > 0");
  }

  Protocol protocol;
  protocol.n_cycles = p.count("n_cycles", 0);
  protocol.qubit = qubit;

  MonteCarloOptions mc;
  mc.grid.n_modes = p.count("n_modes", kDefaultModes);
  mc.grid.omega_min = p.frequency("omega_min", 0.0);
  mc.grid.omega_max = p.frequency("omega_max", 0.0);
  mc.n_records = p.count("n_records", 1);
  mc.independent_cycles = p.boolean("independent_cycles", false);
  mc.threads = top.options().threads;
  if (mc.n_records < 1) p.fail("n_records", "must be >= 1");
  const std::size_t max_lag = p.count("max_lag", grid_mode ? 1 : 10);
  if (max_lag < 1 || max_lag >= protocol.n_cycles) p.fail("max_lag", "must lie in [1, n_cycles - 1]");
  const bool write_shots = p.boolean("write_shots", !grid_mode);
  if (write_shots && grid_mode) p.fail("write_shots", "shots are only written for a single delta_t");

  CorrelationCurve curve;
  std::vector<ShotRecord> records;
  for (std::size_t j = 0; j < delays.size(); ++j) {
    protocol.delta_t = delays[j];
    protocol.tau = taus[j];
    protocol.seed = grid_mode ? stream_seed(master, j, 3) : master;
    try {
      protocol.validate();
      records = run_records(spectrum, protocol, mc);
    } catch (const ConfigError& e) {
      throw ConfigError("config: protocol (delta_t = " + csv_number(delays[j]) + "): " + e.what());
    }
    const CorrelationCurve part = estimate_curve(records, max_lag);
    curve.points.insert(curve.points.end(), part.points.begin(), part.points.end());
  }

  CommandOutput out;
  out.files.push_back({"", curve_csv(curve, qubit.readout_flip_prob)});
  if (write_shots) {
    std::ostringstream shots;
    write_shot_csv(shots, records);
    out.files.push_back({".shots.csv", shots.str()});
  }
  out.sidecar = base_sidecar("simulate", config, top.options());
  out.sidecar["seed"] = master;
  if (grid_mode) out.sidecar["notes"].push_back("each delta_t is an independent run seeded from (seed, point index)");
  out.sidecar["n_records"] = mc.n_records;
  out.sidecar["n_cycles_per_record"] = protocol.n_cycles;
  out.sidecar["notes"].push_back("correlation and stderr are corrected for readout flips; *_raw columns are not");
  if (mc.independent_cycles) out.sidecar["notes"].push_back("independent_cycles: diagnostic mode, fresh noise per cycle");
  return out;
}

// correlate
CommandOutput cmd_correlate(const Section& top, const json& config) {
  top.allow({"spectrum", "qubit", "correlate", "seed"});
  const QubitParams qubit = parse_qubit(top.optional_sub("qubit"), nullptr);
  const Section c = top.sub("correlate");
  c.allow({"shots", "max_lag", "tau", "delta_t"});
  const std::string path = c.path("shots");
  std::ifstream in(path);
  if (!in) c.fail("shots", "cannot open '" + path + "'");
  const CsvTable table = read_csv(in);
  const std::size_t c_t = table.column("t_center_s"), c_o = table.column("outcome");
  if (c_t == std::string::npos || c_o == std::string::npos || table.column("cycle_index") == std::string::npos) {
    throw ConfigError("shot CSV: header must be cycle_index,t_center_s,outcome");
  }

  // A new record starts wherever the window centre does not advance.
  std::vector<ShotRecord> records;
  double last_t = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const double t = csv_field_double(table, r, c_t);
    const double o = csv_field_double(table, r, c_o);
    if (o != 1.0 && o != -1.0) {
      throw ConfigError("shot CSV line " + std::to_string(table.line_numbers[r]) + ": outcome must be +1 or -1");
    }
    if (records.empty() || !(t > last_t)) {
      records.emplace_back();
      records.back().record_index = records.size() - 1;
    }
    records.back().outcomes.push_back(static_cast<std::int8_t>(o));
    records.back().window_centers.push_back(t);
    last_t = t;
  }
  if (records.empty()) throw ConfigError("shot CSV: no rows");

  // Cycle spacing and evolution time: from the config, else from the first
  // record (cycle k is centred at tau/2 + k delta_t).
  const ShotRecord& first = records.front();
  if (!c.has("delta_t") && first.window_centers.size() < 2) {
    throw ConfigError("shot CSV: cannot infer delta_t from a one-cycle record; set correlate.delta_t");
  }
  const double delta_t = c.time("delta_t", first.window_centers.size() > 1
                                               ? first.window_centers[1] - first.window_centers[0]
                                               : 0.0);
  const double tau = c.time("tau", 2.0 * first.window_centers[0]);
  for (ShotRecord& rec : records) {
    for (std::size_t k = 1; k < rec.window_centers.size(); ++k) {
      const double step = rec.window_centers[k] - rec.window_centers[k - 1];
      if (std::abs(step - delta_t) > 1e-6 * delta_t) {
        throw ConfigError("shot CSV: record " + std::to_string(rec.record_index) +
                          " is not uniformly spaced by delta_t = " + csv_number(delta_t));
      }
    }
    rec.protocol.tau = tau;
    rec.protocol.delta_t = delta_t;
    rec.protocol.n_cycles = rec.outcomes.size();
    rec.protocol.qubit = qubit;
  }
  const std::size_t max_lag = c.count("max_lag", 10);
  if (max_lag < 1) c.fail("max_lag", "must be >= 1");
  const CorrelationCurve curve = estimate_curve(records, max_lag);

  CommandOutput out;
  out.files.push_back({"", curve_csv(curve, qubit.readout_flip_prob)});
  out.sidecar = base_sidecar("correlate", config, top.options());
  out.sidecar["n_records"] = records.size();
  out.sidecar["tau_s"] = tau;
  out.sidecar["delta_t_s"] = delta_t;
  if (!c.has("tau")) out.sidecar["notes"].push_back("tau inferred as twice the first window centre");
  return out;
}

// schedule
CommandOutput cmd_schedule(const Section& top, const json& config) {
  top.allow({"spectrum", "schedule", "grid", "seed"});
  const SpectrumModel spectrum = parse_spectrum(top.sub("spectrum"));
  const Section s = top.sub("schedule");
  s.allow({"rule", "target", "c_level", "variant"});
  ScheduleRule rule;
  const std::string kind = s.text("rule");
  if (kind == "constant_contrast") rule.kind = ScheduleRule::Kind::ConstantContrast;
  else if (kind == "one_over_f") rule.kind = ScheduleRule::Kind::OneOverF;
  else s.fail("rule", "expected constant_contrast or one_over_f");
  rule.target = s.number("target", 2.0);
  rule.c_level = s.number("c_level", 0.0);
  try {
    rule.variant = lambert_variant_from_string(s.text("variant", to_string(LambertVariant::ShortEvolution)));
  } catch (const std::exception& e) {
    s.fail("variant", e.what());
  }
  const Section grid = top.sub("grid");
  grid.allow({"delta_t"});
  const Schedule schedule = build_schedule(spectrum, grid.time_grid("delta_t"), rule);

  std::ostringstream csv;
  write_schedule_csv(csv, schedule);
  CommandOutput out;
  out.files.push_back({"", csv.str()});
  out.sidecar = base_sidecar("schedule", config, top.options());
  out.sidecar["rule"] = kind;
  if (rule.kind == ScheduleRule::Kind::OneOverF) {
    out.sidecar["lambert_variant"] = to_string(schedule.rule.variant);
    out.sidecar["c_level_s2"] = schedule.rule.c_level;
  }
  return out;
}

// fit
ParamMap spectrum_params(const SpectrumModel& s) {
  if (const auto* m = std::get_if<OverhauserModel>(&s.params())) {
    return {{"s0", m->s0}, {"omega_l", m->omega_l}, {"omega_e", m->omega_e}, {"gamma", m->gamma},
            {"coupling_c", m->coupling_c}};
  }
  if (const auto* m = std::get_if<PowerLawModel>(&s.params())) {
    return {{"amplitude", m->amplitude}, {"alpha", m->alpha}, {"omega_low", m->omega_low},
            {"omega_high", m->omega_high}};
  }
  return {};
}

double param_value(const Section& s, const std::string& name, const json& v, const std::string& where) {
  const json holder{{"v", v}};
  const Section wrapper(holder, where.substr(0, where.rfind('.')), s.options());
  if (name.rfind("omega_", 0) == 0) {
    try {
      return wrapper.frequency("v");
    } catch (const ConfigError&) {
      throw ConfigError("config: " + where + ": expected a frequency");
    }
  }
  if (!v.is_number()) throw ConfigError("config: " + where + ": expected a number");
  return v.get<double>();
}

CommandOutput cmd_fit(const Section& top, const json& config) {
  top.allow({"spectrum", "qubit", "fit", "quadrature", "seed"});
  std::optional<SpectrumModel> spectrum;
  if (top.has("spectrum")) spectrum = parse_spectrum(top.sub("spectrum"));
  const QubitParams qubit = parse_qubit(top.optional_sub("qubit"), spectrum ? &*spectrum : nullptr);
  const Section f = top.sub("fit");
  f.allow({"data", "family", "init", "bounds", "fixed", "n_starts", "max_evaluations", "value_column",
           "stderr_column", "discriminate_gamma", "range", "check_span"});

  const std::string data_path = f.path("data");
  std::ifstream in(data_path);
  if (!in) f.fail("data", "cannot open '" + data_path + "'");
  const CorrelationCurve data =
      read_curve_csv(in, f.text("value_column", "correlation"), f.text("stderr_column", "stderr"));

  FitOptions options;
  options.n_starts = static_cast<int>(f.count("n_starts", 8));
  options.max_evaluations = static_cast<int>(f.count("max_evaluations", 10000));
  options.threads = top.options().threads;

  CommandOutput out;
  out.sidecar = base_sidecar("fit", config, top.options());

  if (f.boolean("discriminate_gamma", false)) {
    if (!spectrum) top.fail("spectrum", "discriminate_gamma needs the reference overhauser spectrum");
    const OverhauserModel ref = require_overhauser(*spectrum, top);
    const GammaDiscrimination g =
        discriminate_gamma(data, ref, options, f.number("range", 30.0), f.boolean("check_span", true));
    ordered_json doc;
    doc["gamma_hat"] = g.gamma_hat;
    doc["delta_chi_squared"] = g.delta_chi_squared;
    doc["threshold"] = kGammaDiscriminationThreshold;
    doc["indeterminate"] = g.indeterminate;
    doc["fit_gamma1"] = ordered_json::parse(fit_result_json(g.fit_gamma1, ModelFamily::Overhauser));
    doc["fit_gamma2"] = ordered_json::parse(fit_result_json(g.fit_gamma2, ModelFamily::Overhauser));
    out.files.push_back({"", doc.dump(2) + "\n"});
    return out;
  }

  FitProblem problem;
  problem.data = data;
  problem.qubit = qubit;
  problem.tolerances = parse_quadrature(top.optional_sub("quadrature"));
  try {
    problem.family = model_family_from_string(
        f.text("family", spectrum ? std::string(spectrum->family()) : std::string("overhauser")));
  } catch (const std::exception& e) {
    f.fail("family", e.what());
  }

  const Section bounds = f.sub("bounds");
  for (auto it = bounds.node().begin(); it != bounds.node().end(); ++it) {
    const std::string where = bounds.field(it.key());
    if (!it.value().is_array() || it.value().size() != 2) throw ConfigError("config: " + where + ": expected [lo, hi]");
    problem.bounds[it.key()] = {param_value(f, it.key(), it.value()[0], where + "[0]"),
                                param_value(f, it.key(), it.value()[1], where + "[1]")};
  }
  if (spectrum && spectrum->family() == std::string(to_string(problem.family))) {
    for (const auto& [k, v] : spectrum_params(*spectrum)) {
      if (!problem.bounds.count(k)) problem.fixed[k] = v;
    }
  }
  if (auto fixed = f.optional_sub("fixed")) {
    for (auto it = fixed->node().begin(); it != fixed->node().end(); ++it) {
      problem.fixed[it.key()] = param_value(f, it.key(), it.value(), fixed->field(it.key()));
    }
  }
  ParamMap init;
  if (auto section = f.optional_sub("init")) {
    for (auto it = section->node().begin(); it != section->node().end(); ++it) {
      if (!problem.bounds.count(it.key())) section->fail(it.key(), "init given for a parameter without bounds");
      init[it.key()] = param_value(f, it.key(), it.value(), section->field(it.key()));
    }
  }
  for (const auto& [k, b] : problem.bounds) {
    if (!init.count(k)) init[k] = b.first > 0.0 ? std::sqrt(b.first * b.second) : 0.5 * (b.first + b.second);
  }
  problem.validate();

  const FitResult r = fit(problem, init, options);
  out.files.push_back({"", fit_result_json(r, problem.family)});
  out.sidecar["converged"] = r.converged;
  return out;
}

// Reference Overhauser parameters with optional overrides.
OverhauserModel figure_model(const Section& fig, double gamma, double omega_e) {
  const double omega_l = fig.frequency("omega_l", kRefOmegaL);
  const double rms = fig.number("rms_field_T", kAssumedRms);
  return {overhauser_s0_for_rms(rms, omega_l), omega_l, omega_e, gamma,
          std::abs(fig.number("g_factor", kRefG)) * kBohrMagnetonOverHbar};
}

void add_reference_notes(ordered_json& sidecar, const Section& fig) {
  sidecar["notes"].push_back("omega_l / 2 pi = 0.1 Hz, omega_e / 2 pi = 10 kHz, g = -0.44 unless overridden");
  if (!fig.has("rms_field_T")) {
    sidecar["notes"].push_back("rms field 2 mT is an assumed default; set figure.rms_field_T");
  }
}

std::string figure_rows(const std::vector<FigurePoint>& points, const char* first_column) {
  std::ostringstream csv;
  csv << first_column << ",delta_t_s,tau_s,correlation,chi_minus,chi_plus,exp_minus_half_chi_minus,flags\n";
  for (const FigurePoint& p : points) {
    csv << p.curve << ',' << csv_number(p.delta_t) << ',' << csv_number(p.tau) << ',' << csv_number(p.correlation)
        << ',' << csv_number(p.chi_minus) << ',' << csv_number(p.chi_plus) << ','
        << csv_number(std::exp(-0.5 * p.chi_minus)) << ',' << flags_to_string(p.flags) << '\n';
  }
  return csv.str();
}

CommandOutput cmd_figure2(const Section& top, const json& config) {
  top.allow({"figure", "seed"});
  const json empty = json::object();
  const Section fig = top.has("figure") ? top.sub("figure") : Section(empty, "figure", top.options());
  fig.allow({"rms_field_T", "omega_l", "omega_e", "gamma", "g_factor", "tau", "delta_t"});
  const OverhauserModel model = figure_model(fig, fig.number("gamma", 1.0), fig.frequency("omega_e", kRefOmegaE));
  const SpectrumModel spectrum(model);
  const std::vector<double> taus = fig.time_grid("tau", log_grid(50e-9, 5e-6, 5));
  const std::vector<double> dts = fig.time_grid("delta_t", log_grid(1e-8, 1e3, 111));

  const std::size_t n = taus.size() * dts.size();
  std::vector<CorrelatorValue> values(n);
  parallel_for(n, top.options().threads, [&](std::size_t i) {
    values[i] = autocorrelation_analytic(spectrum, {taus[i / dts.size()], dts[i % dts.size()]});
  });
  std::ostringstream csv;
  csv << "delta_t_s,tau_s,correlation,chi_minus,chi_plus,exp_minus_half_chi_minus,chi_minus_approx,regime,flags\n";
  for (std::size_t i = 0; i < n; ++i) {
    const EvolutionPair pair{taus[i / dts.size()], dts[i % dts.size()]};
    const CorrelatorValue& v = values[i];
    const ChiApproximation approx = chi_minus_approx(model, pair);
    csv << csv_number(pair.delta_t) << ',' << csv_number(pair.tau) << ',' << csv_number(v.value) << ','
        << csv_number(v.chi_minus) << ',' << csv_number(v.chi_plus) << ',' << csv_number(std::exp(-0.5 * v.chi_minus))
        << ',' << csv_number(approx.value) << ',' << to_string(approx.regime) << ','
        << point_flags(pair.tau, pair.delta_t, model.omega_e) << '\n';
  }
  CommandOutput out;
  out.files.push_back({"", csv.str()});
  out.sidecar = base_sidecar("figure2", config, top.options());
  add_reference_notes(out.sidecar, fig);
  out.sidecar["notes"].push_back("rows with delta_t < tau are flagged unphysical");
  return out;
}

CommandOutput cmd_figure3a(const Section& top, const json& config) {
  top.allow({"figure", "seed"});
  const json empty = json::object();
  const Section fig = top.has("figure") ? top.sub("figure") : Section(empty, "figure", top.options());
  fig.allow({"rms_field_T", "omega_l", "omega_e", "g_factor", "shifted_omega_e_factor", "target", "delta_t"});
  Figure3aOptions o;
  o.rms_field = fig.number("rms_field_T", kAssumedRms);
  o.omega_l = fig.frequency("omega_l", kRefOmegaL);
  o.omega_e = fig.frequency("omega_e", kRefOmegaE);
  o.g_factor = fig.number("g_factor", kRefG);
  o.shifted_omega_e_factor = fig.number("shifted_omega_e_factor", o.shifted_omega_e_factor);
  o.target = fig.number("target", o.target);
  o.delta_t = fig.time_grid("delta_t", log_grid(1e-6, 10.0, 71));
  o.threads = top.options().threads;

  CommandOutput out;
  out.files.push_back({"", figure_rows(figure3a_bundle(o), "curve")});
  out.sidecar = base_sidecar("figure3a", config, top.options());
  add_reference_notes(out.sidecar, fig);
  out.sidecar["shifted_omega_e_factor"] = o.shifted_omega_e_factor;
  out.sidecar["notes"].push_back("tau(delta_t) holds the linear-regime chi_- term at target for the gamma = 1 model");
  return out;
}

CommandOutput cmd_figure3b(const Section& top, const json& config) {
  top.allow({"figure", "seed"});
  const json empty = json::object();
  const Section fig = top.has("figure") ? top.sub("figure") : Section(empty, "figure", top.options());
  fig.allow({"amplitude", "alphas", "omega_low", "omega_high", "target", "variant", "delta_t"});
  Figure3bOptions o;
  o.amplitude = fig.number("amplitude", o.amplitude);
  if (fig.has("alphas")) {
    const json& a = fig.raw("alphas");
    if (!a.is_array() || a.empty()) fig.fail("alphas", "expected a non-empty array of exponents");
    o.alphas.clear();
    for (const json& x : a) {
      if (!x.is_number()) fig.fail("alphas", "expected numbers");
      o.alphas.push_back(x.get<double>());
    }
  }
  o.omega_low = fig.frequency("omega_low", o.omega_low);
  o.omega_high = fig.frequency("omega_high", o.omega_high);
  o.target = fig.number("target", o.target);
  try {
    o.variant = lambert_variant_from_string(fig.text("variant", to_string(o.variant)));
  } catch (const std::exception& e) {
    fig.fail("variant", e.what());
  }
  o.delta_t = fig.time_grid("delta_t", log_grid(1e-2, 10.0, 31));
  o.threads = top.options().threads;

  CommandOutput out;
  out.files.push_back({"", figure_rows(figure3b_bundle(o), "alpha")});
  out.sidecar = base_sidecar("figure3b", config, top.options());
  out.sidecar["lambert_variant"] = to_string(o.variant);
  out.sidecar["notes"].push_back("all exponents share the 1/f schedule; spectra agree at the pivot frequency");
  return out;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"chi",      "correlate", "simulate", "schedule",
                                              "fit",      "figure2",   "figure3a", "figure3b"};
  return names;
}

CommandOutput run_command(const std::string& command, const json& config, const RunOptions& options) {
  const Section top(config, "", options);
  try {
    if (command == "chi") return cmd_chi(top, config);
    if (command == "simulate") return cmd_simulate(top, config);
    if (command == "correlate") return cmd_correlate(top, config);
    if (command == "schedule") return cmd_schedule(top, config);
    if (command == "fit") return cmd_fit(top, config);
    if (command == "figure2") return cmd_figure2(top, config);
    if (command == "figure3a") return cmd_figure3a(top, config);
    if (command == "figure3b") return cmd_figure3b(top, config);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  throw ConfigError("unknown command '" + command + "'");
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0) || !(hi >= lo) || n < 1) throw ConfigError("log grid needs 0 < lo <= hi and n >= 1");
  // Interpolating the decimal exponent keeps decade points exact.
  std::vector<double> g(n);
  const double a = std::log10(lo), b = std::log10(hi);
  for (std::size_t i = 0; i < n; ++i) g[i] = n > 1 ? std::pow(10.0, a + (b - a) * double(i) / double(n - 1)) : lo;
  g.front() = lo;
  g.back() = hi;
  return g;
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body) {
  const unsigned workers = std::min<std::size_t>(worker_count(threads), std::max<std::size_t>(n, 1));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<FigurePoint> figure3a_bundle(const Figure3aOptions& o) {
  const double omega_l = o.omega_l > 0.0 ? o.omega_l : kRefOmegaL;
  const double omega_e = o.omega_e > 0.0 ? o.omega_e : kRefOmegaE;
  const double c = std::abs(o.g_factor) * kBohrMagnetonOverHbar;
  const double s0 = overhauser_s0_for_rms(o.rms_field, omega_l);
  struct Curve {
    const char* name;
    OverhauserModel model;
  };
  const std::vector<Curve> curves{{"gamma1", {s0, omega_l, omega_e, 1.0, c}},
                                  {"gamma2", {s0, omega_l, omega_e, 2.0, c}},
                                  {"shifted_omega_e", {s0, omega_l, omega_e * o.shifted_omega_e_factor, 1.0, c}},
                                  {"no_cutoff", {s0, omega_l, kNoCutoff, 1.0, c}}};
  std::vector<double> taus(o.delta_t.size());
  for (std::size_t j = 0; j < taus.size(); ++j) taus[j] = tau_constant_contrast(curves[0].model, o.delta_t[j], o.target);

  std::vector<FigurePoint> points(curves.size() * o.delta_t.size());
  parallel_for(points.size(), o.threads, [&](std::size_t i) {
    const Curve& curve = curves[i / o.delta_t.size()];
    const std::size_t j = i % o.delta_t.size();
    const CorrelatorValue v = autocorrelation_analytic(SpectrumModel(curve.model), {taus[j], o.delta_t[j]});
    std::uint32_t flags = kFlagNone;
    if (taus[j] > o.delta_t[j]) flags |= kFlagUnphysical;
    if (std::isfinite(curve.model.omega_e) && taus[j] * curve.model.omega_e >= 0.1) flags |= kFlagLongEvolution;
    points[i] = {curve.name, o.delta_t[j], taus[j], v.value, v.chi_minus, v.chi_plus, flags};
  });
  return points;
}

std::vector<FigurePoint> figure3b_bundle(const Figure3bOptions& o) {
  if (o.delta_t.empty()) throw ConfigError("figure3b: empty delta_t grid");
  double log_mean = 0.0;
  for (double dt : o.delta_t) log_mean += std::log(dt);
  const double pivot = std::exp(-log_mean / double(o.delta_t.size()));

  const SpectrumModel one_over_f(PowerLawModel{o.amplitude, 1.0, o.omega_low, o.omega_high});
  ScheduleRule rule;
  rule.kind = ScheduleRule::Kind::OneOverF;
  rule.target = o.target;
  rule.variant = o.variant;
  const Schedule schedule = build_schedule(one_over_f, o.delta_t, rule);

  std::vector<SpectrumModel> spectra;
  for (double a : o.alphas) {
    spectra.emplace_back(PowerLawModel{o.amplitude * std::pow(pivot, a - 1.0), a, o.omega_low, o.omega_high});
  }
  const std::size_t m = o.delta_t.size();
  std::vector<FigurePoint> points(spectra.size() * m);
  parallel_for(points.size(), o.threads, [&](std::size_t i) {
    const SchedulePoint& sp = schedule.points[i % m];
    const CorrelatorValue v = autocorrelation_analytic(spectra[i / m], {sp.tau, sp.delta_t});
    points[i] = {csv_number(o.alphas[i / m]), sp.delta_t, sp.tau, v.value, v.chi_minus, v.chi_plus, sp.flags};
  });
  return points;
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw ConfigError("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace shotcorr::cli
