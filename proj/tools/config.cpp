#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "shotcorr/errors.hpp"

namespace shotcorr::cli {

using nlohmann::json;

FreqUnits freq_units_from_string(const std::string& name) {
  if (name == "hz") return FreqUnits::Hz;
  if (name == "rad" || name == "rad_per_s") return FreqUnits::Rad;
  throw ConfigError("freq-units: expected 'hz' or 'rad', got '" + name + "'");
}

Section::Section(const json& node, std::string path, const RunOptions& options)
    : node_(node), path_(std::move(path)), options_(options) {
  if (!node_.is_object()) throw ConfigError("config: " + (path_.empty() ? std::string("top level") : path_) +
                                            ": expected an object");
}

bool Section::has(const std::string& key) const { return node_.contains(key) && !node_[key].is_null(); }

std::string Section::field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

void Section::fail(const std::string& key, const std::string& message) const {
  throw ConfigError("config: " + field(key) + ": " + message);
}

void Section::allow(std::initializer_list<const char*> allowed) const {
  for (auto it = node_.begin(); it != node_.end(); ++it) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return it.key() == a; })) {
      fail(it.key(), "unknown key");
    }
  }
}

Section Section::sub(const std::string& key) const {
  if (!has(key)) fail(key, "required section is missing");
  if (!node_[key].is_object()) fail(key, "expected an object");
  return Section(node_[key], field(key), options_);
}

std::optional<Section> Section::optional_sub(const std::string& key) const {
  if (!has(key)) return std::nullopt;
  return sub(key);
}

const json& Section::raw(const std::string& key) const {
  if (!has(key)) fail(key, "required field is missing");
  return node_[key];
}

double Section::number(const std::string& key) const {
  const json& v = raw(key);
  if (!v.is_number()) fail(key, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(key, "must be finite");
  return x;
}

double Section::number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

std::size_t Section::count(const std::string& key, std::size_t fallback) const {
  if (!has(key)) return fallback;
  const json& v = raw(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) fail(key, "expected a non-negative integer");
  return static_cast<std::size_t>(v.get<long long>());
}

bool Section::boolean(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const json& v = raw(key);
  if (!v.is_boolean()) fail(key, "expected true or false");
  return v.get<bool>();
}

std::string Section::text(const std::string& key) const {
  const json& v = raw(key);
  if (!v.is_string()) fail(key, "expected a string");
  return v.get<std::string>();
}

std::string Section::text(const std::string& key, const std::string& fallback) const {
  return has(key) ? text(key) : fallback;
}

double Section::frequency_value(const json& v, const std::string& where) const {
  auto bad = [&](const std::string& m) -> double { throw ConfigError("config: " + where + ": " + m); };
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "none" || s == "inf") return std::numeric_limits<double>::infinity();
    return bad("expected a frequency, 'none' or 'inf'");
  }
  double value = 0.0;
  FreqUnits unit = options_.freq_units;
  if (v.is_number()) {
    value = v.get<double>();
  } else if (v.is_object()) {
    if (!v.contains("value") || !v["value"].is_number()) return bad("tagged frequency needs a numeric 'value'");
    if (!v.contains("unit") || !v["unit"].is_string()) return bad("tagged frequency needs a 'unit'");
    value = v["value"].get<double>();
    try {
      unit = freq_units_from_string(v["unit"].get<std::string>());
    } catch (const ConfigError&) {
      return bad("unit must be 'hz' or 'rad_per_s'");
    }
  } else {
    return bad("expected a frequency");
  }
  if (!std::isfinite(value)) return bad("must be finite");
  return unit == FreqUnits::Hz ? 2.0 * std::numbers::pi * value : value;
}

double Section::time_value(const json& v, const std::string& where) const {
  auto bad = [&](const std::string& m) -> double { throw ConfigError("config: " + where + ": " + m); };
  double value = 0.0;
  double divisor = 1.0;
  if (v.is_number()) {
    value = v.get<double>();
  } else if (v.is_object()) {
    if (!v.contains("value") || !v["value"].is_number()) return bad("tagged time needs a numeric 'value'");
    if (!v.contains("unit") || !v["unit"].is_string()) return bad("tagged time needs a 'unit'");
    value = v["value"].get<double>();
    const std::string u = v["unit"].get<std::string>();
    if (u == "s") divisor = 1.0;
    else if (u == "ms") divisor = 1e3;
    else if (u == "us") divisor = 1e6;
    else if (u == "ns") divisor = 1e9;
    else return bad("unit must be 's', 'ms', 'us' or 'ns'");
  } else {
    return bad("expected a time in seconds");
  }
  if (!std::isfinite(value) || value < 0.0) return bad("must be finite and >= 0");
  return value / divisor;
}

double Section::frequency(const std::string& key) const { return frequency_value(raw(key), field(key)); }
double Section::frequency(const std::string& key, double fallback) const {
  return has(key) ? frequency(key) : fallback;
}
double Section::time(const std::string& key) const { return time_value(raw(key), field(key)); }
double Section::time(const std::string& key, double fallback) const { return has(key) ? time(key) : fallback; }

std::vector<double> Section::time_grid(const std::string& key) const {
  const json& v = raw(key);
  std::vector<double> grid;
  if (v.is_array()) {
    for (std::size_t i = 0; i < v.size(); ++i) grid.push_back(time_value(v[i], field(key) + "[" + std::to_string(i) + "]"));
  } else if (v.is_object()) {
    const Section g(v, field(key), options_);
    g.allow({"min", "max", "n", "spacing"});
    const double lo = g.time("min"), hi = g.time("max");
    const std::size_t n = g.count("n", 0);
    const std::string spacing = g.text("spacing", "log");
    if (n < 1) g.fail("n", "must be >= 1");
    if (!(hi >= lo)) g.fail("max", "must be >= min");
    if (spacing == "log") {
      if (!(lo > 0.0)) g.fail("min", "must be > 0 for a log grid");
      grid = log_grid(lo, hi, n);
    } else if (spacing == "linear") {
      for (std::size_t i = 0; i < n; ++i) grid.push_back(n == 1 ? lo : lo + (hi - lo) * double(i) / double(n - 1));
    } else {
      g.fail("spacing", "must be 'log' or 'linear'");
    }
  } else {
    fail(key, "expected an array of times or a {min, max, n, spacing} object");
  }
  if (grid.empty()) fail(key, "grid is empty");
  return grid;
}

std::vector<double> Section::time_grid(const std::string& key, const std::vector<double>& fallback) const {
  return has(key) ? time_grid(key) : fallback;
}

std::string Section::path(const std::string& key) const {
  std::filesystem::path p(text(key));
  if (p.is_relative()) p = options_.base_dir / p;
  return p.string();
}

SpectrumModel parse_spectrum(const Section& s) {
  const std::string family = s.text("family");
  try {
    if (family == "overhauser") {
      s.allow({"family", "s0", "rms_field_T", "omega_l", "omega_e", "gamma", "coupling_c", "g_factor"});
      OverhauserModel m;
      m.omega_l = s.frequency("omega_l");
      m.omega_e = s.frequency("omega_e", kNoCutoff);
      m.gamma = s.number("gamma", 1.0);
      if (s.has("s0") == s.has("rms_field_T")) s.fail("s0", "give exactly one of s0 and rms_field_T");
      m.s0 = s.has("s0") ? s.number("s0") : overhauser_s0_for_rms(s.number("rms_field_T"), m.omega_l);
      if (s.has("coupling_c") && s.has("g_factor")) s.fail("coupling_c", "give at most one of coupling_c and g_factor");
      m.coupling_c = s.has("coupling_c") ? s.number("coupling_c")
                                         : std::abs(s.number("g_factor", -0.44)) * kBohrMagnetonOverHbar;
      return SpectrumModel(m);
    }
    if (family == "power_law") {
      s.allow({"family", "amplitude", "alpha", "omega_low", "omega_high"});
      return SpectrumModel(PowerLawModel{s.number("amplitude"), s.number("alpha"), s.frequency("omega_low", 0.0),
                                         s.frequency("omega_high")});
    }
    if (family == "white") {
      s.allow({"family", "level", "omega_high"});
      return SpectrumModel(WhiteModel{s.number("level"), s.frequency("omega_high")});
    }
    if (family == "tabulated") {
      s.allow({"family", "path"});
      return SpectrumModel(load_tabulated_csv(s.path("path")));
    }
  } catch (const DomainError& e) {
    throw ConfigError("config: " + s.field("family") + " '" + family + "': " + e.what());
  }
  s.fail("family", "expected overhauser, power_law, white or tabulated, got '" + family + "'");
}

QubitParams parse_qubit(const std::optional<Section>& section, const SpectrumModel* spectrum) {
  QubitParams q;
  if (section) {
    section->allow({"omega_q", "readout_flip_prob", "dead_time"});
    q.omega_q = section->frequency("omega_q", 0.0);
    q.readout_flip_prob = section->number("readout_flip_prob", 0.0);
    q.dead_time = section->time("dead_time", 0.0);
  }
  if (spectrum) {
    if (const auto* m = std::get_if<OverhauserModel>(&spectrum->params())) q.coupling_c = m->coupling_c;
  }
  try {
    q.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: qubit: ") + e.what());
  }
  return q;
}

QuadratureSpec parse_quadrature(const std::optional<Section>& section) {
  QuadratureSpec spec;
  if (section) {
    section->allow({"rel_tol", "abs_tol", "max_panels"});
    spec.rel_tol = section->number("rel_tol", spec.rel_tol);
    spec.abs_tol = section->number("abs_tol", spec.abs_tol);
    spec.max_panels = section->count("max_panels", spec.max_panels);
    if (!(spec.rel_tol > 0.0)) section->fail("rel_tol", "must be > 0");
  }
  return spec;
}

}  // namespace shotcorr::cli
