#include "shotcorr/fitting.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>
#include <thread>

namespace shotcorr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double get(const ParamMap& p, const char* name) {
  const auto it = p.find(name);
  if (it == p.end()) throw ConfigError(std::string("missing parameter '") + name + "'");
  return it->second;
}

ParamMap merged(const FitProblem& problem, const ParamMap& free_values) {
  ParamMap all = problem.fixed;
  for (const auto& [k, v] : free_values) all[k] = v;
  return all;
}

CorrelationCurve predict_unchecked(const FitProblem& problem, const ParamMap& free_values) {
  const SpectrumModel model = model_from_params(problem.family, merged(problem, free_values));
  CorrelationCurve out;
  out.points.reserve(problem.data.points.size());
  for (std::size_t i = 0; i < problem.data.points.size(); ++i) {
    const CorrelationPoint& d = problem.data.points[i];
    CorrelationPoint p = d;
    p.std_error = 0.0;
    try {
      p.value = autocorrelation_analytic(model, {d.tau, d.delta_t}, problem.qubit, problem.tolerances).value;
    } catch (const NumericalError& e) {
      throw FitEvaluationError("fit evaluation failed at data point " + std::to_string(i) + ": " + e.what(), i);
    }
    out.points.push_back(p);
  }
  return out;
}

// Coordinates of the optimizer: log for positive lower bounds.
struct Transform {
  std::vector<std::string> names;
  std::vector<double> lo, hi;
  std::vector<bool> log_scale;

  explicit Transform(const FitProblem& problem) {
    for (const auto& [name, b] : problem.bounds) {
      names.push_back(name);
      const bool lg = b.first > 0.0;
      log_scale.push_back(lg);
      lo.push_back(lg ? std::log(b.first) : b.first);
      hi.push_back(lg ? std::log(b.second) : b.second);
    }
  }
  std::size_t dim() const { return names.size(); }
  ParamMap to_params(const std::vector<double>& u) const {
    ParamMap p;
    for (std::size_t i = 0; i < dim(); ++i) p[names[i]] = log_scale[i] ? std::exp(u[i]) : u[i];
    return p;
  }
  std::vector<double> to_coords(const ParamMap& p) const {
    std::vector<double> u(dim());
    for (std::size_t i = 0; i < dim(); ++i) {
      const double v = p.at(names[i]);
      u[i] = log_scale[i] ? std::log(v) : v;
    }
    return u;
  }
  void clamp(std::vector<double>& u) const {
    for (std::size_t i = 0; i < dim(); ++i) u[i] = std::clamp(u[i], lo[i], hi[i]);
  }
};

double radical_inverse(unsigned index, unsigned base) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (index > 0) {
    r += f * (index % base);
    index /= base;
    f *= inv;
  }
  return r;
}

struct Objective {
  const FitProblem& problem;
  const Transform& tr;
  int evals = 0;
  int budget = 0;
  int failures = 0;

  double operator()(std::vector<double> u) {
    tr.clamp(u);
    ++evals;
    try {
      return chi_squared(problem, predict_unchecked(problem, tr.to_params(u)));
    } catch (const NumericalError&) {
      ++failures;
      return kInf;
    }
  }
  bool exhausted() const { return evals >= budget; }
};

struct Simplex {
  std::vector<double> best;
  double value = kInf;
  bool converged = false;
};

// Nelder-Mead on the clamped box with adaptive coefficients.
Simplex nelder_mead(Objective& f, std::vector<double> start, double scale) {
  const std::size_t n = start.size();
  const double dn = double(n);
  const double alpha = 1.0, beta = 1.0 + 2.0 / dn, gam = 0.75 - 0.5 / dn, delta = 1.0 - 1.0 / dn;
  f.tr.clamp(start);
  std::vector<std::vector<double>> x(n + 1, start);
  std::vector<double> fx(n + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double span = f.tr.hi[i] - f.tr.lo[i];
    double step = std::min(scale, 0.25 * span);
    if (x[i + 1][i] + step > f.tr.hi[i]) step = -step;
    x[i + 1][i] += step;
  }
  for (std::size_t i = 0; i <= n; ++i) fx[i] = f(x[i]);

  Simplex out;
  std::vector<std::size_t> order(n + 1);
  while (true) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fx[a] < fx[b]; });
    {
      std::vector<std::vector<double>> xs;
      std::vector<double> fs;
      for (std::size_t i : order) {
        xs.push_back(x[i]);
        fs.push_back(fx[i]);
      }
      x = std::move(xs);
      fx = std::move(fs);
    }
    double size = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
      for (std::size_t j = 0; j < n; ++j) size = std::max(size, std::abs(x[i][j] - x[0][j]));
    }
    // Converged once the simplex has collapsed in the coordinates, or when
    // its values agree to roundoff of the quadrature-backed objective.
    const double spread = fx[n] - fx[0];
    if (std::isfinite(fx[0]) && (size < 1e-9 || (size < 1e-6 && spread <= 1e-13 * fx[0]))) {
      out.converged = true;
      break;
    }
    if (f.exhausted()) break;

    std::vector<double> c(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) c[j] += x[i][j] / dn;
    }
    auto along = [&](double t) {
      std::vector<double> p(n);
      for (std::size_t j = 0; j < n; ++j) p[j] = c[j] + t * (x[n][j] - c[j]);
      f.tr.clamp(p);
      return p;
    };
    const std::vector<double> xr = along(-alpha);
    const double fr = f(xr);
    if (fr < fx[0]) {
      const std::vector<double> xe = along(-alpha * beta);
      const double fe = f(xe);
      if (fe < fr) {
        x[n] = xe;
        fx[n] = fe;
      } else {
        x[n] = xr;
        fx[n] = fr;
      }
      continue;
    }
    if (fr < fx[n - 1]) {
      x[n] = xr;
      fx[n] = fr;
      continue;
    }
    const bool outside = fr < fx[n];
    const std::vector<double> xc = along(outside ? -alpha * gam : gam);
    const double fc = f(xc);
    if (fc < (outside ? fr : fx[n])) {
      x[n] = xc;
      fx[n] = fc;
      continue;
    }
    for (std::size_t i = 1; i <= n; ++i) {
      for (std::size_t j = 0; j < n; ++j) x[i][j] = x[0][j] + delta * (x[i][j] - x[0][j]);
      fx[i] = f(x[i]);
    }
  }
  out.best = x[0];
  out.value = fx[0];
  return out;
}

struct StartResult {
  std::vector<double> u;
  double value = kInf;
  bool converged = false;
  int evals = 0;
  int failures = 0;
};

StartResult run_start(const FitProblem& problem, const Transform& tr, std::vector<double> u0, int budget,
                      double polish_step) {
  Objective f{problem, tr, 0, budget, 0};
  StartResult r;
  double scale = 0.1;
  Simplex s = nelder_mead(f, u0, scale);
  for (int round = 0; round < 20; ++round) {
    // Stationarity: no +-polish_step (relative, natural units) coordinate
    // move may lower chi^2 by more than 1e-6 chi^2.
    bool improved = false;
    const ParamMap base = tr.to_params(s.best);
    for (std::size_t i = 0; i < tr.dim() && !improved; ++i) {
      for (double sign : {1.0, -1.0}) {
        ParamMap p = base;
        const double v = p[tr.names[i]];
        p[tr.names[i]] = v == 0.0 ? sign * polish_step : v * (1.0 + sign * polish_step);
        std::vector<double> u = tr.to_coords(p);
        bool inside = true;
        for (std::size_t j = 0; j < tr.dim(); ++j) inside = inside && u[j] >= tr.lo[j] && u[j] <= tr.hi[j];
        if (!inside) continue;
        const double fv = f(u);
        if (fv < s.value - 1e-6 * s.value) {
          s.best = u;
          s.value = fv;
          improved = true;
          break;
        }
      }
    }
    if (!improved) break;
    if (f.exhausted()) {
      s.converged = false;
      break;
    }
    scale = 10.0 * polish_step;
    const Simplex next = nelder_mead(f, s.best, scale);
    if (next.value <= s.value) s = next;
    if (round == 19) s.converged = false;
  }
  r.u = s.best;
  r.value = s.value;
  r.converged = s.converged && std::isfinite(s.value);
  r.evals = f.evals;
  r.failures = f.failures;
  return r;
}

std::vector<std::vector<double>> covariance_matrix(const FitProblem& problem, const ParamMap& best, double f0,
                                                   const std::vector<std::string>& names, int& evals) {
  const std::size_t n = names.size();
  auto chi = [&](const ParamMap& p) {
    ++evals;
    return chi_squared(problem, predict_unchecked(problem, p));
  };
  std::vector<double> h(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = best.at(names[i]);
    h[i] = v != 0.0 ? 1e-3 * std::abs(v) : 1e-6;
  }
  Eigen::MatrixXd H(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    ParamMap p = best, m = best;
    p[names[i]] += h[i];
    m[names[i]] -= h[i];
    H(i, i) = (chi(p) - 2.0 * f0 + chi(m)) / (h[i] * h[i]);
    for (std::size_t j = 0; j < i; ++j) {
      ParamMap pp = best, pm = best, mp = best, mm = best;
      pp[names[i]] += h[i], pp[names[j]] += h[j];
      pm[names[i]] += h[i], pm[names[j]] -= h[j];
      mp[names[i]] -= h[i], mp[names[j]] += h[j];
      mm[names[i]] -= h[i], mm[names[j]] -= h[j];
      H(i, j) = H(j, i) = (chi(pp) - chi(pm) - chi(mp) + chi(mm)) / (4.0 * h[i] * h[j]);
    }
  }
  // Pseudo-inverse on the positive eigenvalues keeps 2 H^-1 PSD.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(Eigen::Index(n));
  const double top = n ? eig.eigenvalues().cwiseAbs().maxCoeff() : 0.0;
  for (Eigen::Index k = 0; k < Eigen::Index(n); ++k) {
    const double lam = eig.eigenvalues()(k);
    if (lam > 1e-12 * top) inv(k) = 1.0 / lam;
  }
  const Eigen::MatrixXd C = 2.0 * eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  std::vector<std::vector<double>> out(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i][j] = C(Eigen::Index(i), Eigen::Index(j));
  }
  return out;
}

}  // namespace

const char* to_string(ModelFamily family) noexcept {
  return family == ModelFamily::Overhauser ? "overhauser" : "power_law";
}

ModelFamily model_family_from_string(const std::string& name) {
  if (name == "overhauser") return ModelFamily::Overhauser;
  if (name == "power_law") return ModelFamily::PowerLaw;
  throw ConfigError("unknown model family '" + name + "' (expected overhauser or power_law)");
}

std::vector<std::string> family_parameters(ModelFamily family) {
  if (family == ModelFamily::Overhauser) return {"coupling_c", "gamma", "omega_e", "omega_l", "s0"};
  return {"alpha", "amplitude", "omega_high", "omega_low"};
}

SpectrumModel model_from_params(ModelFamily family, const ParamMap& p) {
  if (family == ModelFamily::Overhauser) {
    return SpectrumModel(OverhauserModel{get(p, "s0"), get(p, "omega_l"), get(p, "omega_e"), get(p, "gamma"),
                                         get(p, "coupling_c")});
  }
  return SpectrumModel(PowerLawModel{get(p, "amplitude"), get(p, "alpha"), get(p, "omega_low"), get(p, "omega_high")});
}

std::vector<std::string> FitProblem::free_names() const {
  std::vector<std::string> names;
  for (const auto& [k, v] : bounds) names.push_back(k);
  return names;
}

void FitProblem::validate() const {
  if (data.points.empty()) throw ConfigError("fit: no data points");
  for (std::size_t i = 0; i < data.points.size(); ++i) {
    if (!(data.points[i].std_error > 0.0) || !std::isfinite(data.points[i].std_error)) {
      throw ConfigError("fit: data point " + std::to_string(i) + " has no positive stderr");
    }
  }
  if (bounds.empty()) throw ConfigError("fit: no free parameters");
  const std::vector<std::string> names = family_parameters(family);
  for (const auto& [k, b] : bounds) {
    if (std::find(names.begin(), names.end(), k) == names.end()) {
      throw ConfigError("fit: '" + k + "' is not a " + to_string(family) + " parameter");
    }
    if (!std::isfinite(b.first) || !std::isfinite(b.second) || !(b.first < b.second)) {
      throw ConfigError("fit: bounds of '" + k + "' must be finite with lo < hi");
    }
    if (fixed.count(k)) throw ConfigError("fit: '" + k + "' is both free and fixed");
  }
  for (const std::string& k : names) {
    if (!bounds.count(k) && !fixed.count(k)) throw ConfigError("fit: parameter '" + k + "' is neither free nor fixed");
  }
  for (const auto& [k, v] : fixed) {
    if (std::find(names.begin(), names.end(), k) == names.end()) {
      throw ConfigError("fit: '" + k + "' is not a " + to_string(family) + " parameter");
    }
  }
}

CorrelationCurve predict(const FitProblem& problem, const ParamMap& free_values) {
  for (const auto& [k, b] : problem.bounds) {
    const auto it = free_values.find(k);
    if (it == free_values.end()) throw DomainError("predict: missing free parameter '" + k + "'");
    if (!(it->second >= b.first && it->second <= b.second)) {
      throw DomainError("predict: parameter '" + k + "' outside its bounds");
    }
  }
  return predict_unchecked(problem, free_values);
}

double chi_squared(const FitProblem& problem, const CorrelationCurve& model) {
  if (model.points.size() != problem.data.points.size()) throw DomainError("chi_squared: size mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < model.points.size(); ++i) {
    const double r = (problem.data.points[i].value - model.points[i].value) / problem.data.points[i].std_error;
    sum += r * r;
  }
  return sum;
}

FitResult fit(const FitProblem& problem, const ParamMap& init, const FitOptions& options) {
  problem.validate();
  if (options.n_starts < 1) throw ConfigError("fit: n_starts must be >= 1");
  const Transform tr(problem);
  ParamMap init_free;
  for (const std::string& k : tr.names) {
    const auto it = init.find(k);
    if (it == init.end()) throw DomainError("fit: missing initial value for '" + k + "'");
    const auto& b = problem.bounds.at(k);
    if (!(it->second >= b.first && it->second <= b.second)) {
      throw DomainError("fit: initial value of '" + k + "' outside its bounds");
    }
    init_free[k] = it->second;
  }

  std::vector<std::vector<double>> starts{tr.to_coords(init_free)};
  static constexpr unsigned kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
  for (int s = 1; s < options.n_starts; ++s) {
    std::vector<double> u(tr.dim());
    for (std::size_t j = 0; j < tr.dim(); ++j) {
      const double h = radical_inverse(unsigned(s), kPrimes[j % 12]);
      u[j] = tr.lo[j] + h * (tr.hi[j] - tr.lo[j]);
    }
    starts.push_back(u);
  }
  const int budget = std::max(1, options.max_evaluations / options.n_starts);
  std::vector<StartResult> results(starts.size());
  const unsigned threads = std::max(1u, std::min<unsigned>(options.threads, unsigned(starts.size())));
  if (threads == 1) {
    for (std::size_t s = 0; s < starts.size(); ++s) {
      results[s] = run_start(problem, tr, starts[s], budget, options.polish_step);
    }
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t s = t; s < starts.size(); s += threads) {
          results[s] = run_start(problem, tr, starts[s], budget, options.polish_step);
        }
      });
    }
    for (std::thread& th : pool) th.join();
  }

  FitResult out;
  out.free_names = tr.names;
  out.dof = int(problem.data.points.size()) - int(tr.dim());
  int best = -1, failures = 0;
  for (std::size_t s = 0; s < results.size(); ++s) {
    out.n_evals += results[s].evals;
    failures += results[s].failures;
    if (!std::isfinite(results[s].value)) continue;
    if (best < 0) {
      best = int(s);
      continue;
    }
    const StartResult& b = results[std::size_t(best)];
    const StartResult& r = results[s];
    // Converged starts win; then lowest chi^2; then smaller coordinates in
    // name order.
    if (r.converged != b.converged) {
      if (r.converged) best = int(s);
      continue;
    }
    if (r.value < b.value || (r.value == b.value && r.u < b.u)) best = int(s);
  }
  if (failures > 0) out.notes.push_back(std::to_string(failures) + " forward evaluations failed and were skipped");
  if (best < 0) {
    out.notes.push_back("no start produced a finite chi^2");
    out.params = merged(problem, init_free);
    out.chi_squared = kInf;
    return out;
  }
  const StartResult& b = results[std::size_t(best)];
  std::vector<double> u = b.u;
  tr.clamp(u);
  const ParamMap free_best = tr.to_params(u);
  out.params = merged(problem, free_best);
  out.chi_squared = b.value;
  out.converged = b.converged;
  out.best_start = best;
  int converged_starts = 0;
  for (const StartResult& r : results) converged_starts += r.converged;
  out.notes.push_back(std::to_string(converged_starts) + " of " + std::to_string(results.size()) +
                      " starts converged");
  if (!out.converged) out.notes.push_back("evaluation budget exhausted before convergence");
  try {
    out.covariance = covariance_matrix(problem, free_best, b.value, tr.names, out.n_evals);
    for (std::size_t i = 0; i < tr.dim(); ++i) out.uncertainty[tr.names[i]] = std::sqrt(out.covariance[i][i]);
  } catch (const NumericalError& e) {
    out.notes.push_back(std::string("covariance unavailable: ") + e.what());
  }
  out.notes.push_back("covariance 2 H^-1 from finite-difference curvature of chi^2 (asymptotic)");
  return out;
}

std::string fit_result_json(const FitResult& r, ModelFamily family) {
  nlohmann::ordered_json j;
  j["family"] = to_string(family);
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.params) {
    const bool is_free = std::find(r.free_names.begin(), r.free_names.end(), k) != r.free_names.end();
    nlohmann::ordered_json p;
    p["value"] = v;
    p["free"] = is_free;
    if (is_free && r.uncertainty.count(k)) p["uncertainty"] = r.uncertainty.at(k);
    params[k] = p;
  }
  j["parameters"] = params;
  j["chi_squared"] = r.chi_squared;
  j["dof"] = r.dof;
  j["converged"] = r.converged;
  j["n_evals"] = r.n_evals;
  j["free_parameters"] = r.free_names;
  j["covariance"] = r.covariance;
  j["notes"] = r.notes;
  return j.dump(2) + "\n";
}

GammaDiscrimination discriminate_gamma(const CorrelationCurve& data, const OverhauserModel& reference,
                                       const FitOptions& options, double range, bool check_span) {
  if (!(range > 1.0)) throw DomainError("discriminate_gamma: range must be > 1");
  if (!(reference.omega_e > 0.0) || !std::isfinite(reference.omega_e)) {
    throw DomainError("discriminate_gamma: reference needs a finite omega_e");
  }
  double lo = kInf, hi = 0.0;
  for (const CorrelationPoint& p : data.points) {
    lo = std::min(lo, p.delta_t);
    hi = std::max(hi, p.delta_t);
  }
  const double te = 1.0 / reference.omega_e;
  if (check_span && !(lo <= 0.1 * te * (1.0 + 1e-9) && hi >= 10.0 * te * (1.0 - 1e-9))) {
    throw DomainError("discriminate_gamma: data must span delta_t in [0.1, 10] / omega_e");
  }
  GammaDiscrimination out;
  for (int g : {1, 2}) {
    FitProblem prob;
    prob.data = data;
    prob.family = ModelFamily::Overhauser;
    prob.fixed = {{"omega_l", reference.omega_l}, {"coupling_c", reference.coupling_c}, {"gamma", double(g)}};
    prob.bounds = {{"s0", {reference.s0 / range, reference.s0 * range}},
                   {"omega_e", {reference.omega_e / range, reference.omega_e * range}}};
    const FitResult r = fit(prob, {{"s0", reference.s0}, {"omega_e", reference.omega_e}}, options);
    if (!r.converged) {
      throw NumericalError("discriminate_gamma: gamma = " + std::to_string(g) + " fit did not converge",
                           r.chi_squared, 0.0);
    }
    (g == 1 ? out.fit_gamma1 : out.fit_gamma2) = r;
  }
  const double c1 = out.fit_gamma1.chi_squared, c2 = out.fit_gamma2.chi_squared;
  out.gamma_hat = c1 <= c2 ? 1 : 2;
  out.delta_chi_squared = std::abs(c1 - c2);
  out.indeterminate = !(out.delta_chi_squared > kGammaDiscriminationThreshold);
  return out;
}

AlphaEstimate estimate_alpha_slope(const CorrelationCurve& data, const AlphaSlopeOptions& options) {
  const std::size_t n = data.points.size();
  if (n < 3) throw DomainError("estimate_alpha_slope: need at least 3 points");
  const double tau = data.points.front().tau;
  double lo = kInf, hi = 0.0;
  for (const CorrelationPoint& p : data.points) {
    if (std::abs(p.tau - tau) > 1e-12 * tau) throw DomainError("estimate_alpha_slope: data must share one tau");
    if (!(p.value > 0.02 && p.value < 0.48)) {
      throw DomainError("estimate_alpha_slope: correlations must lie in (0.02, 0.48)");
    }
    if (!(p.std_error > 0.0)) throw DomainError("estimate_alpha_slope: every point needs stderr > 0");
    lo = std::min(lo, p.delta_t);
    hi = std::max(hi, p.delta_t);
  }
  if (lo < 10.0 * tau * (1.0 - 1e-12)) throw DomainError("estimate_alpha_slope: delta_t must be >= 10 tau");
  if (options.omega_low > 0.0 && hi > 0.1 / options.omega_low * (1.0 + 1e-12)) {
    throw DomainError("estimate_alpha_slope: delta_t must be <= 0.1 / omega_low");
  }
  if (std::log10(hi / lo) < 1.5) throw DomainError("estimate_alpha_slope: delta_t range narrower than 1.5 decades");

  AlphaEstimate out;
  std::vector<double> x(n), chi(n), sig_chi(n);
  for (std::size_t i = 0; i < n; ++i) {
    const CorrelationPoint& p = data.points[i];
    double plus_term = 0.0;
    if (options.chi_plus_model) {
      out.chi_plus_checked = true;
      const double damp = std::exp(-0.5 * chi_plus(*options.chi_plus_model, {p.tau, p.delta_t}));
      if (!(damp < 1e-3)) out.chi_plus_negligible = false;
      plus_term = std::cos(2.0 * options.omega_q * p.tau) * damp;
    }
    const double arg = 2.0 * p.value - plus_term;
    if (!(arg > 0.0)) throw DomainError("estimate_alpha_slope: chi_- not extractable at point " + std::to_string(i));
    x[i] = std::log(p.delta_t);
    chi[i] = -2.0 * std::log(arg);
    sig_chi[i] = 4.0 * p.std_error / arg;
  }

  // Weighted straight line y = a + b x; returns slope, its stderr and chi^2.
  auto line = [&](const std::vector<double>& y, const std::vector<double>& sig) {
    double sw = 0, sx = 0, sy = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = 1.0 / (sig[i] * sig[i]);
      sw += w, sx += w * x[i], sy += w * y[i];
    }
    const double xm = sx / sw, ym = sy / sw;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = 1.0 / (sig[i] * sig[i]);
      sxx += w * (x[i] - xm) * (x[i] - xm);
      sxy += w * (x[i] - xm) * (y[i] - ym);
    }
    const double b = sxy / sxx, a = ym - b * xm;
    double c2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = (y[i] - a - b * x[i]) / sig[i];
      c2 += r * r;
    }
    return std::array<double, 3>{b, std::sqrt(1.0 / sxx), c2};
  };
  std::vector<double> ln_chi(n), sig_ln(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(chi[i] > 0.0)) throw DomainError("estimate_alpha_slope: extracted chi_- must be > 0");
    ln_chi[i] = std::log(chi[i]);
    sig_ln[i] = sig_chi[i] / chi[i];
  }
  const auto power = line(ln_chi, sig_ln);
  const auto logarithmic = line(chi, sig_chi);
  const double birge = std::sqrt(std::max(1.0, power[2] / double(n - 2)));
  out.slope = power[0];
  out.slope_stderr = power[1] * birge;
  out.alpha = 1.0 + out.slope;
  out.chi2_power = power[2];
  out.chi2_log = logarithmic[2];
  out.logarithmic = logarithmic[2] < power[2];
  return out;
}

}  // namespace shotcorr
