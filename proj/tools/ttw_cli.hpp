// Command-line front end. Everything lives in dispatch() so tests can drive it
// with in-memory streams.
#ifndef TTW_CLI_HPP
#define TTW_CLI_HPP

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "ttw/ttw.hpp"

namespace ttw::cli {

using json = nlohmann::json;

inline constexpr const char* kThreadsEnv = "TTW_THREADS";
inline constexpr const char* kTrajectoryHeader = "t,r,phi,p_r,p_phi,E,A,ReC,ImC";

enum Exit : int { kOk = 0, kVerificationFailed = 1, kUsage = 2, kNumerical = 3 };

struct RunConfig {
  double omega = 1.0;
  double alpha = 1.0;
  double beta = 2.0;
  std::string k = "1/1";

  std::string state;
  std::uint64_t seed = 0;
  double energy_lo = 1.5;
  double energy_hi = 3.0;

  std::string scheme = "adaptive";
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double dt = 1e-3;
  std::int64_t max_steps = 50'000'000;
  double guard = kDefaultGuard;

  std::string out;
  std::string config;

  std::optional<double> t_end;
  std::optional<double> horizon;
  double drift_tol = 1e-7;
  double bracket_tol = 1e-6;
  int samples = 100;
  double closure_tol = 1e-6;
  double recurrence_slack = 1e-3;
  std::optional<double> energy;
  std::optional<double> angular;
  double action_tol = 1e-12;
  std::string point;
  double spacing = 0.5;
  std::optional<int> nodes;
  double degree_tol = kDegreeResidualTol;
  double leading_tol = kLeadingDifferenceTol;
  int seeds = 8;
  std::string k_list;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(trim(cur));
  return parts;
}

template <class T>
T parse_number(const std::string& text, const std::string& what) {
  T value{};
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (text.empty() || ec != std::errc{} || ptr != last) {
    throw ConfigurationError(what + ": cannot parse '" + text + "'");
  }
  return value;
}

inline std::vector<double> parse_doubles(const std::string& text, std::size_t count, const std::string& what) {
  const auto parts = split(text, ',');
  if (parts.size() != count) {
    throw ConfigurationError(what + ": expected " + std::to_string(count) + " comma-separated values");
  }
  std::vector<double> v;
  for (const auto& p : parts) v.push_back(parse_number<double>(p, what));
  return v;
}

// Shortest round-trip representation, so output is byte-stable.
inline std::string num(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline json nullable(std::optional<double> v) { return v ? json(*v) : json(nullptr); }

inline json state_json(const PhaseState& s) { return {{"r", s.r}, {"phi", s.phi}, {"p_r", s.p_r}, {"p_phi", s.p_phi}}; }

inline json degree_json(const DegreeReport& r) {
  return {{"degree", r.degree},   {"residual", r.residual},         {"leading", r.leading},
          {"scale", r.scale},     {"degree_at_most", r.degree_at_most}, {"degree_exact", r.degree_exact}};
}

}  // namespace detail

/// "m/n" selects rational mode; a bare decimal selects irrational mode.
inline ModelParameters parse_model(double omega, double alpha, double beta, const std::string& k_text) {
  const std::string k = detail::trim(k_text);
  const auto slash = k.find('/');
  if (slash != std::string::npos) {
    const auto m = detail::parse_number<long long>(detail::trim(k.substr(0, slash)), "--k numerator");
    const auto n = detail::parse_number<long long>(detail::trim(k.substr(slash + 1)), "--k denominator");
    return ModelParameters::rational(omega, alpha, beta, m, n);
  }
  return ModelParameters::irrational(omega, alpha, beta, detail::parse_number<double>(k, "--k"));
}

inline ModelParameters model(const RunConfig& c) { return parse_model(c.omega, c.alpha, c.beta, c.k); }

inline IntegratorConfig integrator(const RunConfig& c) {
  IntegratorConfig ic;
  if (c.scheme == "adaptive") {
    ic.scheme = Scheme::adaptive_embedded;
  } else if (c.scheme == "midpoint") {
    ic.scheme = Scheme::implicit_midpoint;
  } else {
    throw ConfigurationError("--scheme must be 'adaptive' or 'midpoint'");
  }
  ic.rel_tol = c.rel_tol;
  ic.abs_tol = c.abs_tol;
  ic.dt = c.dt;
  ic.max_steps = c.max_steps;
  ic.boundary_guard = c.guard;
  ic.validate();
  return ic;
}

/// --state wins over --seed.
inline PhaseState initial_state(const RunConfig& c, const ModelParameters& p, std::uint64_t seed_offset = 0) {
  if (!c.state.empty()) {
    const auto v = detail::parse_doubles(c.state, 4, "--state");
    const PhaseState s{v[0], v[1], v[2], v[3]};
    validate(p, s, c.guard);
    return s;
  }
  return sample_admissible_state(p, c.seed + seed_offset, relative_energy_range(p, c.energy_lo, c.energy_hi));
}

/// Ten joint periods in rational mode, ten radial periods otherwise.
inline double default_t_end(const ModelParameters& p) {
  const double radial = kPi / (2.0 * p.omega());
  return 10.0 * (p.is_rational() ? static_cast<double>(p.n()) * radial : radial);
}

inline void require_rational(const ModelParameters& p, const char* command) {
  if (!p.is_rational()) throw ConfigurationError(std::string(command) + " needs a rational --k of the form m/n");
}

namespace detail {

class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) throw ConfigurationError("cannot open output file '" + path + "'");
    }
    os_ = path.empty() ? &fallback : &file_;
  }
  std::ostream& operator*() { return *os_; }

 private:
  std::ofstream file_;
  std::ostream* os_;
};

inline void write_json(const RunConfig& c, std::ostream& out, const json& j) {
  Sink sink(c.out, out);
  *sink << j.dump(2) << '\n';
}

}  // namespace detail

inline int run_simulate(const RunConfig& c, std::ostream& out) {
  const auto p = model(c);
  const auto s0 = initial_state(c, p);
  const auto traj = integrate(p, s0, c.t_end.value_or(default_t_end(p)), integrator(c));
  detail::Sink sink(c.out, out);
  auto& os = *sink;
  os << kTrajectoryHeader << '\n';
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& smp : traj.samples()) {
    const auto inv = evaluate_invariants(p, smp.state);
    const auto& s = smp.state;
    using detail::num;
    os << num(smp.t) << ',' << num(s.r) << ',' << num(s.phi) << ',' << num(s.p_r) << ',' << num(s.p_phi) << ','
       << num(inv.E) << ',' << num(inv.A) << ',' << num(inv.C ? inv.C->real() : nan) << ','
       << num(inv.C ? inv.C->imag() : nan) << '\n';
  }
  return kOk;
}

inline int run_invariants(const RunConfig& c, std::ostream& out) {
  const auto p = model(c);
  const auto s0 = initial_state(c, p);
  const double t_end = c.t_end.value_or(default_t_end(p));
  const auto rep = drift_report(p, integrate(p, s0, t_end, integrator(c)));
  json qs = json::array();
  for (const auto& q : rep.quantities) {
    qs.push_back({{"name", q.name},
                  {"initial", q.initial},
                  {"max_abs_deviation", q.max_abs_deviation},
                  {"max_rel_deviation", q.max_rel_deviation}});
  }
  const bool passed = rep.max_rel_deviation() < c.drift_tol;
  detail::write_json(c, out,
                     {{"k", p.k_string()},
                      {"state0", detail::state_json(s0)},
                      {"t_end", t_end},
                      {"samples", rep.samples},
                      {"quantities", qs},
                      {"modulus_identity_residual", rep.modulus_identity_residual},
                      {"max_rel_deviation", rep.max_rel_deviation()},
                      {"drift_tol", c.drift_tol},
                      {"passed", passed}});
  return passed ? kOk : kVerificationFailed;
}

inline int run_bracket(const RunConfig& c, std::ostream& out) {
  const auto p = model(c);
  if (c.samples < 1) throw ConfigurationError("--samples must be positive");
  std::vector<PhaseState> states;
  if (!c.state.empty()) {
    states.push_back(initial_state(c, p));
  } else {
    for (int i = 0; i < c.samples; ++i) states.push_back(initial_state(c, p, static_cast<std::uint64_t>(i)));
  }

  auto H = [&](const PhaseState& s) { return hamiltonian(p, s); };
  auto A = [&](const PhaseState& s) { return angular_integral(p, s); };
  auto re_c = [&](const PhaseState& s) { return superintegral(p, s).real(); };
  auto im_c = [&](const PhaseState& s) { return superintegral(p, s).imag(); };
  auto G = [&](const PhaseState& s) { return reduced_integral(p, s); };
  const double nan = std::numeric_limits<double>::quiet_NaN();

  detail::Sink sink(c.out, out);
  auto& os = *sink;
  os << "index,r,phi,p_r,p_phi,H_A,ReC_H,ImC_H,G_H\n";
  double worst = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto& s = states[i];
    double row[4] = {poisson_bracket(p, H, A, s).normalized(), nan, nan, nan};
    if (p.is_rational()) {
      row[1] = poisson_bracket(p, re_c, H, s).normalized();
      row[2] = poisson_bracket(p, im_c, H, s).normalized();
      row[3] = poisson_bracket(p, G, H, s).normalized();
    }
    using detail::num;
    os << i << ',' << num(s.r) << ',' << num(s.phi) << ',' << num(s.p_r) << ',' << num(s.p_phi);
    for (double v : row) {
      os << ',' << num(v);
      if (!std::isnan(v)) worst = std::max(worst, v);
    }
    os << '\n';
  }
  return worst < c.bracket_tol ? kOk : kVerificationFailed;
}

inline int run_closure(const RunConfig& c, std::ostream& out) {
  const auto p = model(c);
  const auto s0 = initial_state(c, p);
  const double horizon = c.horizon.value_or(20.0 * kPi);
  const auto rep = detect_closure(p, s0, horizon, c.closure_tol, integrator(c));

  // Rational: the orbit must close by the joint period. Irrational: it must not close at all.
  bool passed = false;
  if (rep.predicted_time) {
    passed = rep.recurrence_time && *rep.recurrence_time <= *rep.predicted_time + c.recurrence_slack;
  } else {
    passed = !rep.recurrence_time;
  }
  detail::write_json(c, out,
                     {{"k", p.k_string()},
                      {"rational", p.is_rational()},
                      {"state0", detail::state_json(s0)},
                      {"recurrence_time", detail::nullable(rep.recurrence_time)},
                      {"min_return_distance", rep.min_return_distance},
                      {"min_return_time", rep.min_return_time},
                      {"predicted_time", detail::nullable(rep.predicted_time)},
                      {"configuration_closure_time", detail::nullable(rep.configuration_closure_time)},
                      {"configuration_min_distance", rep.configuration_min_distance},
                      {"configuration_min_time", rep.configuration_min_time},
                      {"horizon", rep.horizon},
                      {"tol", rep.tol},
                      {"recurrence_slack", c.recurrence_slack},
                      {"phase_distance_metric", rep.phase_distance_metric},
                      {"passed", passed}});
  return passed ? kOk : kVerificationFailed;
}

inline int run_actions(const RunConfig& c, std::ostream& out) {
  const auto p = model(c);
  double E = 0.0;
  double A = 0.0;
  if (c.energy || c.angular) {
    if (!c.energy || !c.angular) throw ConfigurationError("--E and --A must be given together");
    E = *c.energy;
    A = *c.angular;
  } else {
    const auto s = initial_state(c, p);
    E = hamiltonian(p, s);
    A = angular_integral(p, s);
  }
  const auto acts = actions_from_invariants(p, E, A);
  const double e_back = energy_from_actions(p, acts);
  const double rel = std::abs(e_back - E) / std::max(std::abs(E), std::numeric_limits<double>::min());
  const auto freq = fundamental_frequencies(p);
  const bool passed = rel < c.action_tol;
  detail::write_json(c, out,
                     {{"k", p.k_string()},
                      {"E", E},
                      {"A", A},
                      {"I1", acts.I1},
                      {"I2", acts.I2},
                      {"E_reconstructed", e_back},
                      {"relative_error", rel},
                      {"frequencies", {{"radial", freq.radial}, {"angular", freq.angular}}},
                      {"action_tol", c.action_tol},
                      {"passed", passed}});
  return passed ? kOk : kVerificationFailed;
}

inline int run_polyint(const RunConfig& c, std::ostream& out) {
  const auto p = model(c);
  require_rational(p, "polyint");
  ConfigPoint point{1.0, 0.4 * p.sector_width()};
  if (!c.point.empty()) {
    const auto v = detail::parse_doubles(c.point, 2, "--point");
    point = {v[0], v[1]};
  }
  const int d = reduced_degree(p);
  auto grid = MomentumGrid::for_degree(d, c.spacing);
  if (c.nodes) grid.nodes_r = grid.nodes_phi = *c.nodes;
  if (!(grid.spacing > 0.0)) throw ConfigurationError("--spacing must be positive");

  const auto table = extract_reduced_integral(p, point, grid);
  const auto cert = verify_polynomial_degree(table, d, c.degree_tol, c.leading_tol);

  json values = json::array();
  for (std::size_t i = 0; i < table.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < table.cols(); ++j) row.push_back(table.at(i, j));
    values.push_back(row);
  }
  const bool passed = cert.degree_exact;
  detail::write_json(c, out,
                     {{"k", p.k_string()},
                      {"m", p.m()},
                      {"n", p.n()},
                      {"claimed_degree", table.claimed_degree},
                      {"parity", table.parity == Parity::even ? "even" : "odd"},
                      {"config_point", {{"r", point.r}, {"phi", point.phi}}},
                      {"p_r_nodes", table.p_r_nodes},
                      {"p_phi_nodes", table.p_phi_nodes},
                      {"values", values},
                      {"certification", detail::degree_json(cert)},
                      {"degree_tol", c.degree_tol},
                      {"leading_tol", c.leading_tol},
                      {"passed", passed}});
  return passed ? kOk : kVerificationFailed;
}

inline unsigned thread_count() {
  if (const char* env = std::getenv(kThreadsEnv); env && *env) {
    const auto n = detail::parse_number<int>(detail::trim(env), kThreadsEnv);
    if (n < 1) throw ConfigurationError(std::string(kThreadsEnv) + " must be a positive integer");
    return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

inline int run_scan(const RunConfig& c, std::ostream& out) {
  if (c.seeds < 1) throw ConfigurationError("--seeds must be positive");
  const auto ks = detail::split(c.k_list.empty() ? c.k : c.k_list, ',');
  std::vector<ModelParameters> models;
  for (const auto& k : ks) models.push_back(parse_model(c.omega, c.alpha, c.beta, k));
  const auto ic = integrator(c);

  struct Row {
    std::string k;
    std::uint64_t seed = 0;
    PhaseState s0;
    DriftReport drift;
    std::exception_ptr error;
  };
  std::vector<Row> rows;
  for (const auto& p : models) {
    for (int i = 0; i < c.seeds; ++i) rows.push_back({p.k_string(), c.seed + static_cast<std::uint64_t>(i), {}, {}, {}});
  }

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t idx = next++; idx < rows.size(); idx = next++) {
      Row& row = rows[idx];
      const auto& p = models[idx / static_cast<std::size_t>(c.seeds)];
      try {
        row.s0 = sample_admissible_state(p, row.seed, relative_energy_range(p, c.energy_lo, c.energy_hi));
        row.drift = drift_report(p, integrate(p, row.s0, c.t_end.value_or(default_t_end(p)), ic));
      } catch (...) {
        row.error = std::current_exception();
      }
    }
  };
  const unsigned n_threads = std::min<unsigned>(thread_count(), static_cast<unsigned>(rows.size()));
  std::vector<std::jthread> pool;
  for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(work);
  pool.clear();

  for (const auto& row : rows) {
    if (row.error) std::rethrow_exception(row.error);
  }

  detail::Sink sink(c.out, out);
  auto& os = *sink;
  os << "k,seed,r,phi,p_r,p_phi,E,A,drift_E,drift_A,drift_ReC,drift_ImC,passed\n";
  bool all = true;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& row : rows) {
    auto drift = [&](const char* name) {
      const auto* q = row.drift.find(name);
      return q ? q->max_rel_deviation : nan;
    };
    const bool ok = row.drift.max_rel_deviation() < c.drift_tol;
    all = all && ok;
    using detail::num;
    os << row.k << ',' << row.seed << ',' << num(row.s0.r) << ',' << num(row.s0.phi) << ',' << num(row.s0.p_r) << ','
       << num(row.s0.p_phi) << ',' << num(row.drift.find("E")->initial) << ',' << num(row.drift.find("A")->initial) << ','
       << num(drift("E")) << ',' << num(drift("A")) << ',' << num(drift("re_c")) << ',' << num(drift("im_c")) << ','
       << (ok ? 1 : 0) << '\n';
  }
  return all ? kOk : kVerificationFailed;
}

namespace detail {

inline void add_model_options(CLI::App* sub, RunConfig& c) {
  sub->add_option("--omega", c.omega, "Oscillator frequency")->check(CLI::PositiveNumber);
  sub->add_option("--alpha", c.alpha, "Barrier strength on phi = 0")->check(CLI::PositiveNumber);
  sub->add_option("--beta", c.beta, "Barrier strength on phi = pi/(2k)")->check(CLI::PositiveNumber);
  sub->add_option("--k", c.k, "Index: m/n (rational) or a decimal (irrational)");
  sub->add_option("--config", c.config, "JSON file of option values; explicit flags take precedence");
  sub->add_option("--out", c.out, "Output file (default: stdout)");
}

inline void add_state_options(CLI::App* sub, RunConfig& c) {
  sub->add_option("--state", c.state, "Initial state r,phi,p_r,p_phi (radians); overrides --seed");
  sub->add_option("--seed", c.seed, "Sampler seed when --state is absent");
  sub->add_option("--energy-lo", c.energy_lo, "Sampled energy lower bound, in units of the minimum energy");
  sub->add_option("--energy-hi", c.energy_hi, "Sampled energy upper bound, in units of the minimum energy");
  sub->add_option("--guard", c.guard, "Boundary guard (angle units)");
}

inline void add_integrator_options(CLI::App* sub, RunConfig& c) {
  sub->add_option("--scheme", c.scheme, "adaptive | midpoint")->check(CLI::IsMember({"adaptive", "midpoint"}));
  sub->add_option("--rel-tol", c.rel_tol, "Adaptive relative tolerance");
  sub->add_option("--abs-tol", c.abs_tol, "Adaptive absolute tolerance");
  sub->add_option("--dt", c.dt, "Fixed step for the midpoint scheme");
  sub->add_option("--max-steps", c.max_steps, "Step budget");
}

inline std::string json_scalar(const json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
  if (v.is_number_float()) return num(v.get<double>());
  throw ConfigurationError("config key '" + key + "': unsupported value");
}

/// Turns a JSON config object into "--key value" tokens for `sub`. Unknown keys are rejected.
inline std::vector<std::string> config_tokens(CLI::App* sub, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigurationError("config file '" + path + "': " + e.what());
  }
  if (!j.is_object()) throw ConfigurationError("config file must hold a JSON object");
  std::vector<std::string> tokens;
  for (const auto& [key, value] : j.items()) {
    const auto* opt = key == "config" || key == "help" ? nullptr : sub->get_option_no_throw("--" + key);
    if (!opt) throw ConfigurationError("config file: unknown key '" + key + "' for '" + sub->get_name() + "'");
    std::string text;
    if (value.is_array()) {
      for (std::size_t i = 0; i < value.size(); ++i) text += (i ? "," : "") + json_scalar(value[i], key);
    } else {
      text = json_scalar(value, key);
    }
    tokens.push_back("--" + key);
    tokens.push_back(text);
  }
  return tokens;
}

}  // namespace detail

/// Entry point. Returns the process exit code.
inline int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"TTW oscillator superintegrability lab"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  RunConfig c;
  using detail::add_integrator_options;
  using detail::add_model_options;
  using detail::add_state_options;

  auto* simulate = app.add_subcommand("simulate", "Integrate one orbit and write a trajectory CSV");
  add_model_options(simulate, c);
  add_state_options(simulate, c);
  add_integrator_options(simulate, c);
  simulate->add_option("--t-end", c.t_end, "Horizon (default: ten joint periods)");

  auto* invariants = app.add_subcommand("invariants", "Drift of E, A, Re C, Im C along one orbit (JSON)");
  add_model_options(invariants, c);
  add_state_options(invariants, c);
  add_integrator_options(invariants, c);
  invariants->add_option("--t-end", c.t_end, "Horizon (default: ten joint periods)");
  invariants->add_option("--drift-tol", c.drift_tol, "Largest accepted relative drift");

  auto* bracket = app.add_subcommand("bracket", "Normalized Poisson-bracket residuals at sampled states (CSV)");
  add_model_options(bracket, c);
  add_state_options(bracket, c);
  bracket->add_option("--samples", c.samples, "Number of sampled states (seeds seed .. seed+samples-1)");
  bracket->add_option("--bracket-tol", c.bracket_tol, "Largest accepted normalized residual");

  auto* closure = app.add_subcommand("closure", "Phase-space recurrence search (JSON)");
  add_model_options(closure, c);
  add_state_options(closure, c);
  add_integrator_options(closure, c);
  closure->add_option("--horizon", c.horizon, "Search horizon (default: 20 pi)");
  closure->add_option("--tol", c.closure_tol, "Return distance counted as a recurrence");
  closure->add_option("--recurrence-slack", c.recurrence_slack, "Allowed lateness past the predicted joint period");

  auto* actions = app.add_subcommand("actions", "Action variables from (E, A) with a round-trip check (JSON)");
  add_model_options(actions, c);
  add_state_options(actions, c);
  actions->add_option("--E", c.energy, "Energy (with --A; otherwise taken from the state)");
  actions->add_option("--A", c.angular, "Angular integral");
  actions->add_option("--action-tol", c.action_tol, "Largest accepted relative reconstruction error");

  auto* polyint = app.add_subcommand("polyint", "Sample the reduced integral on a momentum grid and certify its degree");
  add_model_options(polyint, c);
  polyint->add_option("--point", c.point, "Configuration point r,phi (default: r = 1, phi = 0.4 pi/(2k))");
  polyint->add_option("--spacing", c.spacing, "Momentum grid spacing");
  polyint->add_option("--nodes", c.nodes, "Nodes per momentum axis (default: degree + 2)");
  polyint->add_option("--degree-tol", c.degree_tol, "Largest accepted order-(d+1) difference over max |G|");
  polyint->add_option("--leading-tol", c.leading_tol, "Smallest order-d difference counted as degree d");

  auto* scan = app.add_subcommand("scan", "Drift table over seeds and k values, run in parallel (CSV)");
  scan->footer(std::string("Worker threads: $") + kThreadsEnv + " (default: hardware concurrency).");
  add_model_options(scan, c);
  add_integrator_options(scan, c);
  scan->add_option("--seeds", c.seeds, "Seeds per k, starting at --seed");
  scan->add_option("--seed", c.seed, "First seed");
  scan->add_option("--energy-lo", c.energy_lo, "Sampled energy lower bound, in units of the minimum energy");
  scan->add_option("--energy-hi", c.energy_hi, "Sampled energy upper bound, in units of the minimum energy");
  scan->add_option("--k-list", c.k_list, "Comma-separated k values (default: --k)");
  scan->add_option("--t-end", c.t_end, "Horizon per run (default: ten joint periods of that k)");
  scan->add_option("--drift-tol", c.drift_tol, "Largest accepted relative drift");

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    // Config values go right after the subcommand name so later explicit flags win.
    if (!args.empty()) {
      if (auto* sub = app.get_subcommand_no_throw(args.front())) {
        std::optional<std::string> path;
        for (std::size_t i = 1; i < args.size(); ++i) {
          if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
          if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
        }
        if (path) {
          const auto extra = detail::config_tokens(sub, *path);
          args.insert(args.begin() + 1, extra.begin(), extra.end());
        }
      }
    }
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  } catch (const ConfigurationError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (simulate->parsed()) return run_simulate(c, out);
    if (invariants->parsed()) return run_invariants(c, out);
    if (bracket->parsed()) return run_bracket(c, out);
    if (closure->parsed()) return run_closure(c, out);
    if (actions->parsed()) return run_actions(c, out);
    if (polyint->parsed()) return run_polyint(c, out);
    if (scan->parsed()) return run_scan(c, out);
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

}  // namespace ttw::cli

#endif  // TTW_CLI_HPP
