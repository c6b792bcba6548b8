#include "misspec/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "misspec/bounds.hpp"
#include "misspec/edisp.hpp"
#include "misspec/errors.hpp"

namespace misspec {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config table

namespace {

std::string trim(std::string s) {
  boost::algorithm::trim(s);
  return s;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  boost::algorithm::split(parts, s, boost::algorithm::is_any_of(","));
  for (auto& p : parts) p = trim(p);
  if (parts.size() == 1 && parts[0].empty()) parts.clear();
  return parts;
}

// Line numbers of `key = value` entries, keyed like the property tree.
std::map<std::string, int> key_lines(std::istream& in) {
  std::map<std::string, int> lines;
  std::string section;
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == ';' || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = trim(t.substr(0, eq));
    lines[section.empty() ? key : section + "." + key] = n;
  }
  return lines;
}

}  // namespace

ConfigTable ConfigTable::parse_string(const std::string& text, const std::string& origin) {
  ConfigTable t;
  t.origin_ = origin;
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(origin + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      t.values_[name] = trim(node.data());
    } else {
      for (const auto& [key, leaf] : node) t.values_[name + "." + key] = trim(leaf.data());
    }
  }
  std::istringstream again(text);
  t.lines_ = key_lines(again);
  return t;
}

ConfigTable ConfigTable::parse_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str(), path.string());
}

std::optional<std::string> ConfigTable::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  used_[key] = true;
  return it->second;
}

void ConfigTable::set(const std::string& key, const std::string& value) {
  values_[key] = value;
  used_.erase(key);
}

void ConfigTable::erase(const std::string& key) {
  values_.erase(key);
  used_.erase(key);
}

std::string ConfigTable::where(const std::string& key) const {
  auto it = lines_.find(key);
  return origin_ + (it != lines_.end() ? ":" + std::to_string(it->second) : std::string()) + ": " + key;
}

void ConfigTable::fail(const std::string& key, const std::string& message) const {
  throw ConfigError(where(key) + ": " + message);
}

std::string ConfigTable::text(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

std::string ConfigTable::require_text(const std::string& key) const {
  auto v = get(key);
  if (!v || v->empty()) throw ConfigError(origin_ + ": missing required field " + key);
  return *v;
}

double ConfigTable::number(const std::string& key, double fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  try {
    std::size_t pos = 0;
    const double d = std::stod(*v, &pos);
    if (pos != v->size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    fail(key, "expected a number, got '" + *v + "'");
  }
}

double ConfigTable::require_number(const std::string& key) const {
  if (!has(key)) throw ConfigError(origin_ + ": missing required field " + key);
  return number(key, 0.0);
}

long ConfigTable::integer(const std::string& key, long fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  try {
    std::size_t pos = 0;
    const long n = std::stol(*v, &pos);
    if (pos != v->size()) throw std::invalid_argument("trailing characters");
    return n;
  } catch (const std::exception&) {
    fail(key, "expected an integer, got '" + *v + "'");
  }
}

bool ConfigTable::flag(const std::string& key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  const std::string s = boost::algorithm::to_lower_copy(*v);
  if (s == "true" || s == "yes" || s == "1" || s == "on") return true;
  if (s == "false" || s == "no" || s == "0" || s == "off") return false;
  fail(key, "expected true/false, got '" + *v + "'");
}

std::vector<double> ConfigTable::numbers(const std::string& key) const {
  auto v = get(key);
  if (!v) return {};
  std::vector<double> out;
  for (const auto& p : split_list(*v)) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(p, &pos));
      if (pos != p.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      fail(key, "expected a comma-separated list of numbers, got '" + *v + "'");
    }
  }
  return out;
}

void ConfigTable::reject_unused() const {
  for (const auto& [key, value] : values_) {
    if (!used_.count(key)) fail(key, "unknown field");
  }
}

// ---------------------------------------------------------------------------
// Enum names

namespace {

template <typename E>
struct Named {
  const char* name;
  E value;
};

constexpr Named<ProblemKind> kProblems[] = {
    {"quadratic", ProblemKind::quadratic},
    {"edisp-cost", ProblemKind::edisp_cost},
    {"edisp-cost-nonsmooth", ProblemKind::edisp_cost_nonsmooth},
    {"edisp-demand-vi", ProblemKind::edisp_demand_vi},
    {"skew-vi", ProblemKind::skew_vi},
};

constexpr Named<SchemeKind> kSchemes[] = {
    {"joint-gradient", SchemeKind::joint_gradient},
    {"joint-subgradient", SchemeKind::joint_subgradient},
    {"extragradient", SchemeKind::extragradient},
    {"tikhonov", SchemeKind::tikhonov},
    {"sequential", SchemeKind::sequential},
};

template <typename E, std::size_t N>
E parse_enum(const ConfigTable& t, const std::string& key, const Named<E> (&names)[N]) {
  const std::string v = t.require_text(key);
  for (const auto& n : names) {
    if (v == n.name) return n.value;
  }
  std::string options;
  for (const auto& n : names) options += std::string(options.empty() ? "" : ", ") + n.name;
  throw ConfigError(t.where(key) + ": unknown value '" + v + "' (expected one of " + options + ")");
}

template <typename E, std::size_t N>
std::string enum_name(E value, const Named<E> (&names)[N]) {
  for (const auto& n : names) {
    if (n.value == value) return n.name;
  }
  return "?";
}

bool is_vi(ProblemKind p) { return p == ProblemKind::edisp_demand_vi || p == ProblemKind::skew_vi; }
bool is_vi(SchemeKind s) { return s == SchemeKind::extragradient || s == SchemeKind::tikhonov; }

}  // namespace

std::string to_string(ProblemKind p) { return enum_name(p, kProblems); }
std::string to_string(SchemeKind s) { return enum_name(s, kSchemes); }

// ---------------------------------------------------------------------------
// Loading

ExperimentConfig load_config(const ConfigTable& table) {
  ExperimentConfig c;
  c.table = table;
  ConfigTable& t = c.table;
  c.id = t.text("experiment.id", "");
  if (c.id.empty()) {
    c.id = fs::path(t.origin()).stem().string();
    if (c.id.empty() || c.id == "<string>") c.id = "experiment";
  }
  c.problem = parse_enum(t, "experiment.problem", kProblems);
  c.scheme = parse_enum(t, "experiment.scheme", kSchemes);
  if (is_vi(c.problem) != is_vi(c.scheme)) {
    throw ConfigError(t.where("experiment.scheme") + ": scheme " + to_string(c.scheme) +
                      (is_vi(c.scheme) ? " needs a map (edisp-demand-vi or skew-vi)"
                                       : " needs an objective (quadratic, edisp-cost or edisp-cost-nonsmooth)"));
  }
  c.K = t.integer("experiment.K", c.K);
  if (c.K < 0) throw ConfigError(t.where("experiment.K") + ": must be >= 0");
  const long seed = t.integer("experiment.seed", 1);
  if (seed < 0) throw ConfigError(t.where("experiment.seed") + ": must be >= 0");
  c.seed = static_cast<std::uint64_t>(seed);
  c.output = t.text("experiment.output", "");
  c.emit_bounds = t.flag("experiment.emit_bounds", true);
  c.override_checks = t.flag("experiment.override_steplength_checks", false);
  for (const auto& [key, value] : t.values()) {
    if (boost::algorithm::starts_with(key, "sweep.")) t.get(key);
  }
  return c;
}

ExperimentConfig load_config_file(const fs::path& path) { return load_config(ConfigTable::parse_file(path)); }

std::vector<ExperimentConfig> expand_sweep(const ConfigTable& table) {
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
  for (const auto& [key, value] : table.values()) {
    if (!boost::algorithm::starts_with(key, "sweep.")) continue;
    auto values = split_list(value);
    if (values.empty()) throw ConfigError(table.where(key) + ": empty sweep list");
    axes.emplace_back(key.substr(6), std::move(values));
  }
  ConfigTable base = table;
  for (const auto& [key, values] : axes) base.erase("sweep." + key);
  if (axes.empty()) return {load_config(base)};

  const std::string base_id = load_config(base).id;
  std::vector<ExperimentConfig> out;
  std::vector<std::size_t> idx(axes.size(), 0);
  while (true) {
    ConfigTable t = base;
    std::string id = base_id;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const auto& [key, values] = axes[a];
      t.set(key, values[idx[a]]);
      const auto dot = key.rfind('.');
      id += "_" + (dot == std::string::npos ? key : key.substr(dot + 1)) + "-" + values[idx[a]];
    }
    t.set("experiment.id", id);
    out.push_back(load_config(t));
    std::size_t a = axes.size();
    while (a > 0) {
      --a;
      if (++idx[a] < axes[a].second.size()) break;
      idx[a] = 0;
      if (a == 0) return out;
    }
  }
}

// ---------------------------------------------------------------------------
// Instances

namespace {

struct Instance {
  std::optional<MisspecifiedObjective> objective;
  std::optional<MisspecifiedMap> map;
  LearningProblem learning;
  FeasibleSet X = FeasibleSet::whole_space(0);
  Reference ref;
};

Vec vector_or(const ConfigTable& t, const std::string& key, Index dim, double fill) {
  const auto v = t.numbers(key);
  if (v.empty()) return Vec::Constant(dim, fill);
  if (v.size() == 1) return Vec::Constant(dim, v[0]);
  if (static_cast<Index>(v.size()) != dim) {
    throw ConfigError(t.where(key) + ": expected " + std::to_string(dim) + " entries, got " + std::to_string(v.size()));
  }
  return Eigen::Map<const Vec>(v.data(), dim);
}

Instance quadratic_instance(const ConfigTable& t) {
  const auto q = t.numbers("quadratic.q_diag");
  if (q.empty()) throw ConfigError(t.origin() + ": missing required field quadratic.q_diag");
  const Index n = static_cast<Index>(q.size());
  const Vec target = vector_or(t, "quadratic.theta_star", n, 1.0);
  const double coupling = t.number("quadratic.coupling", -1.0);
  const Vec lo = vector_or(t, "quadratic.box_lower", n, -10.0);
  const Vec hi = vector_or(t, "quadratic.box_upper", n, 10.0);
  const double weight = t.number("quadratic.learn_weight", 1.0);

  Instance inst;
  try {
    inst.X = FeasibleSet::box(lo, hi);
  } catch (const std::exception& e) {
    throw ConfigError(t.where("quadratic.box_lower") + ": " + e.what());
  }
  const Mat Q = Eigen::Map<const Vec>(q.data(), n).asDiagonal();
  inst.objective = make_quadratic_objective(Q, coupling * Mat::Identity(n, n), inst.X.diameter_bound());
  inst.learning = make_quadratic_learning(target, weight);
  inst.ref = reference_solve(*inst.objective, inst.X, inst.learning.truth, Vec::Zero(n));
  return inst;
}

// A = scale * J blocks on the first `dim` coordinates plus `null_dims`
// coordinates where F only sees theta; theta* = 0 so the solution set is
// {0} x [null_lower, null_upper]^null_dims and its least-norm point is known.
Instance skew_instance(const ConfigTable& t) {
  const long dim = t.integer("skew.dim", 2);
  if (dim < 2 || dim % 2 != 0) throw ConfigError(t.where("skew.dim") + ": must be a positive even number");
  const long null_dims = t.integer("skew.null_dims", 0);
  if (null_dims < 0) throw ConfigError(t.where("skew.null_dims") + ": must be >= 0");
  const double scale = t.number("skew.scale", 1.0);
  const double half = t.number("skew.box", 1.0);
  const double nlo = t.number("skew.null_lower", 0.5);
  const double nhi = t.number("skew.null_upper", 1.5);
  if (!(half > 0.0)) throw ConfigError(t.where("skew.box") + ": must be positive");
  if (!(nlo <= nhi)) throw ConfigError(t.where("skew.null_lower") + ": must not exceed skew.null_upper");
  const Index n = dim + null_dims;
  Mat A = Mat::Zero(n, n);
  for (Index i = 0; i < dim; i += 2) {
    A(i, i + 1) = scale;
    A(i + 1, i) = -scale;
  }
  Vec lo = Vec::Constant(n, -half);
  Vec hi = Vec::Constant(n, half);
  lo.tail(null_dims).setConstant(nlo);
  hi.tail(null_dims).setConstant(nhi);

  Instance inst;
  inst.X = FeasibleSet::box(lo, hi);
  inst.map = make_skew_map(A, Mat::Identity(n, n));
  inst.learning = make_quadratic_learning(Vec::Zero(n), t.number("skew.learn_weight", 1.0));
  Vec least_norm = Vec::Zero(n);
  least_norm.tail(null_dims) = inst.X.project(Vec::Zero(n)).tail(null_dims);
  inst.ref.x_star = least_norm;
  return inst;
}

std::vector<edisp::GeneratorSpec> edisp_generators(const ConfigTable& t, bool nonsmooth) {
  const long N = t.integer("edisp.generators", 5);
  if (N < 1) throw ConfigError(t.where("edisp.generators") + ": must be >= 1");
  auto gens = edisp::table_generators(static_cast<std::size_t>(N), t.number("edisp.unit_mw", 10.0));
  for (long i = 0; i < N; ++i) {
    const std::string key = "edisp.gen" + std::to_string(i);
    const auto row = t.numbers(key);
    if (row.empty()) continue;
    if (row.size() != 5) throw ConfigError(t.where(key) + ": expected capacity, ramp_up, ramp_down, a, b");
    gens[i] = {row[0], row[1], row[2], edisp::QuadraticCost{row[3], row[4]}};
  }
  if (t.has("edisp.cost_a")) {
    gens = edisp::with_quadratic_costs(std::move(gens), t.number("edisp.cost_a", 10.0), t.number("edisp.cost_a_step", 0.0),
                                       t.number("edisp.cost_b", 1.0));
  }
  if (nonsmooth) {
    const auto s = t.numbers("edisp.slopes");
    std::array<double, 3> slopes{5.0, 15.0, 30.0};
    if (!s.empty()) {
      if (s.size() != 3) throw ConfigError(t.where("edisp.slopes") + ": expected three slopes");
      std::copy(s.begin(), s.end(), slopes.begin());
    }
    gens = edisp::with_max_linear_costs(std::move(gens), slopes);
  }
  return gens;
}

Instance edisp_cost_instance(const ConfigTable& t, std::uint64_t seed, bool nonsmooth) {
  const auto gens = edisp_generators(t, nonsmooth);
  const long T = t.integer("edisp.periods", 5);
  if (T < 1) throw ConfigError(t.where("edisp.periods") + ": must be >= 1");
  const auto form = nonsmooth ? edisp::CostForm::max3linear : edisp::CostForm::quadratic;
  const Vec demand = edisp::sample_demand(gens, T, seed, t.number("edisp.demand_lo", 0.4), t.number("edisp.demand_hi", 0.8));
  const auto dispatch = edisp::make_instance(gens, T, demand);
  auto cost = edisp::build_cost_misspecified(dispatch, form, t.number("edisp.theta_margin", 0.0));
  const long P = t.integer("edisp.samples", 1000);
  if (P < 2) throw ConfigError(t.where("edisp.samples") + ": need at least 2 samples");
  const auto samples = edisp::sample_cost_data(gens, static_cast<std::size_t>(P), t.number("edisp.noise_sd", 1.0), seed + 1);

  Instance inst;
  inst.X = cost.set;
  inst.objective = std::move(cost.objective);
  inst.learning = edisp::build_cost_learning(gens, samples, form);
  if (nonsmooth) {
    inst.ref = edisp::max_linear_reference(dispatch, inst.learning.truth).ref;
  } else {
    inst.ref = reference_solve(*inst.objective, inst.X, inst.learning.truth, Vec::Zero(inst.X.dim()));
  }
  return inst;
}

Instance edisp_demand_instance(const ConfigTable& t, std::uint64_t seed) {
  auto gens = edisp_generators(t, false);
  const long T = t.integer("edisp.periods", 5);
  if (T < 1) throw ConfigError(t.where("edisp.periods") + ": must be >= 1");
  const Vec demand = edisp::sample_demand(gens, T, seed, t.number("edisp.demand_lo", 0.4), t.number("edisp.demand_hi", 0.8));
  const long S = t.integer("edisp.demand_samples", 1000);
  if (S < 1) throw ConfigError(t.where("edisp.demand_samples") + ": need at least one sample");
  const auto ys = edisp::sample_demand_observations(demand, static_cast<std::size_t>(S),
                                                    t.number("edisp.demand_noise_sd", 1.0), seed + 2);
  auto problem = edisp::build_demand_misspecified(gens, T, ys);
  Instance inst;
  inst.map = std::move(problem.map);
  inst.X = problem.Z;
  // Optional compact version of Z: g within capacity, multipliers capped.
  // The VI solution is unchanged as long as the cap exceeds every optimal multiplier.
  if (t.has("edisp.multiplier_bound")) {
    const double cap = t.number("edisp.multiplier_bound", 0.0);
    if (!(cap > 0.0)) throw ConfigError(t.where("edisp.multiplier_bound") + ": must be positive");
    Vec hi = Vec::Constant(inst.X.dim(), cap);
    for (std::size_t i = 0; i < gens.size(); ++i) hi.segment(static_cast<Index>(i) * T, T).setConstant(gens[i].capacity);
    inst.X = FeasibleSet::box(Vec::Zero(inst.X.dim()), hi);
  }
  inst.learning = std::move(problem.learning);
  return inst;
}

Instance build_instance(const ExperimentConfig& c) {
  const ConfigTable& t = c.table;
  switch (c.problem) {
    case ProblemKind::quadratic: return quadratic_instance(t);
    case ProblemKind::skew_vi: return skew_instance(t);
    case ProblemKind::edisp_cost: return edisp_cost_instance(t, c.seed, false);
    case ProblemKind::edisp_cost_nonsmooth: return edisp_cost_instance(t, c.seed, true);
    case ProblemKind::edisp_demand_vi: return edisp_demand_instance(t, c.seed);
  }
  throw ConfigError("unreachable problem kind");
}

Vec initial_point(const ConfigTable& t, const std::string& key, Index dim, const Vec* truth) {
  const auto v = t.get(key);
  if (!v || *v == "zero") return Vec::Zero(dim);
  if (*v == "truth") {
    if (!truth) throw ConfigError(t.where(key) + ": 'truth' is only available for theta0");
    return *truth;
  }
  return vector_or(t, key, dim, 0.0);
}

// ---------------------------------------------------------------------------
// Schedules

StepSchedule step_schedule(const ConfigTable& t, const std::string& section, double R, double M, long K) {
  const std::string kind = t.text(section + ".kind", "constant");
  if (kind == "constant") {
    const double g = t.require_number(section + ".gamma");
    if (!(g > 0.0)) throw ConfigError(t.where(section + ".gamma") + ": must be positive");
    return StepSchedule::constant(g);
  }
  if (kind == "harmonic") {
    const double s = t.number(section + ".scale", 1.0);
    if (!(s > 0.0)) throw ConfigError(t.where(section + ".scale") + ": must be positive");
    return StepSchedule::harmonic(s);
  }
  if (kind == "optimal-subgradient") {
    if (!(R > 0.0) || !(M > 0.0) || K < 1) {
      throw ConfigError(t.where(section + ".kind") + ": optimal-subgradient needs R = ||x0 - x*|| > 0, M > 0 and K >= 1");
    }
    return StepSchedule::optimal_subgradient(R, M, K);
  }
  throw ConfigError(t.where(section + ".kind") + ": unknown schedule '" + kind +
                    "' (expected constant, harmonic or optimal-subgradient)");
}

// ---------------------------------------------------------------------------
// Bounds

void attach_bounds(const ExperimentConfig& c, const Instance& inst, const StepSchedule& sf, const StepSchedule& sg,
                   Averaging averaging, SolveTrace& trace) {
  if (!c.emit_bounds || trace.records.empty() || !inst.objective || !inst.ref.x_star) return;
  if (!std::holds_alternative<ConstantStep>(sg.kind())) return;
  const auto& oc = inst.objective->constants;
  const auto& lc = inst.learning.constants;
  if (!(lc.eta_g > 0.0)) return;
  const double gamma_g = sg.step_at(1);
  const double x0_err = (trace.records.front().x - *inst.ref.x_star).norm();
  const double th0_err = trace.records.front().theta_err;
  double q_g = 0.0;
  try {
    q_g = contraction_factor(gamma_g, lc.eta_g, lc.G_g);
  } catch (const std::exception&) {
    return;
  }

  if (c.scheme == SchemeKind::joint_gradient && std::holds_alternative<ConstantStep>(sf.kind())) {
    const double gamma_f = sf.step_at(1);
    if (averaging == Averaging::uniform) {
      if (!inst.X.bounded() || !(q_g > 0.0 && q_g < 1.0)) return;
      for (auto& r : trace.records) {
        if (r.k >= 1) {
          r.bound = averaging_bound(r.k, gamma_f, x0_err, th0_err, inst.X.diameter_bound(), oc.G_ftheta, oc.L_ftheta, q_g);
        }
      }
    } else if (averaging == Averaging::none && oc.eta_f > 0.0 && gamma_f * oc.G_fx < 2.0) {
      const StronglyConvexParams p{gamma_f, oc.eta_f, oc.G_fx, gamma_g, lc.eta_g, lc.G_g, oc.L_theta};
      for (auto& r : trace.records) r.bound = r.k == 0 ? x0_err : strongly_convex_bound(r.k - 1, p, x0_err, th0_err);
    }
  } else if (c.scheme == SchemeKind::joint_subgradient && std::holds_alternative<OptimalSubgradientStep>(sf.kind())) {
    if (!(q_g > 0.0 && q_g < 1.0) || c.K < 1) return;
    trace.records.back().bound = subgradient_bound(c.K, oc.M_subgrad, x0_err, th0_err, oc.L_ftheta, q_g);
  }
}

Averaging averaging_mode(const ConfigTable& t, Averaging fallback) {
  const auto v = t.get("experiment.averaging");
  if (!v) return fallback;
  if (*v == "none") return Averaging::none;
  if (*v == "uniform") return Averaging::uniform;
  if (*v == "weighted") return Averaging::weighted;
  throw ConfigError(t.where("experiment.averaging") + ": expected none, uniform or weighted");
}

SolveTrace run_scheme(const ExperimentConfig& c, Instance& inst) {
  const ConfigTable& t = c.table;
  SolverOptions opts;
  opts.override_checks = c.override_checks;
  const long K = c.K;
  const Vec theta0 =
      initial_point(t, "experiment.theta0", inst.learning.truth.size(), &inst.learning.truth);
  const Vec x0 = inst.X.project(initial_point(t, "experiment.x0", inst.X.dim(), nullptr));

  if (inst.objective) {
    const auto& obj = *inst.objective;
    double R = 0.0;
    if (inst.ref.x_star) R = (x0 - *inst.ref.x_star).norm();
    const StepSchedule sf = step_schedule(t, "schedule", R, obj.constants.M_subgrad, K);
    const StepSchedule sg = step_schedule(t, "learning", 0.0, 0.0, K);
    const Averaging averaging =
        averaging_mode(t, c.scheme == SchemeKind::joint_subgradient ? Averaging::weighted : Averaging::none);
    long learn_steps = 0;
    if (c.scheme == SchemeKind::sequential) {
      learn_steps = t.integer("sequential.learn_steps", K / 2);
      if (learn_steps < 0 || learn_steps > K) {
        throw ConfigError(t.where("sequential.learn_steps") + ": must lie in [0, K]");
      }
    }
    t.reject_unused();
    SolveTrace trace;
    switch (c.scheme) {
      case SchemeKind::joint_gradient:
        trace = joint_gradient(obj, inst.learning, inst.X, x0, theta0, sf, sg, K, averaging, inst.ref, opts);
        break;
      case SchemeKind::joint_subgradient:
        trace = joint_subgradient(obj, inst.learning, inst.X, x0, theta0, sf, sg, K, inst.ref, opts, averaging);
        break;
      case SchemeKind::sequential: {
        trace = sequential_baseline(obj, inst.learning, inst.X, x0, theta0, learn_steps, K - learn_steps, sf, sg,
                                    inst.ref, opts);
        break;
      }
      default: throw ConfigError("scheme does not apply to an objective");
    }
    attach_bounds(c, inst, sf, sg, averaging, trace);
    return trace;
  }

  const auto& map = *inst.map;
  const double gamma_g = t.require_number("learning.gamma");
  if (c.scheme == SchemeKind::extragradient) {
    double tau = 0.0;
    if (t.has("extragradient.tau")) {
      tau = t.number("extragradient.tau", 0.0);
    } else {
      tau = kExtragradientStepFraction *
            extragradient_step_bound(map.constants.L_Fx, map.constants.L_Ftheta, inst.learning.dist(theta0));
    }
    t.reject_unused();
    return extragradient(map, inst.learning, inst.X, x0, theta0, tau, gamma_g, K, inst.ref, opts);
  }
  const double L = t.number("schedule.lipschitz", map.constants.L_Fx);
  std::optional<TikhonovSchedule> sched;
  try {
    sched.emplace(L, t.number("schedule.alpha", 0.65), t.number("schedule.beta", 0.34));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(t.where("schedule.alpha") + ": " + e.what());
  }
  t.reject_unused();
  return tikhonov(map, inst.learning, inst.X, x0, theta0, *sched, gamma_g, K, inst.ref, opts);
}

void fill_summary(RunSummary& s, const SolveTrace& trace) {
  if (trace.records.empty()) return;
  const TraceRecord& r = trace.final();
  s.iterations = r.k;
  s.theta_err = r.theta_err;
  s.x_err = r.x_err;
  s.f_gap = r.f_gap;
  s.avg_gap = r.avg_gap;
  s.vi_gap = r.vi_gap;
  s.bound = r.bound;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  RunResult result;
  RunSummary& s = result.summary;
  s.id = config.id;
  s.problem = to_string(config.problem);
  s.scheme = to_string(config.scheme);
  s.K = config.K;
  try {
    Instance inst = build_instance(config);
    result.trace = run_scheme(config, inst);
    s.ok = true;
  } catch (const DivergenceError& e) {
    result.trace = e.partial();
    s.error = e.what();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    s.error = e.what();
  }
  fill_summary(s, result.trace);
  if (!config.output.empty() && !result.trace.records.empty()) {
    write_trace_csv(result.trace, config.output);
    s.trace_path = config.output;
  }
  s.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::vector<RunSummary> run_sweep(const std::vector<ExperimentConfig>& configs, int parallelism) {
  std::vector<RunSummary> out(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        out[i] = run_experiment(configs[i]).summary;
      } catch (const std::exception& e) {
        out[i].id = configs[i].id;
        out[i].problem = to_string(configs[i].problem);
        out[i].scheme = to_string(configs[i].scheme);
        out[i].K = configs[i].K;
        out[i].error = e.what();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(parallelism, static_cast<int>(configs.size())));
  std::vector<std::thread> pool;
  for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

std::string num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + "\"";
}

constexpr const char* kTraceHeader = "k,theta_err,x_err,f_gap,vi_gap,bound,gamma_f,gamma_g,epsilon,avg_gap";

std::optional<double> parse_field(const std::string& s, long line) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("trace csv line " + std::to_string(line) + ": bad number '" + s + "'");
  }
}

}  // namespace

void write_trace_csv(const SolveTrace& trace, std::ostream& out) {
  out << kTraceHeader << '\n';
  for (const auto& r : trace.records) {
    out << r.k << ',' << num(r.theta_err) << ',' << num(r.x_err) << ',' << num(r.f_gap) << ',' << num(r.vi_gap) << ','
        << num(r.bound) << ',' << num(r.gamma_f) << ',' << num(r.gamma_g) << ',' << num(r.epsilon) << ','
        << num(r.avg_gap) << '\n';
  }
}

void write_trace_csv(const SolveTrace& trace, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_trace_csv(trace, out);
}

std::vector<CsvRow> read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != kTraceHeader) throw std::runtime_error("trace csv: unexpected header");
  std::vector<CsvRow> rows;
  for (long n = 2; std::getline(in, line); ++n) {
    if (trim(line).empty()) continue;
    std::vector<std::string> f;
    boost::algorithm::split(f, line, boost::algorithm::is_any_of(","));
    if (f.size() != 10) throw std::runtime_error("trace csv line " + std::to_string(n) + ": expected 10 fields");
    CsvRow r;
    r.k = static_cast<long>(parse_field(f[0], n).value_or(0));
    r.theta_err = parse_field(f[1], n).value_or(0.0);
    r.x_err = parse_field(f[2], n);
    r.f_gap = parse_field(f[3], n);
    r.vi_gap = parse_field(f[4], n);
    r.bound = parse_field(f[5], n);
    r.gamma_f = parse_field(f[6], n).value_or(0.0);
    r.gamma_g = parse_field(f[7], n).value_or(0.0);
    r.epsilon = parse_field(f[8], n);
    r.avg_gap = parse_field(f[9], n);
    rows.push_back(r);
  }
  return rows;
}

std::vector<CsvRow> read_trace_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read_trace_csv(in);
}

void write_summary_csv(const std::vector<RunSummary>& rows, std::ostream& out) {
  out << "id,problem,scheme,K,iterations,status,theta_err,x_err,f_gap,avg_gap,vi_gap,bound,error\n";
  for (const auto& s : rows) {
    out << csv_quote(s.id) << ',' << s.problem << ',' << s.scheme << ',' << s.K << ',' << s.iterations << ','
        << (s.ok ? "ok" : "failed") << ',' << num(s.theta_err) << ',' << num(s.x_err) << ',' << num(s.f_gap) << ','
        << num(s.avg_gap) << ',' << num(s.vi_gap) << ',' << num(s.bound) << ',' << csv_quote(s.error) << '\n';
  }
}

std::string summary_line(const RunSummary& s) {
  auto field = [](const char* name, const std::optional<double>& v) {
    if (!v) return std::string();
    char buf[64];
    std::snprintf(buf, sizeof buf, " %s=%.6e", name, *v);
    return std::string(buf);
  };
  char wall[32];
  std::snprintf(wall, sizeof wall, "%.3f", s.wall_seconds);
  std::string line = "id=" + s.id + " problem=" + s.problem + " scheme=" + s.scheme + " K=" + std::to_string(s.K) +
                     " iterations=" + std::to_string(s.iterations) + " status=" + (s.ok ? "ok" : "failed");
  line += field("theta_err", s.theta_err) + field("x_err", s.x_err) + field("f_gap", s.f_gap) +
          field("avg_gap", s.avg_gap) + field("vi_gap", s.vi_gap) + field("bound", s.bound);
  line += " wall_s=" + std::string(wall);
  if (!s.error.empty()) line += " error=\"" + s.error + "\"";
  return line;
}

}  // namespace misspec
