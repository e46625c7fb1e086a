#include "nadd/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "format.hpp"
#include "nadd/theory.hpp"

namespace nadd {

namespace {

constexpr double kInfinity = std::numeric_limits<double>::infinity();

[[noreturn]] void fail(const YAML::Node& node, const std::string& path, const std::string& msg) {
  const auto mark = node.Mark();
  throw ConfigParseError(path + ": " + msg, mark.line + 1, mark.column + 1);
}

std::string scalar(const YAML::Node& node, const std::string& path) {
  if (!node.IsScalar()) fail(node, path, "expected a scalar");
  return node.Scalar();
}

double to_double(const YAML::Node& node, const std::string& path) {
  const std::string s = scalar(node, path);
  if (s == "inf" || s == ".inf" || s == "+inf" || s == "+.inf") return kInfinity;
  if (s == "-inf" || s == "-.inf") return -kInfinity;
  double v = 0.0;
  const char* first = s.data() + (!s.empty() && s[0] == '+' ? 1 : 0);
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) fail(node, path, "expected a number, got '" + s + "'");
  return v;
}

template <class Int>
Int to_int(const YAML::Node& node, const std::string& path) {
  const std::string s = scalar(node, path);
  Int v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) fail(node, path, "expected an integer, got '" + s + "'");
  return v;
}

bool to_bool(const YAML::Node& node, const std::string& path) {
  const std::string s = scalar(node, path);
  if (s == "true") return true;
  if (s == "false") return false;
  fail(node, path, "expected true or false");
}

std::vector<double> to_doubles(const YAML::Node& node, const std::string& path) {
  if (!node.IsSequence()) fail(node, path, "expected a list of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < node.size(); ++i) out.push_back(to_double(node[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<int> to_ints(const YAML::Node& node, const std::string& path) {
  if (!node.IsSequence()) fail(node, path, "expected a list of integers");
  std::vector<int> out;
  for (std::size_t i = 0; i < node.size(); ++i) out.push_back(to_int<int>(node[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

template <class E>
E to_enum(const YAML::Node& node, const std::string& path, std::initializer_list<std::pair<const char*, E>> names) {
  const std::string s = scalar(node, path);
  std::string allowed;
  for (const auto& [name, value] : names) {
    if (s == name) return value;
    allowed += allowed.empty() ? name : std::string("|") + name;
  }
  fail(node, path, "expected one of " + allowed + ", got '" + s + "'");
}

// Walks a mapping, handing each known key to its reader and rejecting the rest.
class Section {
 public:
  Section(const YAML::Node& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.IsMap()) fail(node_, path_.empty() ? "<root>" : path_, "expected a mapping");
    for (const auto& kv : node_) keys_.insert(kv.first.as<std::string>());
  }

  template <class F>
  void read(const std::string& key, F&& reader) {
    if (!keys_.erase(key)) return;
    reader(node_[key], child(key));
  }

  void finish() const {
    if (keys_.empty()) return;
    const std::string key = *keys_.begin();
    for (const auto& kv : node_) {
      if (kv.first.as<std::string>() == key) fail(kv.first, child(key), "unknown key");
    }
  }

  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  YAML::Node node_;
  std::string path_;
  std::set<std::string> keys_;
};

ComponentSpec read_component(const YAML::Node& node, const std::string& path) {
  ComponentSpec c;
  Section s(node, path);
  s.read("weight", [&](const auto& n, auto p) { c.weight = to_double(n, p); });
  s.read("mean", [&](const auto& n, auto p) { c.mean = to_doubles(n, p); });
  s.read("variance", [&](const auto& n, auto p) { c.variance = to_doubles(n, p); });
  s.read("label", [&](const auto& n, auto p) { c.label = to_int<int>(n, p); });
  s.finish();
  return c;
}

std::vector<ComponentSpec> read_components(const YAML::Node& node, const std::string& path) {
  if (!node.IsSequence()) fail(node, path, "expected a list of components");
  std::vector<ComponentSpec> out;
  for (std::size_t i = 0; i < node.size(); ++i) out.push_back(read_component(node[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

void read_nadd(const YAML::Node& node, const std::string& path, NaddConfig& n) {
  Section s(node, path);
  s.read("sigma_t_prime", [&](const auto& v, auto p) { n.t_prime = to_double(v, p); });
  s.read("sigma_t_stop", [&](const auto& v, auto p) { n.t_stop = to_double(v, p); });
  s.read("beta", [&](const auto& v, auto p) { n.beta = to_double(v, p); });
  s.read("kappa_min", [&](const auto& v, auto p) { n.kappa_min = to_double(v, p); });
  s.read("kappa_max", [&](const auto& v, auto p) { n.kappa_max = to_double(v, p); });
  s.read("kappa_scale_by_dim", [&](const auto& v, auto p) { n.kappa_scale_by_dim = to_bool(v, p); });
  s.read("s_churn", [&](const auto& v, auto p) { n.s_churn = to_double(v, p); });
  s.read("s_min", [&](const auto& v, auto p) { n.s_min = to_double(v, p); });
  s.read("s_max", [&](const auto& v, auto p) {
    n.s_max = to_double(v, p);
    if (n.s_max == kInfinity) n.s_max = std::numeric_limits<double>::max();
  });
  s.read("s_noise", [&](const auto& v, auto p) { n.s_noise = to_double(v, p); });
  s.read("constant_weight", [&](const auto& v, auto p) { n.constant_weight = to_double(v, p); });
  s.read("churn_step", [&](const auto& v, auto p) {
    n.churn_step = to_enum<ChurnStep>(v, p, {{"karras", ChurnStep::karras}, {"literal", ChurnStep::literal}});
  });
  s.finish();
}

void read_attack(const YAML::Node& node, const std::string& path, AttackConfig& a) {
  Section s(node, path);
  s.read("norm", [&](const auto& v, auto p) { a.norm = to_enum<AttackNorm>(v, p, {{"linf", AttackNorm::linf}, {"l2", AttackNorm::l2}}); });
  s.read("budget", [&](const auto& v, auto p) { a.budget = to_double(v, p); });
  s.read("step_size", [&](const auto& v, auto p) { a.step_size = to_double(v, p); });
  s.read("iterations", [&](const auto& v, auto p) { a.iterations = to_int<int>(v, p); });
  s.read("eot_samples", [&](const auto& v, auto p) { a.eot_samples = to_int<int>(v, p); });
  s.read("target", [&](const auto& v, auto p) {
    a.target = to_enum<AttackTarget>(v, p, {{"classifier_only", AttackTarget::classifier_only},
                                            {"full_pipeline", AttackTarget::full_pipeline}});
  });
  s.read("attack_gradient", [&](const auto& v, auto p) {
    a.gradient = to_enum<AttackGradient>(v, p, {{"bpda", AttackGradient::bpda}, {"full", AttackGradient::full}});
  });
  s.read("clamp", [&](const auto& v, auto p) {
    const auto box = to_doubles(v, p);
    if (box.size() != 2) fail(v, p, "expected [lower, upper]");
    a.clamp = std::make_pair(box[0], box[1]);
  });
  s.finish();
}

ExperimentConfig from_yaml(const YAML::Node& root) {
  ExperimentConfig c;
  Section s(root, "");
  s.read("experiment", [&](const auto& v, auto p) { c.experiment = scalar(v, p); });
  s.read("seed", [&](const auto& v, auto p) { c.seed = to_int<std::uint64_t>(v, p); });
  s.read("trials", [&](const auto& v, auto p) { c.trials = to_int<int>(v, p); });
  s.read("output_dir", [&](const auto& v, auto p) { c.output_dir = scalar(v, p); });
  s.read("solver", [&](const auto& v, auto p) {
    c.solver = to_enum<SolverMethod>(v, p, {{"euler", SolverMethod::euler}, {"heun", SolverMethod::heun}});
  });
  s.read("denoiser", [&](const auto& v, auto p) {
    c.denoiser = to_enum<DenoiserKind>(v, p, {{"exact", DenoiserKind::exact}, {"learned", DenoiserKind::learned}});
  });
  s.read("mixture", [&](const auto& v, auto p) { c.mixture = read_components(v, p); });
  s.read("grid", [&](const auto& v, auto p) {
    Section g(v, p);
    g.read("n_steps", [&](const auto& w, auto q) { c.grid.n_steps = to_int<int>(w, q); });
    g.read("t_min", [&](const auto& w, auto q) { c.grid.t_min = to_double(w, q); });
    g.read("t_max", [&](const auto& w, auto q) { c.grid.t_max = to_double(w, q); });
    g.read("rho", [&](const auto& w, auto q) { c.grid.rho = to_double(w, q); });
    g.finish();
  });
  s.read("nadd", [&](const auto& v, auto p) { read_nadd(v, p, c.nadd); });
  s.read("attack", [&](const auto& v, auto p) { read_attack(v, p, c.attack); });
  s.read("classifier", [&](const auto& v, auto p) {
    Section k(v, p);
    k.read("temperature", [&](const auto& w, auto q) { c.classifier.temperature = to_double(w, q); });
    k.read("surrogate", [&](const auto& w, auto q) { c.classifier.surrogate = read_components(w, q); });
    k.finish();
  });
  s.read("sweep", [&](const auto& v, auto p) { c.sweep = to_doubles(v, p); });
  s.read("theorem", [&](const auto& v, auto p) {
    Section t(v, p);
    t.read("delta_star", [&](const auto& w, auto q) { c.theorem.delta_star = to_double(w, q); });
    t.read("kappa_max", [&](const auto& w, auto q) { c.theorem.kappa_max = to_double(w, q); });
    t.read("kappa_min", [&](const auto& w, auto q) { c.theorem.kappa_min = to_double(w, q); });
    t.read("probe", [&](const auto& w, auto q) { c.theorem.probe = to_doubles(w, q); });
    t.read("meta_trials", [&](const auto& w, auto q) { c.theorem.meta_trials = to_int<int>(w, q); });
    t.read("lower_weight", [&](const auto& w, auto q) { c.theorem.lower_weight = to_double(w, q); });
    t.finish();
  });
  s.read("training", [&](const auto& v, auto p) {
    Section t(v, p);
    t.read("hidden", [&](const auto& w, auto q) { c.training.hidden = to_ints(w, q); });
    t.read("steps", [&](const auto& w, auto q) { c.training.steps = to_int<int>(w, q); });
    t.read("learning_rate", [&](const auto& w, auto q) { c.training.learning_rate = to_double(w, q); });
    t.read("batch_size", [&](const auto& w, auto q) { c.training.batch_size = to_int<int>(w, q); });
    t.read("sigma_data", [&](const auto& w, auto q) { c.training.sigma_data = to_double(w, q); });
    t.read("probe_points", [&](const auto& w, auto q) { c.training.probe_points = to_int<int>(w, q); });
    t.read("probe_extent", [&](const auto& w, auto q) { c.training.probe_extent = to_double(w, q); });
    t.read("max_gap", [&](const auto& w, auto q) { c.training.max_gap = to_double(w, q); });
    t.finish();
  });
  s.read("fig1", [&](const auto& v, auto p) {
    Section f(v, p);
    f.read("saved_trajectories", [&](const auto& w, auto q) { c.fig1.saved_trajectories = to_int<int>(w, q); });
    f.read("flip_ceiling", [&](const auto& w, auto q) { c.fig1.flip_ceiling = to_double(w, q); });
    f.read("flip_floor", [&](const auto& w, auto q) { c.fig1.flip_floor = to_double(w, q); });
    f.finish();
  });
  s.finish();
  if (c.output_dir.empty()) c.output_dir = "runs/" + c.experiment;
  return c;
}

std::string list(const std::vector<double>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_double(v[i]);
  return out + "]";
}

std::string list(const std::vector<int>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + std::to_string(v[i]);
  return out + "]";
}

std::string quoted(const std::string& s) {
  YAML::Emitter e;
  e << YAML::DoubleQuoted << s;
  return e.c_str();
}

void write_components(std::ostream& os, const std::vector<ComponentSpec>& comps, const std::string& indent) {
  for (const auto& c : comps) {
    os << indent << "- {weight: " << format_double(c.weight) << ", mean: " << list(c.mean)
       << ", variance: " << list(c.variance) << ", label: " << c.label << "}\n";
  }
}

const char* name(SolverMethod m) { return m == SolverMethod::euler ? "euler" : "heun"; }

}  // namespace

bool operator==(const ComponentSpec& a, const ComponentSpec& b) {
  return a.weight == b.weight && a.mean == b.mean && a.variance == b.variance && a.label == b.label;
}

bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
  const auto& n = nadd;
  const auto& m = o.nadd;
  const bool nadd_eq = n.t_prime == m.t_prime && n.t_stop == m.t_stop && n.beta == m.beta &&
                       n.kappa_min == m.kappa_min && n.kappa_max == m.kappa_max && n.s_churn == m.s_churn &&
                       n.s_min == m.s_min && n.s_max == m.s_max && n.s_noise == m.s_noise &&
                       n.kappa_scale_by_dim == m.kappa_scale_by_dim && n.constant_weight == m.constant_weight &&
                       n.churn_step == m.churn_step;
  const auto& a = attack;
  const auto& b = o.attack;
  const bool attack_eq = a.norm == b.norm && a.budget == b.budget && a.step_size == b.step_size &&
                         a.iterations == b.iterations && a.eot_samples == b.eot_samples && a.target == b.target &&
                         a.gradient == b.gradient && a.clamp == b.clamp;
  const auto& t = theorem;
  const auto& u = o.theorem;
  const bool theorem_eq = t.delta_star == u.delta_star && t.kappa_max == u.kappa_max && t.kappa_min == u.kappa_min &&
                          t.probe == u.probe && t.meta_trials == u.meta_trials && t.lower_weight == u.lower_weight;
  const auto& r = training;
  const auto& q = o.training;
  const bool training_eq = r.hidden == q.hidden && r.steps == q.steps && r.learning_rate == q.learning_rate &&
                           r.batch_size == q.batch_size && r.sigma_data == q.sigma_data &&
                           r.probe_points == q.probe_points && r.probe_extent == q.probe_extent &&
                           r.max_gap == q.max_gap;
  return experiment == o.experiment && seed == o.seed && trials == o.trials && output_dir == o.output_dir &&
         solver == o.solver && denoiser == o.denoiser && mixture == o.mixture && grid.n_steps == o.grid.n_steps &&
         grid.t_min == o.grid.t_min && grid.t_max == o.grid.t_max && grid.rho == o.grid.rho && nadd_eq &&
         attack_eq && classifier.temperature == o.classifier.temperature &&
         classifier.surrogate == o.classifier.surrogate && sweep == o.sweep && theorem_eq && training_eq &&
         fig1.saved_trajectories == o.fig1.saved_trajectories && fig1.flip_ceiling == o.fig1.flip_ceiling &&
         fig1.flip_floor == o.fig1.flip_floor;
}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{
      "purify-demo",    "robustness-sweep", "theorem-verify", "ablation-tprime", "ablation-tstop",
      "ablation-churn", "ablation-ring",    "train-denoiser", "fig1-bimodal"};
  return names;
}

ExperimentConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigParseError(e.msg, e.mark.line + 1, e.mark.column + 1);
  }
  if (!root.IsDefined() || root.IsNull()) throw ConfigParseError("empty configuration", 1, 1);
  return from_yaml(root);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "experiment: " << c.experiment << "\n";
  os << "seed: " << c.seed << "\n";
  os << "trials: " << c.trials << "\n";
  os << "output_dir: " << quoted(c.output_dir) << "\n";
  os << "solver: " << name(c.solver) << "\n";
  os << "denoiser: " << (c.denoiser == DenoiserKind::exact ? "exact" : "learned") << "\n";
  os << "mixture:\n";
  write_components(os, c.mixture, "  ");
  os << "grid:\n";
  os << "  n_steps: " << c.grid.n_steps << "\n";
  os << "  t_min: " << format_double(c.grid.t_min) << "\n";
  os << "  t_max: " << format_double(c.grid.t_max) << "\n";
  os << "  rho: " << format_double(c.grid.rho) << "\n";
  const auto& n = c.nadd;
  os << "nadd:\n";
  os << "  sigma_t_prime: " << format_double(n.t_prime) << "\n";
  os << "  sigma_t_stop: " << format_double(n.t_stop) << "\n";
  os << "  beta: " << format_double(n.beta) << "\n";
  os << "  kappa_min: " << format_double(n.kappa_min) << "\n";
  os << "  kappa_max: " << format_double(n.kappa_max) << "\n";
  os << "  kappa_scale_by_dim: " << (n.kappa_scale_by_dim ? "true" : "false") << "\n";
  os << "  s_churn: " << format_double(n.s_churn) << "\n";
  os << "  s_min: " << format_double(n.s_min) << "\n";
  os << "  s_max: " << (n.s_max == std::numeric_limits<double>::max() ? "inf" : format_double(n.s_max)) << "\n";
  os << "  s_noise: " << format_double(n.s_noise) << "\n";
  if (n.constant_weight) os << "  constant_weight: " << format_double(*n.constant_weight) << "\n";
  os << "  churn_step: " << (n.churn_step == ChurnStep::karras ? "karras" : "literal") << "\n";
  const auto& a = c.attack;
  os << "attack:\n";
  os << "  norm: " << (a.norm == AttackNorm::linf ? "linf" : "l2") << "\n";
  os << "  budget: " << format_double(a.budget) << "\n";
  os << "  step_size: " << format_double(a.step_size) << "\n";
  os << "  iterations: " << a.iterations << "\n";
  os << "  eot_samples: " << a.eot_samples << "\n";
  os << "  target: " << (a.target == AttackTarget::full_pipeline ? "full_pipeline" : "classifier_only") << "\n";
  os << "  attack_gradient: " << (a.gradient == AttackGradient::bpda ? "bpda" : "full") << "\n";
  if (a.clamp) os << "  clamp: " << list(std::vector<double>{a.clamp->first, a.clamp->second}) << "\n";
  os << "classifier:\n";
  os << "  temperature: " << format_double(c.classifier.temperature) << "\n";
  if (c.classifier.surrogate.empty()) {
    os << "  surrogate: []\n";
  } else {
    os << "  surrogate:\n";
    write_components(os, c.classifier.surrogate, "    ");
  }
  os << "sweep: " << list(c.sweep) << "\n";
  const auto& t = c.theorem;
  os << "theorem:\n";
  os << "  delta_star: " << format_double(t.delta_star) << "\n";
  os << "  kappa_max: " << format_double(t.kappa_max) << "\n";
  os << "  kappa_min: " << format_double(t.kappa_min) << "\n";
  os << "  probe: " << list(t.probe) << "\n";
  os << "  meta_trials: " << t.meta_trials << "\n";
  os << "  lower_weight: " << format_double(t.lower_weight) << "\n";
  const auto& r = c.training;
  os << "training:\n";
  os << "  hidden: " << list(r.hidden) << "\n";
  os << "  steps: " << r.steps << "\n";
  os << "  learning_rate: " << format_double(r.learning_rate) << "\n";
  os << "  batch_size: " << r.batch_size << "\n";
  os << "  sigma_data: " << format_double(r.sigma_data) << "\n";
  os << "  probe_points: " << r.probe_points << "\n";
  os << "  probe_extent: " << format_double(r.probe_extent) << "\n";
  os << "  max_gap: " << format_double(r.max_gap) << "\n";
  os << "fig1:\n";
  os << "  saved_trajectories: " << c.fig1.saved_trajectories << "\n";
  os << "  flip_ceiling: " << format_double(c.fig1.flip_ceiling) << "\n";
  os << "  flip_floor: " << format_double(c.fig1.flip_floor) << "\n";
  return os.str();
}

std::vector<std::string> validate_config(const ExperimentConfig& c) {
  std::vector<std::string> out;
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), c.experiment) == names.end()) {
    out.push_back("experiment: unknown experiment '" + c.experiment + "' (see list-experiments)");
  }
  if (c.trials < 1) out.push_back("trials: must be >= 1");
  if (c.output_dir.empty()) out.push_back("output_dir: must not be empty");

  // Mixture: shape, weights, labels.
  if (c.mixture.empty()) out.push_back("mixture: needs at least one component");
  const std::size_t dim = c.mixture.empty() ? 0 : c.mixture.front().mean.size();
  double total = 0.0;
  auto check_components = [&](const std::vector<ComponentSpec>& comps, const std::string& path, bool positive) {
    for (std::size_t i = 0; i < comps.size(); ++i) {
      const auto& m = comps[i];
      const std::string p = path + "[" + std::to_string(i) + "]";
      if (!(m.weight > 0.0)) out.push_back(p + ".weight: must be > 0");
      if (m.mean.size() != dim || dim == 0) out.push_back(p + ".mean: dimension must match the first data component");
      if (m.variance.size() != m.mean.size()) out.push_back(p + ".variance: needs one entry per mean coordinate");
      for (double v : m.variance) {
        if (positive ? !(v > 0.0) : !(v >= 0.0)) {
          out.push_back(p + ".variance: entries must be " + (positive ? "> 0" : ">= 0"));
          break;
        }
      }
      if (m.label < 0) out.push_back(p + ".label: must be >= 0");
    }
  };
  check_components(c.mixture, "mixture", false);
  for (const auto& m : c.mixture) total += m.weight;
  if (!c.mixture.empty() && std::abs(total - 1.0) > 1e-9) out.push_back("mixture: weights must sum to 1");
  check_components(c.classifier.surrogate, "classifier.surrogate", true);
  if (!c.classifier.surrogate.empty()) {
    double s = 0.0;
    for (const auto& m : c.classifier.surrogate) s += m.weight;
    if (std::abs(s - 1.0) > 1e-9) out.push_back("classifier.surrogate: weights must sum to 1");
  }
  if (!(c.classifier.temperature > 0.0)) out.push_back("classifier.temperature: must be > 0");

  // Grid and the purification knobs that depend on it.
  std::optional<TimeGrid> grid;
  try {
    grid = build_grid(c.grid);
  } catch (const std::invalid_argument& e) {
    out.push_back(std::string("grid: ") + e.what());
  }
  for (auto& v : c.nadd.violations(grid ? &*grid : nullptr)) out.push_back(std::move(v));
  for (auto& v : c.attack.violations()) out.push_back(std::move(v));

  const std::string& e = c.experiment;
  auto sweep_has = [&](double v) { return std::find(c.sweep.begin(), c.sweep.end(), v) != c.sweep.end(); };
  if (e.rfind("ablation-", 0) == 0 || e == "robustness-sweep") {
    if (c.sweep.empty()) out.push_back("sweep: needs at least one value for " + e);
  }
  if (e == "ablation-tprime") {
    if (c.sweep.size() < 3) out.push_back("sweep: an interior maximum needs at least 3 values");
    for (double v : c.sweep) {
      if (!(v > c.nadd.t_stop)) out.push_back("sweep: every sigma_t_prime must exceed nadd.sigma_t_stop");
      if (grid && (v < grid->t_min() || v > grid->t_max())) out.push_back("sweep: sigma_t_prime outside the grid");
    }
  }
  if (e == "ablation-tstop") {
    if (!sweep_has(0.0)) out.push_back("sweep: must contain 0 (the uncut correction)");
    if (!sweep_has(c.nadd.t_stop)) out.push_back("sweep: must contain nadd.sigma_t_stop (the tuned cutoff)");
    for (double v : c.sweep) {
      if (!(v >= 0.0 && v < c.nadd.t_prime)) out.push_back("sweep: every sigma_t_stop must lie in [0, sigma_t_prime)");
    }
  }
  if (e == "ablation-churn") {
    if (!sweep_has(0.0)) out.push_back("sweep: must contain 0 (no churn)");
    if (!(c.nadd.s_churn > 0.0) || !sweep_has(c.nadd.s_churn)) {
      out.push_back("sweep: must contain nadd.s_churn, which must be > 0");
    }
    for (double v : c.sweep) {
      if (!(v >= 0.0)) out.push_back("sweep: s_churn values must be >= 0");
    }
  }
  if (e == "ablation-ring") {
    for (double v : c.sweep) {
      if (!(v > 0.0)) out.push_back("sweep: kappa_max values must be > 0");
    }
  }
  if (e == "robustness-sweep") {
    if (!sweep_has(c.attack.budget)) out.push_back("sweep: must contain attack.budget (the asserted setting)");
    for (double v : c.sweep) {
      if (!(v > 0.0)) out.push_back("sweep: attack budgets must be > 0");
    }
  }
  if (e == "theorem-verify") {
    TheoremParams p;
    p.delta_star = c.theorem.delta_star;
    p.kappa_max = c.theorem.kappa_max;
    p.kappa_min = c.theorem.kappa_min;
    if (grid) p = TheoremParams::from_grid(*grid, p.delta_star, p.kappa_max, p.kappa_min);
    for (auto& v : p.violations()) out.push_back(std::move(v));
    if (c.theorem.probe.size() != dim) out.push_back("theorem.probe: dimension must match the mixture");
    if (c.trials < 100) out.push_back("trials: theorem checks need at least 100");
    if (c.theorem.meta_trials < 1) out.push_back("theorem.meta_trials: must be >= 1");
    if (!(c.theorem.lower_weight >= 0.0 && c.theorem.lower_weight <= 1.0)) {
      out.push_back("theorem.lower_weight: must lie in [0, 1]");
    }
    if (c.denoiser != DenoiserKind::exact) out.push_back("denoiser: theorem checks require the exact denoiser");
    if (c.theorem.kappa_min >= kappa_min_threshold(std::max(c.grid.n_steps, 1))) {
      out.push_back("theorem.kappa_min: must lie below 1/(2 sqrt(2 pi) N)");
    }
  }
  if (e == "fig1-bimodal" && dim != 1) out.push_back("mixture: fig1-bimodal expects 1-D data");
  if (e == "fig1-bimodal" && c.mixture.size() < 2) out.push_back("mixture: fig1-bimodal needs two modes");
  if (e == "train-denoiser" && dim != 1) out.push_back("mixture: train-denoiser probes a 1-D mixture");

  const auto& t = c.training;
  if (e == "train-denoiser" || c.denoiser == DenoiserKind::learned) {
    if (t.hidden.empty()) out.push_back("training.hidden: needs at least one hidden layer");
    for (int w : t.hidden) {
      if (w < 1) out.push_back("training.hidden: widths must be >= 1");
    }
    if (t.steps < 1) out.push_back("training.steps: must be >= 1");
    if (!(t.learning_rate > 0.0)) out.push_back("training.learning_rate: must be > 0");
    if (t.batch_size < 1) out.push_back("training.batch_size: must be >= 1");
    if (!(t.sigma_data > 0.0)) out.push_back("training.sigma_data: must be > 0");
    if (t.probe_points < 2) out.push_back("training.probe_points: must be >= 2");
    if (!(t.probe_extent > 0.0)) out.push_back("training.probe_extent: must be > 0");
  }
  if (c.fig1.saved_trajectories < 0) out.push_back("fig1.saved_trajectories: must be >= 0");
  return out;
}

GaussianMixture build_mixture(const std::vector<ComponentSpec>& components) {
  std::vector<MixtureComponent> comps;
  for (const auto& c : components) {
    MixtureComponent m;
    m.weight = c.weight;
    m.mean = Eigen::Map<const Sample>(c.mean.data(), static_cast<Eigen::Index>(c.mean.size()));
    m.variance = Eigen::Map<const Sample>(c.variance.data(), static_cast<Eigen::Index>(c.variance.size()));
    comps.push_back(std::move(m));
  }
  return GaussianMixture(std::move(comps));
}

LabeledMixture build_labeled(const std::vector<ComponentSpec>& components) {
  std::vector<int> labels;
  for (const auto& c : components) labels.push_back(c.label);
  return LabeledMixture(build_mixture(components), std::move(labels));
}

TimeGrid build_grid(const GridSpec& spec) { return build_grid(spec.n_steps, spec.t_min, spec.t_max, spec.rho); }

}  // namespace nadd
