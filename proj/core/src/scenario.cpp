#include "nmpc/scenario.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "nmpc/shooting.hpp"

namespace nmpc {

namespace {

struct Entry {
  std::string value;
  int line = 0;
};

struct SectionData {
  std::map<std::string, std::vector<Entry>> entries;
  int line = 0;
};

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) {
    ++b;
  }
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) {
    --e;
  }
  return s.substr(b, e - b);
}

bool parse_double(const std::string& text, double& out) {
  const char* begin = text.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  return end != begin && *end == '\0';
}

bool parse_vector(const std::string& text, Vector& out) {
  std::istringstream ss(text);
  std::vector<double> vals;
  std::string tok;
  while (ss >> tok) {
    double v = 0.0;
    if (!parse_double(tok, v)) {
      return false;
    }
    vals.push_back(v);
  }
  if (vals.empty()) {
    return false;
  }
  out = Eigen::Map<Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  return true;
}

/// Typed access to one section's key/value entries; collects schema errors
/// with line positions and flags unknown keys at the end.
class SectionReader {
 public:
  SectionReader(const SectionData* data, std::string section, std::vector<SchemaError>& errors)
      : data_(data), section_(std::move(section)), errors_(errors) {}

  const Entry* single(const std::string& key, bool required) {
    seen_.insert(key);
    if (data_ == nullptr) {
      return nullptr;
    }
    auto it = data_->entries.find(key);
    if (it == data_->entries.end()) {
      if (required) {
        errors_.push_back({data_->line, "missing key '" + key + "' in [" + section_ + "]"});
      }
      return nullptr;
    }
    if (it->second.size() > 1) {
      errors_.push_back({it->second[1].line, "duplicate key '" + key + "' in [" + section_ + "]"});
    }
    return &it->second.front();
  }

  double number(const std::string& key, bool required, double fallback) {
    const Entry* e = single(key, required);
    if (e == nullptr) {
      return fallback;
    }
    double v = 0.0;
    if (!parse_double(e->value, v)) {
      errors_.push_back({e->line, "value of '" + key + "' is not a number"});
      return fallback;
    }
    return v;
  }

  int integer(const std::string& key, bool required, int fallback) {
    const double v = number(key, required, static_cast<double>(fallback));
    if (v != std::floor(v)) {
      const Entry* e = data_ ? entry(key) : nullptr;
      errors_.push_back({e ? e->line : 0, "value of '" + key + "' must be an integer"});
      return fallback;
    }
    return static_cast<int>(v);
  }

  std::string word(const std::string& key, bool required, const std::string& fallback) {
    const Entry* e = single(key, required);
    return e == nullptr ? fallback : e->value;
  }

  bool vec(const std::string& key, bool required, Eigen::Index expected_len, Vector& out) {
    const Entry* e = single(key, required);
    if (e == nullptr) {
      return false;
    }
    Vector v;
    if (!parse_vector(e->value, v)) {
      errors_.push_back({e->line, "value of '" + key + "' is not a number list"});
      return false;
    }
    if (expected_len >= 0 && v.size() != expected_len) {
      errors_.push_back({e->line, "'" + key + "' has " + std::to_string(v.size()) +
                                      " entries, expected " + std::to_string(expected_len)});
      return false;
    }
    out = std::move(v);
    return true;
  }

  std::vector<Vector> repeated_vec(const std::string& key, Eigen::Index expected_len) {
    seen_.insert(key);
    std::vector<Vector> out;
    if (data_ == nullptr) {
      return out;
    }
    auto it = data_->entries.find(key);
    if (it == data_->entries.end()) {
      return out;
    }
    for (const Entry& e : it->second) {
      Vector v;
      if (!parse_vector(e.value, v)) {
        errors_.push_back({e.line, "value of '" + key + "' is not a number list"});
        continue;
      }
      if (expected_len >= 0 && v.size() != expected_len) {
        errors_.push_back({e.line, "'" + key + "' has " + std::to_string(v.size()) +
                                       " entries, expected " + std::to_string(expected_len)});
        continue;
      }
      out.push_back(std::move(v));
    }
    return out;
  }

  void finish() {
    if (data_ == nullptr) {
      return;
    }
    for (const auto& [key, entries] : data_->entries) {
      if (!seen_.contains(key)) {
        errors_.push_back({entries.front().line, "unknown key '" + key + "' in [" + section_ + "]"});
      }
    }
  }

 private:
  const Entry* entry(const std::string& key) const {
    auto it = data_->entries.find(key);
    return it == data_->entries.end() ? nullptr : &it->second.front();
  }

  const SectionData* data_;
  std::string section_;
  std::vector<SchemaError>& errors_;
  std::set<std::string> seen_;
};

const std::set<std::string> kKnownSections = {"plant",        "discretization", "horizon",
                                              "cost",         "input_bounds",   "simulation",
                                              "solver"};

struct RawFile {
  std::map<std::string, SectionData> sections;
  SectionData root;
  std::vector<SectionData> obstacles;
};

RawFile read_raw(std::istream& in, std::vector<SchemaError>& errors) {
  RawFile raw;
  SectionData* current = &raw.root;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) {
      line.erase(hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    if (line.starts_with("[[") && line.ends_with("]]")) {
      const std::string name = trim(line.substr(2, line.size() - 4));
      if (name != "obstacle") {
        errors.push_back({lineno, "unknown repeated section [[" + name + "]]"});
        current = nullptr;
        continue;
      }
      raw.obstacles.emplace_back();
      raw.obstacles.back().line = lineno;
      current = &raw.obstacles.back();
      continue;
    }
    if (line.starts_with("[") && line.ends_with("]")) {
      const std::string name = trim(line.substr(1, line.size() - 2));
      if (!kKnownSections.contains(name)) {
        errors.push_back({lineno, "unknown section [" + name + "]"});
        current = nullptr;
        continue;
      }
      if (raw.sections.contains(name)) {
        errors.push_back({lineno, "duplicate section [" + name + "]"});
      }
      SectionData& sec = raw.sections[name];
      if (sec.line == 0) {
        sec.line = lineno;
      }
      current = &sec;
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back({lineno, "expected 'key = value'"});
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      errors.push_back({lineno, "expected 'key = value'"});
      continue;
    }
    if (current == nullptr) {
      continue;  // inside an unknown section; already reported
    }
    current->entries[key].push_back({value, lineno});
  }
  return raw;
}

const SectionData* find(const RawFile& raw, const std::string& name,
                        std::vector<SchemaError>& errors, bool required) {
  auto it = raw.sections.find(name);
  if (it == raw.sections.end()) {
    if (required) {
      errors.push_back({0, "missing [" + name + "] section"});
    }
    return nullptr;
  }
  return &it->second;
}

void validate_obstacle_spec(const ObstacleSpec& spec, const Scenario& scenario,
                            std::vector<SchemaError>& errors) {
  // Constructing the obstacle exercises every per-kind parameter check.
  try {
    (void)scenario.build_obstacle(spec);
  } catch (const std::exception& ex) {
    errors.push_back({spec.line, ex.what()});
  }
}

}  // namespace

std::string ScenarioLoadResult::error_text() const {
  std::string out;
  for (const auto& e : errors) {
    out += "line " + std::to_string(e.line) + ": " + e.message + "\n";
  }
  return out;
}

ScenarioLoadResult load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    ScenarioLoadResult result;
    result.errors.push_back({0, "cannot open scenario file '" + path + "'"});
    return result;
  }
  std::string name = path;
  const std::size_t slash = name.find_last_of('/');
  if (slash != std::string::npos) {
    name = name.substr(slash + 1);
  }
  const std::size_t dot = name.find_last_of('.');
  if (dot != std::string::npos) {
    name = name.substr(0, dot);
  }
  return parse_scenario(in, name);
}

ScenarioLoadResult parse_scenario(std::istream& in, const std::string& name) {
  ScenarioLoadResult result;
  std::vector<SchemaError>& errors = result.errors;
  RawFile raw = read_raw(in, errors);

  Scenario sc;
  sc.name = name;

  {
    SectionReader root(&raw.root, "", errors);
    sc.schema_version = root.integer("schema_version", true, 1);
    if (sc.schema_version != 1) {
      errors.push_back({0, "unsupported schema_version " + std::to_string(sc.schema_version)});
    }
    root.finish();
  }

  {
    SectionReader plant(find(raw, "plant", errors, true), "plant", errors);
    sc.plant_kind = plant.word("kind", true, "trailer");
    if (sc.plant_kind != "trailer") {
      errors.push_back({0, "unknown plant kind '" + sc.plant_kind + "'"});
    }
    sc.trailer_length = plant.number("L", true, 0.5);
    if (!(sc.trailer_length > 0.0)) {
      errors.push_back({0, "plant L must be positive"});
    }
    plant.finish();
  }

  const Eigen::Index n_x = 3;
  const Eigen::Index n_u = 2;

  {
    SectionReader disc(find(raw, "discretization", errors, true), "discretization", errors);
    sc.discretization = disc.word("method", true, "rk4");
    if (sc.discretization != "rk4" && sc.discretization != "euler") {
      errors.push_back({0, "discretization method must be rk4 or euler"});
    }
    sc.dt = disc.number("dt", true, 0.1);
    if (!(sc.dt > 0.0)) {
      errors.push_back({0, "dt must be positive"});
    }
    disc.finish();
  }

  {
    SectionReader hor(find(raw, "horizon", errors, true), "horizon", errors);
    sc.horizon = hor.integer("N", true, 50);
    if (sc.horizon < 1) {
      errors.push_back({0, "horizon N must be at least 1"});
    }
    hor.finish();
  }

  {
    SectionReader cost(find(raw, "cost", errors, true), "cost", errors);
    cost.vec("Q", true, n_x, sc.q_diag);
    cost.vec("R", true, n_u, sc.r_diag);
    cost.vec("Q_N", true, n_x, sc.qn_diag);
    cost.vec("x_ref", true, n_x, sc.x_ref);
    cost.vec("u_ref", true, n_u, sc.u_ref);
    cost.finish();
  }

  {
    SectionReader bounds(find(raw, "input_bounds", errors, true), "input_bounds", errors);
    const bool got_min = bounds.vec("u_min", true, n_u, sc.u_min);
    const bool got_max = bounds.vec("u_max", true, n_u, sc.u_max);
    if (got_min && got_max) {
      for (Eigen::Index i = 0; i < n_u; ++i) {
        if (sc.u_min[i] > sc.u_max[i]) {
          errors.push_back({raw.sections.at("input_bounds").line,
                            "box bounds crossed at input component " + std::to_string(i)});
        }
      }
    }
    bounds.finish();
  }

  for (const SectionData& od : raw.obstacles) {
    SectionReader obs(&od, "obstacle", errors);
    ObstacleSpec spec;
    spec.line = od.line;
    spec.kind = obs.word("kind", true, "");
    spec.eta = obs.number("eta", true, 1.0);
    if (!(spec.eta > 0.0)) {
      errors.push_back({od.line, "obstacle eta must be positive"});
    }
    spec.margin = obs.number("margin", false, 0.0);
    if (spec.margin < 0.0) {
      errors.push_back({od.line, "obstacle margin must be nonnegative"});
    }
    spec.soft_buffer = obs.number("soft_buffer", false, 0.0);
    if (spec.soft_buffer < 0.0) {
      errors.push_back({od.line, "obstacle soft_buffer must be nonnegative"});
    }
    spec.soft_buffer_eta = obs.number("soft_buffer_eta", false, spec.eta);
    if (!(spec.soft_buffer_eta > 0.0)) {
      errors.push_back({od.line, "obstacle soft_buffer_eta must be positive"});
    }
    spec.active_from = obs.integer("active_from", false, 0);
    spec.active_to = obs.integer("active_to", false, -1);

    static const std::map<std::string, std::vector<std::pair<std::string, int>>> kKindParams = {
        {"ball", {{"center", 2}, {"radius", 1}}},
        {"rectangle", {{"center", 2}, {"half_extent", 2}}},
        {"half_space", {{"normal", 2}, {"offset", 1}}},
        {"ellipse", {{"center", 2}, {"semi_axes", 2}}},
        {"parabola", {{"curve_up", 1}, {"y_low", 1}, {"curve_down", 1}, {"y_high", 1}}},
        {"sine_band",
         {{"amp_low", 1},
          {"freq_low", 1},
          {"phase_low", 1},
          {"amp_high", 1},
          {"freq_high", 1},
          {"phase_high", 1},
          {"x_min", 1},
          {"x_max", 1}}},
    };
    auto kind_it = kKindParams.find(spec.kind);
    if (kind_it == kKindParams.end()) {
      if (!spec.kind.empty()) {
        errors.push_back({od.line, "unknown obstacle kind '" + spec.kind + "'"});
      }
      obs.finish();
      continue;
    }
    bool params_ok = true;
    for (const auto& [pname, plen] : kind_it->second) {
      Vector v;
      if (obs.vec(pname, true, plen, v)) {
        spec.params[pname] = std::vector<double>(v.data(), v.data() + v.size());
      } else {
        params_ok = false;
      }
    }
    obs.finish();
    if (params_ok) {
      validate_obstacle_spec(spec, sc, errors);
      sc.obstacle_specs.push_back(std::move(spec));
    }
  }

  {
    SectionReader sim(find(raw, "simulation", errors, true), "simulation", errors);
    sc.initial_states = sim.repeated_vec("x0", n_x);
    if (sc.initial_states.empty()) {
      errors.push_back({0, "at least one x0 is required in [simulation]"});
    }
    sc.sim_steps = sim.integer("sim_steps", true, 200);
    if (sc.sim_steps < 1) {
      errors.push_back({0, "sim_steps must be at least 1"});
    }
    sc.pos_tol = sim.number("pos_tol", false, 1e-2);
    sc.heading_tol = sim.number("heading_tol", false, 1e-2);
    Vector pert;
    if (sim.vec("perturbation", false, n_x, pert)) {
      sc.perturbation_scale = pert;
    }
    sc.seed = static_cast<unsigned int>(sim.integer("seed", false, 0));
    sim.finish();
  }

  {
    SectionReader solver(find(raw, "solver", errors, false), "solver", errors);
    sc.solver.tol = solver.number("tol", false, 1e-6);
    sc.solver.max_iter = solver.integer("max_iter", false, 500);
    sc.solver.lbfgs_memory = solver.integer("lbfgs_memory", false, 10);
    sc.solver.first_guess = solver.word("first_guess", false, "zero");
    if (sc.solver.first_guess != "zero" && sc.solver.first_guess != "feedback") {
      errors.push_back({0, "solver first_guess must be zero or feedback"});
    }
    if (!(sc.solver.tol > 0.0)) {
      errors.push_back({0, "solver tol must be positive"});
    }
    if (sc.solver.max_iter < 1) {
      errors.push_back({0, "solver max_iter must be at least 1"});
    }
    if (sc.solver.lbfgs_memory < 0) {
      errors.push_back({0, "solver lbfgs_memory must be nonnegative"});
    }
    solver.finish();
  }

  if (errors.empty()) {
    result.scenario = std::move(sc);
  }
  return result;
}

Obstacle Scenario::build_obstacle(const ObstacleSpec& spec) const {
  auto p1 = [&spec](const std::string& key) { return spec.params.at(key)[0]; };
  auto p2 = [&spec](const std::string& key) {
    const auto& v = spec.params.at(key);
    return Vector(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
  };

  if (spec.kind == "ball") {
    return Obstacle::ball(p2("center"), p1("radius"), spec.eta, spec.margin);
  }
  if (spec.kind == "rectangle") {
    return Obstacle::rectangle(p2("center"), p2("half_extent"), spec.eta, spec.margin);
  }
  if (spec.kind == "half_space") {
    return Obstacle::half_space(p2("normal"), p1("offset"), spec.eta, spec.margin);
  }
  if (spec.kind == "ellipse") {
    return Obstacle::ellipse(p2("center"), p2("semi_axes"), spec.eta, spec.margin);
  }
  if (spec.kind == "parabola") {
    // { (x, y) : y > a x^2 + y_low  and  y < y_high + b x^2 }, inflated by
    // the margin in the y direction.
    const double a = p1("curve_up");
    const double y_low = p1("y_low") - spec.margin;
    const double b = p1("curve_down");
    const double y_high = p1("y_high") + spec.margin;
    SmoothInequality lower{
        [a, y_low](const Vector& z) { return z[1] - a * z[0] * z[0] - y_low; },
        [a](const Vector& z) {
          Vector g(2);
          g[0] = -2.0 * a * z[0];
          g[1] = 1.0;
          return g;
        }};
    SmoothInequality upper{
        [b, y_high](const Vector& z) { return y_high + b * z[0] * z[0] - z[1]; },
        [b](const Vector& z) {
          Vector g(2);
          g[0] = 2.0 * b * z[0];
          g[1] = -1.0;
          return g;
        }};
    return Obstacle({lower, upper}, spec.eta, 2);
  }
  if (spec.kind == "sine_band") {
    // { (x, y) : y > A1 sin(w1 x + p1), y < A2 sin(w2 x + p2), x in (x_min, x_max) }.
    const double a1 = p1("amp_low"), w1 = p1("freq_low"), ph1 = p1("phase_low");
    const double a2 = p1("amp_high"), w2 = p1("freq_high"), ph2 = p1("phase_high");
    const double x_min = p1("x_min") - spec.margin;
    const double x_max = p1("x_max") + spec.margin;
    const double m = spec.margin;
    SmoothInequality lower{
        [a1, w1, ph1, m](const Vector& z) { return z[1] - a1 * std::sin(w1 * z[0] + ph1) + m; },
        [a1, w1, ph1](const Vector& z) {
          Vector g(2);
          g[0] = -a1 * w1 * std::cos(w1 * z[0] + ph1);
          g[1] = 1.0;
          return g;
        }};
    SmoothInequality upper{
        [a2, w2, ph2, m](const Vector& z) { return a2 * std::sin(w2 * z[0] + ph2) - z[1] + m; },
        [a2, w2, ph2](const Vector& z) {
          Vector g(2);
          g[0] = a2 * w2 * std::cos(w2 * z[0] + ph2);
          g[1] = -1.0;
          return g;
        }};
    // The cap inequalities are normalized by the band width so the product
    // of the four plus-parts keeps a uniform scale along the band.
    const double inv_w = 1.0 / std::max(x_max - x_min, 1e-9);
    SmoothInequality left{[x_min, inv_w](const Vector& z) { return (z[0] - x_min) * inv_w; },
                          [inv_w](const Vector&) {
                            Vector g(2);
                            g[0] = inv_w;
                            g[1] = 0.0;
                            return g;
                          }};
    SmoothInequality right{[x_max, inv_w](const Vector& z) { return (x_max - z[0]) * inv_w; },
                           [inv_w](const Vector&) {
                             Vector g(2);
                             g[0] = -inv_w;
                             g[1] = 0.0;
                             return g;
                           }};
    return Obstacle({lower, upper, left, right}, spec.eta, 2);
  }
  throw std::invalid_argument("unknown obstacle kind '" + spec.kind + "'");
}

namespace {

double plus_product(const Obstacle& o, const Vector& z) {
  double prod = 1.0;
  for (const auto& h : o.inequalities()) {
    const double hp = std::max(h.eval(z), 0.0);
    if (hp == 0.0) {
      return 0.0;
    }
    prod *= hp;
  }
  return prod;
}

Vector plus_product_gradient(const Obstacle& o, const Vector& z) {
  const int m = o.size();
  Eigen::ArrayXd hplus(m);
  for (int i = 0; i < m; ++i) {
    hplus[i] = std::max(o.inequalities()[i].eval(z), 0.0);
    if (hplus[i] == 0.0) {
      return Vector::Zero(z.size());
    }
  }
  Vector grad = Vector::Zero(z.size());
  for (int i = 0; i < m; ++i) {
    double w = 1.0;
    for (int j = 0; j < m; ++j) {
      if (j != i) {
        w *= hplus[j];
      }
    }
    grad += w * o.inequalities()[i].grad(z);
  }
  return grad;
}

/// Keep-out skirts as a domain constraint g(x, u) <= 0 with one component
/// per buffered obstacle: g_i = sqrt(w_i) * prod_j [h_ij(z)]_+, so the
/// relaxed term [g_i]_+^2 contributes w_i * prod [h_ij]_+^2, the same form
/// and units as an obstacle weight.
StateInequalityPenalty make_keepout_penalty(std::vector<Obstacle> cushions,
                                            std::vector<double> weights) {
  StateInequalityPenalty sp;
  sp.n_c = static_cast<int>(cushions.size());
  sp.beta = 1.0;
  std::vector<double> scales(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    scales[i] = std::sqrt(weights[i]);
  }
  sp.g = [cushions, scales](const Vector& x, const Vector&, Vector& g) {
    const Vector z = x.head(2);
    g.resize(static_cast<Eigen::Index>(cushions.size()));
    for (std::size_t i = 0; i < cushions.size(); ++i) {
      g[static_cast<Eigen::Index>(i)] = scales[i] * plus_product(cushions[i], z);
    }
  };
  sp.grad_g = [cushions, scales](const Vector& x, const Vector&, const Vector& w, Vector& gx,
                                 Vector& gu) {
    (void)gu;
    const Vector z = x.head(2);
    for (std::size_t i = 0; i < cushions.size(); ++i) {
      const double wi = w[static_cast<Eigen::Index>(i)];
      if (wi != 0.0) {
        gx.head(2) += wi * scales[i] * plus_product_gradient(cushions[i], z);
      }
    }
  };
  return sp;
}

}  // namespace

ControlProblem Scenario::build_problem() const {
  DynamicsModel continuous = make_trailer_model(trailer_length);
  ControlProblem p;
  p.N = horizon;
  p.dynamics = discretization == "euler" ? discretize_euler(continuous, dt)
                                         : discretize_rk4(continuous, dt);
  p.cost = QuadraticStageCost::diagonal(q_diag, r_diag, qn_diag, x_ref, u_ref);
  p.box = InputBox{u_min, u_max};
  p.position_slice = {0, 1};
  std::vector<Obstacle> cushions;
  std::vector<double> cushion_weights;
  for (const auto& spec : obstacle_specs) {
    p.obstacles.push_back({build_obstacle(spec), spec.active_from, spec.active_to});
    if (spec.soft_buffer > 0.0) {
      ObstacleSpec padded = spec;
      padded.margin += spec.soft_buffer;
      cushions.push_back(build_obstacle(padded));
      cushion_weights.push_back(spec.soft_buffer_eta);
    }
  }
  if (!cushions.empty()) {
    p.state_penalty = make_keepout_penalty(std::move(cushions), std::move(cushion_weights));
  }
  return p;
}

}  // namespace nmpc
