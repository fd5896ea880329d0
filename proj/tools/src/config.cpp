#include "asyncheat/cli/config.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace asyncheat::cli {

using nlohmann::json;

namespace {

const std::set<std::string> kRequired = {
    "num_pes", "points_per_pe", "dx",       "dt",   "alpha",    "buffer_len", "boundary",
    "steps",   "ensemble_size", "seed",     "epsilons", "output_dir", "initial_condition",
};
const std::set<std::string> kOptional = {
    "delay_distribution", "cap", "snapshot_steps",
    "sweep",              "tail_horizon",      "per_run_norms",
};

[[noreturn]] void fail(const std::string& key, const std::string& what) {
  throw ConfigError("'" + key + "': " + what);
}

const json& field(const json& obj, const std::string& key) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(key, "missing");
  return *it;
}

double number(const json& v, const std::string& key) {
  if (!v.is_number()) fail(key, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(key, "must be finite");
  return x;
}

long long integer(const json& v, const std::string& key, long long lo, long long hi) {
  if (!v.is_number_integer()) fail(key, "expected an integer");
  if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(hi)) {
    fail(key, "out of range");
  }
  const auto x = v.get<long long>();
  if (x < lo || x > hi) {
    fail(key, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  return x;
}

std::uint64_t unsigned_integer(const json& v, const std::string& key) {
  if (!v.is_number_unsigned()) fail(key, "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

std::vector<double> number_list(const json& v, const std::string& key) {
  if (!v.is_array()) fail(key, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) out.push_back(number(x, key));
  return out;
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
  for (const auto& [k, _] : obj.items()) {
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

void parse_delays(const json& v, ExperimentConfig& cfg, std::size_t num_edges) {
  const std::string key = "delay_distribution";
  const auto q = static_cast<std::size_t>(cfg.buffer_len);
  if (v.is_string()) {
    if (v.get<std::string>() != "uniform") fail(key, "unknown distribution name");
    cfg.delay_kind = DelayKind::uniform;
    cfg.delay_probs.assign(num_edges, std::vector<double>(q, 1.0 / static_cast<double>(q)));
    return;
  }
  if (!v.is_object() || v.size() != 1) {
    fail(key, "expected \"uniform\", {\"all_edges\": [...]} or {\"per_edge\": [[...], ...]}");
  }
  reject_unknown(v, {"all_edges", "per_edge"}, key);
  if (v.contains("all_edges")) {
    auto probs = number_list(v["all_edges"], key + ".all_edges");
    if (probs.size() != q) fail(key + ".all_edges", "needs buffer_len entries");
    cfg.delay_kind = DelayKind::all_edges;
    cfg.delay_probs.assign(num_edges, probs);
    return;
  }
  const json& rows = v["per_edge"];
  if (!rows.is_array() || rows.size() != num_edges) {
    fail(key + ".per_edge", "needs one row per dependency edge (" + std::to_string(num_edges) +
                                ")");
  }
  cfg.delay_kind = DelayKind::per_edge;
  cfg.delay_probs.clear();
  for (const auto& row : rows) {
    auto probs = number_list(row, key + ".per_edge");
    if (probs.size() != q) fail(key + ".per_edge", "each row needs buffer_len entries");
    cfg.delay_probs.push_back(std::move(probs));
  }
}

}  // namespace

grid::GridSpec ExperimentConfig::grid() const {
  return grid::GridSpec(num_pes, points_per_pe, dx, dt, alpha);
}

modes::AugmentedSpec ExperimentConfig::aspec() const { return modes::AugmentedSpec(grid(), buffer_len); }

modes::SwitchingDistribution ExperimentConfig::distribution() const {
  return modes::SwitchingDistribution(delay_probs);
}

grid::StateVector ExperimentConfig::initial_state() const {
  const auto g = grid();
  switch (initial_kind) {
    case InitialKind::cos2:
      return grid::with_boundary(grid::cos2_initial_condition(g), boundary);
    case InitialKind::ramp:
      return grid::steady_state_profile(g, boundary);
    case InitialKind::explicit_values:
      break;
  }
  return grid::with_boundary(
      Eigen::Map<const Eigen::VectorXd>(initial_values.data(),
                                        static_cast<Eigen::Index>(initial_values.size())),
      boundary);
}

sim::RunConfig ExperimentConfig::run_config() const {
  return sim::RunConfig{aspec(), distribution(), initial_state(), boundary, steps,
                        seed,    epsilons,       snapshot_steps};
}

ExperimentConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("configuration must be a JSON object");
  std::set<std::string> allowed = kRequired;
  allowed.insert(kOptional.begin(), kOptional.end());
  reject_unknown(doc, allowed, "configuration");

  constexpr long long kIntMax = 2'147'483'647;
  ExperimentConfig cfg;
  cfg.num_pes = static_cast<int>(integer(field(doc, "num_pes"), "num_pes", 1, kIntMax));
  cfg.points_per_pe =
      static_cast<int>(integer(field(doc, "points_per_pe"), "points_per_pe", 1, kIntMax));
  cfg.dx = number(field(doc, "dx"), "dx");
  cfg.dt = number(field(doc, "dt"), "dt");
  cfg.alpha = number(field(doc, "alpha"), "alpha");
  cfg.buffer_len = static_cast<int>(integer(field(doc, "buffer_len"), "buffer_len", 1, 64));
  cfg.steps = static_cast<int>(integer(field(doc, "steps"), "steps", 0, kIntMax - 1));
  cfg.ensemble_size =
      static_cast<int>(integer(field(doc, "ensemble_size"), "ensemble_size", 1, kIntMax));
  cfg.seed = unsigned_integer(field(doc, "seed"), "seed");

  const json& bc = field(doc, "boundary");
  if (!bc.is_object()) fail("boundary", "expected {\"left\": x, \"right\": y}");
  reject_unknown(bc, {"left", "right"}, "boundary");
  cfg.boundary.left = number(field(bc, "left"), "boundary.left");
  cfg.boundary.right = number(field(bc, "right"), "boundary.right");

  cfg.epsilons = number_list(field(doc, "epsilons"), "epsilons");
  for (double e : cfg.epsilons) {
    if (!(e > 0.0)) fail("epsilons", "every epsilon must be positive");
  }

  const json& out = field(doc, "output_dir");
  if (!out.is_string() || out.get<std::string>().empty()) {
    fail("output_dir", "expected a non-empty string");
  }
  cfg.output_dir = out.get<std::string>();

  // Grid invariants first; the edge count depends on them.
  std::size_t num_edges = 0;
  try {
    num_edges = modes::dependency_edges(cfg.grid()).size();
    (void)cfg.aspec();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  if (doc.contains("delay_distribution")) {
    parse_delays(doc["delay_distribution"], cfg, num_edges);
  } else {
    parse_delays(json("uniform"), cfg, num_edges);
  }
  try {
    (void)cfg.distribution();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("'delay_distribution': ") + e.what());
  }

  {
    const json& ic = field(doc, "initial_condition");
    if (ic.is_string()) {
      const auto name = ic.get<std::string>();
      if (name == "cos2") {
        cfg.initial_kind = InitialKind::cos2;
      } else if (name == "ramp") {
        cfg.initial_kind = InitialKind::ramp;
      } else {
        fail("initial_condition", "expected \"cos2\", \"ramp\" or an array");
      }
    } else {
      cfg.initial_kind = InitialKind::explicit_values;
      cfg.initial_values = number_list(ic, "initial_condition");
      if (static_cast<Eigen::Index>(cfg.initial_values.size()) != cfg.grid().size()) {
        fail("initial_condition", "needs num_pes * points_per_pe entries");
      }
    }
  }

  if (doc.contains("cap")) cfg.cap = unsigned_integer(doc["cap"], "cap");

  if (doc.contains("snapshot_steps")) {
    const json& s = doc["snapshot_steps"];
    if (!s.is_array()) fail("snapshot_steps", "expected an array of integers");
    for (const auto& v : s) {
      cfg.snapshot_steps.push_back(static_cast<int>(integer(v, "snapshot_steps", 0, cfg.steps)));
    }
  } else {
    cfg.snapshot_steps = {0, cfg.steps / 2, cfg.steps};
  }
  std::sort(cfg.snapshot_steps.begin(), cfg.snapshot_steps.end());
  cfg.snapshot_steps.erase(std::unique(cfg.snapshot_steps.begin(), cfg.snapshot_steps.end()),
                           cfg.snapshot_steps.end());

  if (doc.contains("sweep")) {
    const json& s = doc["sweep"];
    if (!s.is_object()) fail("sweep", "expected {\"step\": k, \"epsilons\": [...]}");
    reject_unknown(s, {"step", "epsilons"}, "sweep");
    EpsilonSweep sw;
    sw.step = static_cast<int>(integer(field(s, "step"), "sweep.step", 0, cfg.steps));
    sw.epsilons = number_list(field(s, "epsilons"), "sweep.epsilons");
    for (double e : sw.epsilons) {
      if (!(e > 0.0)) fail("sweep.epsilons", "every epsilon must be positive");
    }
    cfg.sweep = std::move(sw);
  }

  if (doc.contains("tail_horizon")) {
    cfg.tail_horizon =
        static_cast<int>(integer(doc["tail_horizon"], "tail_horizon", 1, kIntMax));
  }
  if (doc.contains("per_run_norms")) {
    if (!doc["per_run_norms"].is_boolean()) fail("per_run_norms", "expected true or false");
    cfg.per_run_norms = doc["per_run_norms"].get<bool>();
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read configuration file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

}  // namespace asyncheat::cli
