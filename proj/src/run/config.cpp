#include "tem/run/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace tem::run {

std::string algo_name(Algo a) {
  switch (a) {
    case Algo::TEM: return "tem";
    case Algo::MAPPO: return "mappo";
    case Algo::FC: return "fc";
    case Algo::RC: return "rc";
  }
  return "?";
}

Algo parse_algo(const std::string& s) {
  if (s == "tem") return Algo::TEM;
  if (s == "mappo") return Algo::MAPPO;
  if (s == "fc") return Algo::FC;
  if (s == "rc") return Algo::RC;
  throw std::invalid_argument("algo must be tem|mappo|fc|rc, got '" + s + "'");
}

namespace {

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad number for " + key + ": '" + v + "'");
  }
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const std::int64_t i = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad integer for " + key + ": '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config: bad boolean for " + key + ": '" + v + "'");
}

#define NUM_FIELD(key, expr)                                                     \
  {key, [](const RunConfig& c) { return fmt(c.expr); },                         \
   [](RunConfig& c, const std::string& v) { c.expr = to_double(key, v); }}
#define INT_FIELD(key, type, expr)                                              \
  {key, [](const RunConfig& c) { return std::to_string(c.expr); },              \
   [](RunConfig& c, const std::string& v) { c.expr = static_cast<type>(to_int(key, v)); }}
#define BOOL_FIELD(key, expr)                                                   \
  {key, [](const RunConfig& c) { return c.expr ? "true" : "false"; },           \
   [](RunConfig& c, const std::string& v) { c.expr = to_bool(key, v); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"scenario.kind",
       [](const RunConfig& c) { return c.scenario.is_pp() ? "pp" : "cn"; },
       [](RunConfig& c, const std::string& v) {
         if (v == "pp")
           c.scenario.kind = env::ScenarioKind::PredatorPrey;
         else if (v == "cn")
           c.scenario.kind = env::ScenarioKind::CooperativeNavigation;
         else
           throw std::invalid_argument("config: scenario.kind must be pp|cn, got '" + v + "'");
       }},
      INT_FIELD("scenario.n_agents", int, scenario.n_agents),
      INT_FIELD("scenario.n_targets", int, scenario.n_targets),
      INT_FIELD("scenario.episode_len", int, scenario.episode_len),
      NUM_FIELD("scenario.world_half_extent", scenario.world_half_extent),
      NUM_FIELD("scenario.obs_radius", scenario.obs_radius),
      INT_FIELD("scenario.k_neighbors", int, scenario.k_neighbors),
      INT_FIELD("scenario.l_targets", int, scenario.l_targets),
      NUM_FIELD("scenario.dt", scenario.dt),
      NUM_FIELD("scenario.damping", scenario.damping),
      NUM_FIELD("scenario.accel", scenario.accel),
      NUM_FIELD("scenario.agent_max_speed", scenario.agent_max_speed),
      NUM_FIELD("scenario.prey_speed_factor", scenario.prey_speed_factor),
      NUM_FIELD("scenario.capture_radius", scenario.capture_radius),
      NUM_FIELD("scenario.occupy_radius", scenario.occupy_radius),
      NUM_FIELD("scenario.collision_dist", scenario.collision_dist),
      NUM_FIELD("scenario.collision_penalty", scenario.collision_penalty),
      {"algo", [](const RunConfig& c) { return algo_name(c.algo); },
       [](RunConfig& c, const std::string& v) { c.algo = parse_algo(v); }},
      NUM_FIELD("rc_stop_prob", rc_stop_prob),
      INT_FIELD("comm.buffer_capacity", std::size_t, buffer_capacity),
      NUM_FIELD("hyper.gamma", hyper.gamma),
      NUM_FIELD("hyper.gae_lambda", hyper.gae_lambda),
      NUM_FIELD("hyper.clip_eps", hyper.clip_eps),
      NUM_FIELD("hyper.value_clip_eps", hyper.value_clip_eps),
      NUM_FIELD("hyper.lambda_m", hyper.lambda_m),
      NUM_FIELD("hyper.lambda_e", hyper.lambda_e),
      NUM_FIELD("hyper.delta", hyper.delta),
      NUM_FIELD("hyper.actor_lr", hyper.actor_lr),
      NUM_FIELD("hyper.critic_lr", hyper.critic_lr),
      INT_FIELD("hyper.epochs", int, hyper.epochs),
      INT_FIELD("hyper.minibatches", int, hyper.minibatches),
      NUM_FIELD("hyper.max_grad_norm", hyper.max_grad_norm),
      INT_FIELD("net.d_h", int, net.d_h),
      INT_FIELD("net.d_model", int, net.d_model),
      INT_FIELD("net.n_encoders", int, net.n_encoders),
      INT_FIELD("net.n_decoders", int, net.n_decoders),
      BOOL_FIELD("net.attention_double_exp", net.attention_double_exp),
      BOOL_FIELD("net.literal_fig2_kqv", net.literal_fig2_kqv),
      INT_FIELD("train.total_env_steps", std::int64_t, train.total_env_steps),
      INT_FIELD("train.n_envs", int, train.n_envs),
      INT_FIELD("train.eval_every", int, train.eval_every),
      INT_FIELD("train.eval_episodes", int, train.eval_episodes),
      INT_FIELD("seed", std::uint64_t, seed),
  };
  return table;
}

#undef NUM_FIELD
#undef INT_FIELD
#undef BOOL_FIELD

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::validate() const {
  scenario.validate();
  hyper.validate();
  if (algo == Algo::RC && (rc_stop_prob < 0.0 || rc_stop_prob > 1.0))
    throw std::invalid_argument("config: rc_stop_prob must lie in [0,1]");
  if (buffer_capacity < 1) throw std::invalid_argument("config: comm.buffer_capacity >= 1");
  if (train.total_env_steps < 1 || train.n_envs < 1 || train.eval_every < 1 ||
      train.eval_episodes < 1)
    throw std::invalid_argument("config: train.* values must be >= 1");
  if (net.d_h < 1 || net.d_model < 1 || net.n_encoders < 1 || net.n_decoders < 1)
    throw std::invalid_argument("config: net.* dims must be >= 1");
}

std::string RunConfig::serialize() const {
  std::ostringstream os;
  for (const Field& f : fields()) os << f.key << " = " << f.get(*this) << '\n';
  return os.str();
}

RunConfig RunConfig::parse_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    bool known = false;
    for (const Field& f : fields()) {
      if (f.key == key) {
        f.set(cfg, val);
        known = true;
        break;
      }
    }
    if (!known)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": unknown key '" +
                                  key + "'");
  }
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return parse_text(os.str());
}

}  // namespace tem::run
