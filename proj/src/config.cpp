#include "elign/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "elign/error.hpp"

namespace elign {

void TrainConfig::validate() const {
  task.validate();
  check_mode_for_task(reward_mode, task);
  if (episodes_per_epoch < 1) throw ConfigError("episodes_per_epoch must be >= 1");
  if (episode_length < 1) throw ConfigError("episode_length must be >= 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (convergence_patience < 1) throw ConfigError("convergence_patience must be >= 1");
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
  if (!(update_ratio >= 0.0)) throw ConfigError("update_ratio must be >= 0");
  if (reward_samples < 0 || dynamics_samples < 0) throw ConfigError("sample counts must be >= 0");
  if (dynamics_batch < 1 || dynamics_passes < 1) throw ConfigError("dynamics batch/passes must be >= 1");
  if (!(dynamics_lr > 0.0)) throw ConfigError("dynamics_lr must be positive");
  if (eval_episodes < 1 || final_eval_episodes < 1) throw ConfigError("eval episode counts must be >= 1");
  for (int h : dynamics_hidden)
    if (h < 1) throw ConfigError("dynamics_hidden sizes must be >= 1");
  for (int h : sac.hidden)
    if (h < 1) throw ConfigError("hidden sizes must be >= 1");
  if (!(sac.actor_lr > 0.0) || !(sac.critic_lr > 0.0)) throw ConfigError("learning rates must be positive");
  if (!(sac.gamma >= 0.0 && sac.gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
  if (!(sac.soft_update_coeff > 0.0 && sac.soft_update_coeff <= 1.0))
    throw ConfigError("soft_update_coeff must lie in (0, 1]");
  if (!(sac.entropy_coeff >= 0.0)) throw ConfigError("entropy_coeff must be >= 0");
  if (sac.batch_size < 1 || sac.buffer_capacity < sac.batch_size)
    throw ConfigError("need 1 <= batch_size <= buffer_capacity");
}

int TrainConfig::updates_per_epoch() const {
  return static_cast<int>(std::llround(update_ratio * static_cast<double>(steps_per_epoch())));
}

namespace {

nlohmann::json tau_to_json(double tau) {
  if (std::isinf(tau)) return "inf";
  return tau;
}

double tau_from_json(const nlohmann::json& v) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "+inf" || s == "infinity") return kFullObservability;
    throw ConfigError("tau must be a number or \"inf\"");
  }
  return v.get<double>();
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "task", "n_agents", "n_adversaries", "n_landmarks", "tau", "symmetry_breaking", "task_seed",
      "reward_mode", "episodes_per_epoch", "episode_length", "max_epochs", "convergence_patience",
      "seed", "noise_sigma", "update_ratio", "reward_samples", "dynamics_samples", "dynamics_batch",
      "dynamics_passes", "dynamics_lr", "dynamics_hidden", "eval_episodes", "final_eval_episodes",
      "hidden", "actor_lr", "critic_lr", "gamma", "soft_update_coeff", "entropy_coeff",
      "batch_size", "buffer_capacity"};
  return keys;
}

}  // namespace

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j;
  j["task"] = to_string(c.task.kind);
  j["n_agents"] = c.task.n_agents;
  j["n_adversaries"] = c.task.n_adversaries;
  j["n_landmarks"] = c.task.n_landmarks;
  j["tau"] = tau_to_json(c.task.tau);
  j["symmetry_breaking"] = c.task.symmetry_breaking;
  j["task_seed"] = c.task.seed;
  j["reward_mode"] = to_string(c.reward_mode);
  j["episodes_per_epoch"] = c.episodes_per_epoch;
  j["episode_length"] = c.episode_length;
  j["max_epochs"] = c.max_epochs;
  j["convergence_patience"] = c.convergence_patience;
  j["seed"] = c.seed;
  j["noise_sigma"] = c.noise_sigma;
  j["update_ratio"] = c.update_ratio;
  j["reward_samples"] = c.reward_samples;
  j["dynamics_samples"] = c.dynamics_samples;
  j["dynamics_batch"] = c.dynamics_batch;
  j["dynamics_passes"] = c.dynamics_passes;
  j["dynamics_lr"] = c.dynamics_lr;
  j["dynamics_hidden"] = c.dynamics_hidden;
  j["eval_episodes"] = c.eval_episodes;
  j["final_eval_episodes"] = c.final_eval_episodes;
  j["hidden"] = c.sac.hidden;
  j["actor_lr"] = c.sac.actor_lr;
  j["critic_lr"] = c.sac.critic_lr;
  j["gamma"] = c.sac.gamma;
  j["soft_update_coeff"] = c.sac.soft_update_coeff;
  j["entropy_coeff"] = c.sac.entropy_coeff;
  j["batch_size"] = c.sac.batch_size;
  j["buffer_capacity"] = c.sac.buffer_capacity;
  return j;
}

TrainConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("configuration must be a flat key/value table");
  for (const auto& [key, value] : j.items())
    if (!known_keys().contains(key)) throw ConfigError("unknown configuration key '" + key + "'");

  TrainConfig c;
  try {
    const TaskKind kind = task_kind_from_string(j.value("task", std::string("coop_nav")));
    c.task = TaskSpec::defaults(kind);
    // A changed team size drags the landmark count along for the
    // one-landmark-per-agent tasks unless it is given explicitly.
    if (j.contains("n_agents")) {
      c.task.n_agents = j.at("n_agents").get<int>();
      if (kind == TaskKind::coop_nav || kind == TaskKind::hetero_nav) c.task.n_landmarks = c.task.n_agents;
    }
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    };
    get("n_adversaries", c.task.n_adversaries);
    get("n_landmarks", c.task.n_landmarks);
    if (j.contains("tau")) c.task.tau = tau_from_json(j.at("tau"));
    get("symmetry_breaking", c.task.symmetry_breaking);
    get("task_seed", c.task.seed);
    if (j.contains("reward_mode")) c.reward_mode = reward_mode_from_string(j.at("reward_mode").get<std::string>());
    get("episodes_per_epoch", c.episodes_per_epoch);
    get("episode_length", c.episode_length);
    get("max_epochs", c.max_epochs);
    get("convergence_patience", c.convergence_patience);
    get("seed", c.seed);
    get("noise_sigma", c.noise_sigma);
    get("update_ratio", c.update_ratio);
    get("reward_samples", c.reward_samples);
    get("dynamics_samples", c.dynamics_samples);
    get("dynamics_batch", c.dynamics_batch);
    get("dynamics_passes", c.dynamics_passes);
    get("dynamics_lr", c.dynamics_lr);
    get("dynamics_hidden", c.dynamics_hidden);
    get("eval_episodes", c.eval_episodes);
    get("final_eval_episodes", c.final_eval_episodes);
    get("hidden", c.sac.hidden);
    get("actor_lr", c.sac.actor_lr);
    get("critic_lr", c.sac.critic_lr);
    get("gamma", c.sac.gamma);
    get("soft_update_coeff", c.sac.soft_update_coeff);
    get("entropy_coeff", c.sac.entropy_coeff);
    get("batch_size", c.sac.batch_size);
    get("buffer_capacity", c.sac.buffer_capacity);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("configuration value has the wrong type: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Drops a trailing `# comment` that is not inside a string.
std::string_view strip_comment(std::string_view s) {
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') in_string = !in_string;
    if (s[i] == '#' && !in_string) return s.substr(0, i);
  }
  return s;
}

nlohmann::json parse_scalar(std::string_view v, bool bare_words_ok);

nlohmann::json parse_array(std::string_view v, bool bare_words_ok) {
  nlohmann::json arr = nlohmann::json::array();
  std::string_view body = trim(v.substr(1, v.size() - 2));
  while (!body.empty()) {
    const auto comma = body.find(',');
    const std::string_view item = trim(body.substr(0, comma));
    if (!item.empty()) arr.push_back(parse_scalar(item, bare_words_ok));
    if (comma == std::string_view::npos) break;
    body = body.substr(comma + 1);
  }
  return arr;
}

nlohmann::json parse_scalar(std::string_view v, bool bare_words_ok) {
  v = trim(v);
  if (v.empty()) throw ConfigError("empty value");
  if (v.front() == '[') {
    if (v.back() != ']') throw ConfigError("unterminated array: " + std::string(v));
    return parse_array(v, bare_words_ok);
  }
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"') throw ConfigError("unterminated string: " + std::string(v));
    return std::string(v.substr(1, v.size() - 2));
  }
  if (v == "true") return true;
  if (v == "false") return false;
  if (v == "inf" || v == "+inf") return "inf";  // JSON has no infinity; tau accepts "inf"
  std::string s(v);
  std::erase(s, '_');
  {
    std::int64_t i = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), i);
    if (ec == std::errc() && p == s.data() + s.size()) return i;
  }
  {
    double d = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), d);
    if (ec == std::errc() && p == s.data() + s.size()) return d;
  }
  if (bare_words_ok) return std::string(v);
  throw ConfigError("cannot parse value '" + std::string(v) + "'");
}

}  // namespace

nlohmann::json parse_flat_toml(std::string_view text) {
  nlohmann::json out = nlohmann::json::object();
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[')
      throw ConfigError("line " + std::to_string(line_no) + ": tables are not supported, keys are flat");
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    try {
      out[key] = parse_scalar(line.substr(eq + 1), false);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

nlohmann::json load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  if (path.extension() == ".json") {
    try {
      return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("malformed JSON config: " + std::string(e.what()));
    }
  }
  return parse_flat_toml(text);
}

void apply_overrides(nlohmann::json& flat, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("override '" + o + "' is not of the form key=value");
    const std::string key(trim(std::string_view(o).substr(0, eq)));
    if (!known_keys().contains(key)) throw ConfigError("unknown configuration key '" + key + "'");
    flat[key] = parse_scalar(std::string_view(o).substr(eq + 1), true);
  }
}

}  // namespace elign
