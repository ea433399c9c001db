#include "mir3/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "mir3/checkpoint.hpp"

namespace mir3 {

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "maddpg") return Algorithm::kMaddpg;
  if (s == "mir3") return Algorithm::kMir3;
  if (s == "m3ddpg") return Algorithm::kM3ddpg;
  throw ConfigError("algorithm: expected one of maddpg|mir3|m3ddpg, got '" + s + "'");
}

const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::kMaddpg: return "maddpg";
    case Algorithm::kMir3: return "mir3";
    case Algorithm::kM3ddpg: return "m3ddpg";
  }
  return "?";
}

namespace {

std::string format_scalar(Scalar v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, res.ptr};
}

Scalar parse_scalar(const std::string& key, const std::string& text) {
  const char* begin = text.c_str();
  char* end = nullptr;
  const Scalar v = std::strtod(begin, &end);
  if (end != begin + text.size() || text.empty())
    throw ConfigError(key + ": expected a number, got '" + text + "'");
  return v;
}

std::int64_t parse_int(const std::string& key, const std::string& text) {
  std::int64_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    // Accept scientific notation for counts (2e5 and the like) when exact.
    const Scalar s = parse_scalar(key, text);
    const auto rounded = static_cast<std::int64_t>(s);
    if (static_cast<Scalar>(rounded) != s)
      throw ConfigError(key + ": expected an integer, got '" + text + "'");
    return rounded;
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(key + ": expected true/false, got '" + text + "'");
}

struct FieldBinding {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename Owner>
Owner& section_of(RunConfig& c);
template <>
RunConfig& section_of<RunConfig>(RunConfig& c) { return c; }
template <>
RunConfig::Env& section_of<RunConfig::Env>(RunConfig& c) { return c.env; }
template <>
RunConfig::Train& section_of<RunConfig::Train>(RunConfig& c) { return c.train; }
template <>
RunConfig::Mir3& section_of<RunConfig::Mir3>(RunConfig& c) { return c.mir3; }
template <>
RunConfig::M3ddpg& section_of<RunConfig::M3ddpg>(RunConfig& c) { return c.m3ddpg; }
template <>
RunConfig::Attack& section_of<RunConfig::Attack>(RunConfig& c) { return c.attack; }
template <>
RunConfig::Eval& section_of<RunConfig::Eval>(RunConfig& c) { return c.eval; }

template <typename Owner>
FieldBinding field(std::string key, Scalar Owner::* member) {
  return {key,
          [member](const RunConfig& c) {
            return format_scalar(section_of<Owner>(const_cast<RunConfig&>(c)).*member);
          },
          [key, member](RunConfig& c, const std::string& v) {
            section_of<Owner>(c).*member = parse_scalar(key, v);
          }};
}

template <typename Owner>
FieldBinding field(std::string key, int Owner::* member) {
  return {key,
          [member](const RunConfig& c) {
            return std::to_string(section_of<Owner>(const_cast<RunConfig&>(c)).*member);
          },
          [key, member](RunConfig& c, const std::string& v) {
            const auto value = parse_int(key, v);
            if (value < INT32_MIN || value > INT32_MAX) throw ConfigError(key + ": out of range");
            section_of<Owner>(c).*member = static_cast<int>(value);
          }};
}

template <typename Owner>
FieldBinding field(std::string key, std::int64_t Owner::* member) {
  return {key,
          [member](const RunConfig& c) {
            return std::to_string(section_of<Owner>(const_cast<RunConfig&>(c)).*member);
          },
          [key, member](RunConfig& c, const std::string& v) {
            section_of<Owner>(c).*member = parse_int(key, v);
          }};
}

template <typename Owner>
FieldBinding field(std::string key, std::string Owner::* member) {
  return {key,
          [member](const RunConfig& c) {
            return section_of<Owner>(const_cast<RunConfig&>(c)).*member;
          },
          [key, member](RunConfig& c, const std::string& v) { section_of<Owner>(c).*member = v; }};
}

const std::vector<FieldBinding>& bindings() {
  static const std::vector<FieldBinding> fields = [] {
    std::vector<FieldBinding> f;
    f.push_back(field<RunConfig>("algorithm", &RunConfig::algorithm));
    f.push_back({"seed",
                 [](const RunConfig& c) { return std::to_string(c.seed); },
                 [](RunConfig& c, const std::string& v) {
                   const auto value = parse_int("seed", v);
                   if (value < 0) throw ConfigError("seed: must be >= 0");
                   c.seed = static_cast<std::uint64_t>(value);
                 }});
    f.push_back({"deterministic",
                 [](const RunConfig& c) { return c.deterministic ? "true" : "false"; },
                 [](RunConfig& c, const std::string& v) {
                   c.deterministic = parse_bool("deterministic", v);
                 }});
    f.push_back(field<RunConfig::Env>("env.n_agents", &RunConfig::Env::n_agents));
    f.push_back(field<RunConfig::Env>("env.v_max", &RunConfig::Env::v_max));
    f.push_back(field<RunConfig::Env>("env.max_episode_len", &RunConfig::Env::max_episode_len));
    f.push_back(field<RunConfig::Env>("env.history_window", &RunConfig::Env::history_window));
    f.push_back(field<RunConfig::Train>("train.total_timesteps", &RunConfig::Train::total_timesteps));
    f.push_back(field<RunConfig::Train>("train.lr", &RunConfig::Train::lr));
    f.push_back(field<RunConfig::Train>("train.actor_lr", &RunConfig::Train::actor_lr));
    f.push_back(field<RunConfig::Train>("train.critic_lr", &RunConfig::Train::critic_lr));
    f.push_back(field<RunConfig::Train>("train.gamma", &RunConfig::Train::gamma));
    f.push_back(field<RunConfig::Train>("train.tau", &RunConfig::Train::tau));
    f.push_back(field<RunConfig::Train>("train.batch_size", &RunConfig::Train::batch_size));
    f.push_back(field<RunConfig::Train>("train.buffer_size", &RunConfig::Train::buffer_size));
    f.push_back(field<RunConfig::Train>("train.warmup_steps", &RunConfig::Train::warmup_steps));
    f.push_back(
        field<RunConfig::Train>("train.exploration_noise", &RunConfig::Train::exploration_noise));
    f.push_back(field<RunConfig::Train>("train.max_grad_norm", &RunConfig::Train::max_grad_norm));
    f.push_back(field<RunConfig::Train>("train.train_epochs", &RunConfig::Train::train_epochs));
    f.push_back(field<RunConfig::Train>("train.num_batches", &RunConfig::Train::num_batches));
    f.push_back(field<RunConfig::Train>("train.hidden_dim", &RunConfig::Train::hidden_dim));
    f.push_back(field<RunConfig::Train>("train.hidden_layers", &RunConfig::Train::hidden_layers));
    f.push_back(field<RunConfig::Train>("train.adam_beta1", &RunConfig::Train::adam_beta1));
    f.push_back(field<RunConfig::Train>("train.adam_beta2", &RunConfig::Train::adam_beta2));
    f.push_back(field<RunConfig::Train>("train.adam_eps", &RunConfig::Train::adam_eps));
    f.push_back(field<RunConfig::Mir3>("mir3.lambda", &RunConfig::Mir3::lambda));
    f.push_back(field<RunConfig::Mir3>("mir3.mi_lr", &RunConfig::Mir3::mi_lr));
    f.push_back(field<RunConfig::Mir3>("mir3.mi_train_epochs", &RunConfig::Mir3::mi_train_epochs));
    f.push_back(field<RunConfig::Mir3>("mir3.mi_hidden_dim", &RunConfig::Mir3::mi_hidden_dim));
    f.push_back(field<RunConfig::Mir3>("mir3.mi_buffer_size", &RunConfig::Mir3::mi_buffer_size));
    f.push_back(field<RunConfig::Mir3>("mir3.mi_batch_size", &RunConfig::Mir3::mi_batch_size));
    f.push_back(field<RunConfig::M3ddpg>("m3ddpg.epsilon", &RunConfig::M3ddpg::epsilon));
    f.push_back(field<RunConfig::Attack>("attack.budget_steps", &RunConfig::Attack::budget_steps));
    f.push_back(field<RunConfig::Attack>("attack.partitions", &RunConfig::Attack::partitions));
    f.push_back(field<RunConfig::Attack>("attack.k_adversaries", &RunConfig::Attack::k_adversaries));
    f.push_back(field<RunConfig::Eval>("eval.episodes", &RunConfig::Eval::episodes));
    f.push_back(field<RunConfig::Eval>("eval.ci_level", &RunConfig::Eval::ci_level));
    return f;
  }();
  return fields;
}

const FieldBinding* find_binding(const std::string& key) {
  for (const auto& b : bindings())
    if (b.key == key) return &b;
  return nullptr;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void validate(const RunConfig& cfg) {
  algorithm_from_string(cfg.algorithm);  // throws on unknown value
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(cfg.env.n_agents >= 1, "env.n_agents: must be >= 1");
  require(cfg.env.v_max > 0.0, "env.v_max: must be > 0");
  require(cfg.env.max_episode_len >= 1, "env.max_episode_len: must be >= 1");
  require(cfg.env.history_window >= 1, "env.history_window: must be >= 1");
  require(cfg.train.total_timesteps >= 1, "train.total_timesteps: must be >= 1");
  require(cfg.train.lr > 0.0, "train.lr: must be > 0");
  require(cfg.train.actor_lr > 0.0, "train.actor_lr: must be > 0");
  require(cfg.train.critic_lr > 0.0, "train.critic_lr: must be > 0");
  require(cfg.train.gamma >= 0.0 && cfg.train.gamma < 1.0, "train.gamma: must be in [0,1)");
  require(cfg.train.tau > 0.0 && cfg.train.tau <= 1.0, "train.tau: must be in (0,1]");
  require(cfg.train.batch_size >= 1, "train.batch_size: must be >= 1");
  require(cfg.train.buffer_size >= 1, "train.buffer_size: must be >= 1");
  require(cfg.train.warmup_steps >= 0, "train.warmup_steps: must be >= 0");
  require(cfg.train.exploration_noise >= 0.0, "train.exploration_noise: must be >= 0");
  require(cfg.train.train_epochs >= 0, "train.train_epochs: must be >= 0");
  require(cfg.train.num_batches >= 1, "train.num_batches: must be >= 1");
  require(cfg.train.hidden_dim >= 1, "train.hidden_dim: must be >= 1");
  require(cfg.train.hidden_layers >= 1, "train.hidden_layers: must be >= 1");
  require(cfg.train.adam_beta1 >= 0.0 && cfg.train.adam_beta1 < 1.0,
          "train.adam_beta1: must be in [0,1)");
  require(cfg.train.adam_beta2 >= 0.0 && cfg.train.adam_beta2 < 1.0,
          "train.adam_beta2: must be in [0,1)");
  require(cfg.train.adam_eps > 0.0, "train.adam_eps: must be > 0");
  require(cfg.mir3.lambda >= 0.0, "mir3.lambda: must be >= 0");
  require(cfg.mir3.mi_lr > 0.0, "mir3.mi_lr: must be > 0");
  require(cfg.mir3.mi_train_epochs >= 0, "mir3.mi_train_epochs: must be >= 0");
  require(cfg.mir3.mi_hidden_dim >= 1, "mir3.mi_hidden_dim: must be >= 1");
  require(cfg.mir3.mi_buffer_size >= 1, "mir3.mi_buffer_size: must be >= 1");
  require(cfg.mir3.mi_batch_size >= 2, "mir3.mi_batch_size: must be >= 2");
  require(cfg.m3ddpg.epsilon >= 0.0, "m3ddpg.epsilon: must be >= 0");
  require(cfg.attack.budget_steps >= 1, "attack.budget_steps: must be >= 1");
  require(cfg.attack.k_adversaries >= 1 && cfg.attack.k_adversaries <= cfg.env.n_agents,
          "attack.k_adversaries: must be in [1, env.n_agents]");
  require(cfg.eval.episodes >= 0, "eval.episodes: must be >= 0");
  require(cfg.eval.ci_level > 0.0 && cfg.eval.ci_level < 1.0, "eval.ci_level: must be in (0,1)");
}

std::string serialize_config(const RunConfig& cfg, bool include_seed) {
  std::ostringstream out;
  std::string section;
  for (const auto& b : bindings()) {
    if (!include_seed && b.key == "seed") continue;
    const auto dot = b.key.find('.');
    const std::string sec = dot == std::string::npos ? "" : b.key.substr(0, dot);
    const std::string name = dot == std::string::npos ? b.key : b.key.substr(dot + 1);
    if (sec != section) {
      out << "\n[" << sec << "]\n";
      section = sec;
    }
    out << name << " = " << b.get(cfg) << "\n";
  }
  return out.str();
}

void set_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto* b = find_binding(key);
  if (b == nullptr) throw ConfigError("unknown config key '" + key + "'");
  b->set(cfg, value);
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config line " + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string full = section.empty() ? key : section + "." + key;
    set_config_key(cfg, full, value);
  }
  validate(cfg);
  return cfg;
}

RunConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config_text(text);
}

std::string config_hash(const RunConfig& cfg) {
  const std::string canonical = serialize_config(cfg, /*include_seed=*/false);
  return sha256_bytes(canonical.data(), canonical.size()).substr(0, 8);
}

std::string run_dir_name(const RunConfig& cfg) {
  return cfg.algorithm + "-" + config_hash(cfg) + "-s" + std::to_string(cfg.seed);
}

}  // namespace mir3
