#include "hidvfs/serialization.hpp"

#include <cmath>

#include "hidvfs/errors.hpp"

namespace hidvfs {

using nlohmann::json;

json to_json(const rl::Mlp& net) {
  return json{{"sizes", net.sizes()}, {"params", net.params()}};
}

rl::Mlp mlp_from_json(const json& j) {
  try {
    return rl::Mlp(j.at("sizes").get<std::vector<int>>(), j.at("params").get<std::vector<double>>());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed network snapshot: ") + e.what());
  }
}

json to_json(const rl::TrainConfig& c) {
  json j{{"lr", c.lr},
         {"gamma", c.gamma},
         {"batch_size", c.batch_size},
         {"sync_period", c.sync_period},
         {"eps_start", c.eps_start},
         {"eps_end", c.eps_end},
         {"eps_decay_frac", c.eps_decay_frac},
         {"plan_count", c.plan_count},
         {"reward_averaging", c.reward_averaging},
         {"horizon", c.horizon},
         {"hidden", c.hidden},
         {"dueling", c.dueling},
         {"double_q", c.double_q},
         {"grad_clip", c.grad_clip},
         {"train_steps_per_epoch", c.train_steps_per_epoch},
         {"replay_capacity", c.replay_capacity},
         {"real_ratio", c.real_ratio},
         {"include_latest", c.include_latest}};
  j["q_clip"] = c.q_clip ? json(*c.q_clip) : json(nullptr);
  return j;
}

double json_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(path + ": must be finite");
  return v;
}

int json_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path + ": expected an integer");
  return j.get<int>();
}

bool json_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ConfigError(path + ": expected true or false");
  return j.get<bool>();
}

std::string json_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path + ": expected a string");
  return j.get<std::string>();
}

rl::TrainConfig train_config_from_json(const json& j, const rl::TrainConfig& base,
                                       const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  rl::TrainConfig c = base;
  for (const auto& [key, v] : j.items()) {
    const std::string p = path + "." + key;
    if (key == "lr") c.lr = json_number(v, p);
    else if (key == "gamma") c.gamma = json_number(v, p);
    else if (key == "batch_size") c.batch_size = json_int(v, p);
    else if (key == "sync_period") c.sync_period = json_int(v, p);
    else if (key == "eps_start") c.eps_start = json_number(v, p);
    else if (key == "eps_end") c.eps_end = json_number(v, p);
    else if (key == "eps_decay_frac") c.eps_decay_frac = json_number(v, p);
    else if (key == "q_clip") {
      if (v.is_null() || (v.is_boolean() && !v.get<bool>())) c.q_clip.reset();
      else if (v.is_boolean()) c.q_clip = 10.0;
      else c.q_clip = json_number(v, p);
    } else if (key == "plan_count") c.plan_count = json_int(v, p);
    else if (key == "reward_averaging") c.reward_averaging = json_bool(v, p);
    else if (key == "horizon") c.horizon = json_int(v, p);
    else if (key == "hidden") {
      if (!v.is_array()) throw ConfigError(p + ": expected an array of layer sizes");
      c.hidden.clear();
      for (const auto& h : v) c.hidden.push_back(json_int(h, p));
    } else if (key == "dueling") c.dueling = json_bool(v, p);
    else if (key == "double_q") c.double_q = json_bool(v, p);
    else if (key == "grad_clip") c.grad_clip = json_number(v, p);
    else if (key == "train_steps_per_epoch") c.train_steps_per_epoch = json_int(v, p);
    else if (key == "real_ratio") c.real_ratio = json_number(v, p);
    else if (key == "include_latest") c.include_latest = json_bool(v, p);
    else if (key == "replay_capacity") {
      const int cap = json_int(v, p);
      if (cap < 1) throw ConfigError(p + ": must be >= 1");
      c.replay_capacity = static_cast<std::size_t>(cap);
    } else {
      throw ConfigError(p + ": unknown field");
    }
  }
  try {
    c.validate();
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    if (msg.rfind("train.", 0) == 0) msg = path + msg.substr(5);
    throw ConfigError(msg);
  }
  return c;
}

}  // namespace hidvfs
