#pragma once

// Learned one-step dynamics used to refine rewards with predicted future outcomes.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hidvfs/rlcore.hpp"

namespace hidvfs::envmodel {

using rl::Transition;

struct Action {
  int index = 0;
  std::vector<int> set;  // non-empty for set-valued actions
};

using Policy = std::function<Action(std::span<const double>)>;
// Maps an action to model input features; the default is a multi-hot over action indices.
using ActionEncoder = std::function<std::vector<double>(const Action&)>;

struct Prediction {
  std::vector<double> next_state;
  double reward = 0.0;
};

class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual Prediction predict(std::span<const double> state, const Action& action) const = 0;
};

struct ModelConfig {
  std::vector<int> hidden{32, 32};
  double lr = 0.005;  // Adam step size
  double beta1 = 0.9;
  double beta2 = 0.999;
  int batch_size = 32;
  int fit_steps = 20;        // per epoch during agent training
  std::size_t window = 150;  // most recent real transitions used per fit
};

// Input: state features concatenated with a multi-hot action encoding, each scaled by
// d * softmax(logits)_i. Output: next-state features followed by the reward.
class DynamicsModel : public Predictor {
 public:
  DynamicsModel(int state_dim, int n_actions, ModelConfig cfg, std::uint64_t seed);
  DynamicsModel(int state_dim, int action_dim, ActionEncoder encoder, ModelConfig cfg,
                std::uint64_t seed);

  Prediction predict(std::span<const double> state, const Action& action) const override;

  // Adam steps on minibatches drawn from `real`; returns the per-step loss. Throws
  // std::domain_error if any transition is model-generated and hidvfs::TrainingError on a
  // non-finite loss.
  std::vector<double> fit(std::span<const Transition> real, int steps);

  std::vector<double> attention() const;
  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }
  const ModelConfig& config() const { return cfg_; }

  nlohmann::json snapshot() const;

 private:
  int state_dim_;
  int action_dim_;
  ActionEncoder encoder_;
  ModelConfig cfg_;
  Rng rng_;
  rl::Mlp net_;
  std::vector<double> logits_;
  std::vector<double> m_, v_;  // Adam moments over [net params, logits]
  std::int64_t t_ = 0;

  std::vector<double> encode(std::span<const double> state, const Action& action) const;
  std::vector<double> scaled(std::span<const double> x) const;
};

Action action_of(const Transition& t);

// Model-generated transitions from `state` following `policy`, all tagged Source::model.
std::vector<Transition> rollout(const Predictor& model, std::span<const double> state,
                                const Policy& policy, int horizon);

// r + sum_{t=1..horizon} gamma^t * rhat_t along a rollout from t.next_state; divided by
// horizon + 1 when averaging. Terminal transitions have no future.
double shaped_reward(const Transition& t, const Predictor& model, const Policy& policy,
                     int horizon, double gamma, bool averaging);

}  // namespace hidvfs::envmodel
