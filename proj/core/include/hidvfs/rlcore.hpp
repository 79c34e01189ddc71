#pragma once

// Small dense networks and a dueling double DQN learner.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hidvfs/rng.hpp"

namespace hidvfs::rl {

// Fully connected ReLU network with a linear output layer. Parameters live in one flat
// vector: for each layer, the weight matrix (out x in, row-major) followed by the bias.
class Mlp {
 public:
  Mlp() = default;
  // Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
  Mlp(std::vector<int> sizes, Rng& rng);
  Mlp(std::vector<int> sizes, std::vector<double> params);

  struct Tape {
    std::vector<std::vector<double>> acts;  // acts[0] = input, acts[l] = layer l output
  };

  std::vector<double> forward(std::span<const double> x) const;
  std::vector<double> forward(std::span<const double> x, Tape& tape) const;
  // Adds dL/dparams into grad (size param_count()) and returns dL/dx.
  std::vector<double> backward(const Tape& tape, std::span<const double> dout,
                               std::span<double> grad) const;

  const std::vector<int>& sizes() const { return sizes_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  std::size_t param_count() const { return params_.size(); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

 private:
  std::vector<int> sizes_;
  std::vector<double> params_;
  std::vector<std::size_t> offsets_;  // start of each layer's weights

  void layout();
};

// Q[a] = V + A[a] - mean(A). std::domain_error on empty A.
std::vector<double> dueling_q(double v, std::span<const double> a);

// Index of the maximum, lowest index on ties. std::domain_error on empty input.
int argmax(std::span<const double> q);
// Indices of the k largest entries (ties to lower index), ascending.
std::vector<int> top_k(std::span<const double> q, int k);

// y = r + gamma * q_target_next[argmax q_online_next], or y = r when terminal; clipped to
// [-clip, clip] when a bound is given. std::domain_error on a length mismatch.
double double_dqn_target(double r, double gamma, std::span<const double> q_online_next,
                         std::span<const double> q_target_next, std::optional<double> clip,
                         bool terminal = false);
// Set-valued actions whose value is the member mean: the online network picks the top-k
// members, the target network evaluates their mean. k = 1 reduces to double_dqn_target.
double double_dqn_target_set(double r, double gamma, std::span<const double> q_online_next,
                             std::span<const double> q_target_next, int k,
                             std::optional<double> clip, bool terminal = false);

// Uniform random action with probability eps, else argmax. std::domain_error on empty q
// or eps outside [0, 1].
int select_action(std::span<const double> q, double eps, Rng& rng);

enum class Source { real, model };

struct Transition {
  std::vector<double> state;
  int action = 0;
  std::vector<int> action_set;  // non-empty for set-valued actions
  double reward = 0.0;
  std::vector<double> next_state;
  bool terminal = false;
  Source source = Source::real;

  int set_size() const { return action_set.empty() ? 1 : static_cast<int>(action_set.size()); }
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 2000);

  void push(Transition t);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return data_.empty(); }
  // i = 0 is the oldest retained entry.
  const Transition& at(std::size_t i) const;
  // Up to n most recent entries, oldest first.
  std::vector<Transition> recent(std::size_t n) const;
  // n distinct entries, uniformly. std::domain_error when n > size().
  std::vector<const Transition*> sample(std::size_t n, Rng& rng) const;
  // Same, drawn from every entry except the newest.
  std::vector<const Transition*> sample_older(std::size_t n, Rng& rng) const;
  void clear();

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // oldest entry once full
  std::vector<Transition> data_;

  std::vector<const Transition*> sample_first(std::size_t pool, std::size_t n, Rng& rng) const;
};

struct TrainConfig {
  double lr = 0.01;
  double gamma = 0.9;
  int batch_size = 16;
  int sync_period = 20;  // train steps between target-network copies
  double eps_start = 1.0;
  double eps_end = 0.05;
  double eps_decay_frac = 0.4;  // fraction of the phase over which eps decays linearly
  std::optional<double> q_clip;  // symmetric bound on training targets
  int plan_count = 20;
  bool reward_averaging = true;
  int horizon = 2;
  std::vector<int> hidden{64, 64};
  bool dueling = true;
  bool double_q = true;
  double grad_clip = 5.0;
  int train_steps_per_epoch = 16;
  std::size_t replay_capacity = 2000;
  double real_ratio = 0.5;  // share of each batch drawn from real transitions when both exist
  bool include_latest = true;  // combined experience replay: newest real transition joins every batch

  // Throws hidvfs::ConfigError naming the offending field.
  void validate() const;
  double epsilon(int epoch, int total_epochs) const;
};

// Q-network over an Mlp; with dueling the last layer emits [V, A_0..A_{n-1}].
class QNetwork {
 public:
  QNetwork() = default;
  QNetwork(int state_dim, int n_actions, const std::vector<int>& hidden, bool dueling, Rng& rng);
  QNetwork(Mlp net, int n_actions, bool dueling);

  std::vector<double> q(std::span<const double> s) const;
  std::vector<double> q(std::span<const double> s, Mlp::Tape& tape) const;
  // Back-propagates dL/dQ (per action) into grad.
  void backward(const Mlp::Tape& tape, std::span<const double> dq, std::span<double> grad) const;

  int n_actions() const { return n_actions_; }
  int state_dim() const { return net_.input_size(); }
  bool dueling() const { return dueling_; }
  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }

 private:
  Mlp net_;
  int n_actions_ = 0;
  bool dueling_ = true;
};

// Q of a transition's action: q[action], or the mean over action_set.
double action_value(std::span<const double> q, const Transition& t);

struct StepStats {
  double loss = 0.0;
  double max_abs_target = 0.0;
  double max_abs_q = 0.0;
  std::vector<double> targets;
};

// Mean squared TD error and its gradient w.r.t. the online parameters.
StepStats loss_and_gradient(const QNetwork& online, const QNetwork& target,
                            std::span<const Transition* const> batch, const TrainConfig& cfg,
                            std::vector<double>& grad);

// One SGD step with gradient-norm clipping. Throws hidvfs::TrainingError on a non-finite loss.
StepStats train_step(QNetwork& online, const QNetwork& target,
                     std::span<const Transition* const> batch, const TrainConfig& cfg);

class DqnAgent {
 public:
  DqnAgent(int state_dim, int n_actions, TrainConfig cfg, std::uint64_t seed);

  std::vector<double> q_values(std::span<const double> s) const { return online_.q(s); }
  int act(std::span<const double> s, double eps);
  // Samples a batch mixing real and model transitions by real_ratio, trains once, syncs the
  // target network on schedule. Returns nullopt when fewer than batch_size transitions exist.
  std::optional<StepStats> train(const ReplayBuffer& real, const ReplayBuffer* model);

  const TrainConfig& config() const { return cfg_; }
  TrainConfig& config_mut() { return cfg_; }
  QNetwork& online() { return online_; }
  const QNetwork& online() const { return online_; }
  const QNetwork& target() const { return target_; }
  std::int64_t train_steps() const { return steps_; }
  Rng& rng() { return rng_; }

  nlohmann::json snapshot() const;
  static DqnAgent from_snapshot(const nlohmann::json& j);

 private:
  TrainConfig cfg_;
  QNetwork online_;
  QNetwork target_;
  std::int64_t steps_ = 0;
  Rng rng_;
};

}  // namespace hidvfs::rl
