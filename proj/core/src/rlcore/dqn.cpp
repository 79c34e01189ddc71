#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "hidvfs/errors.hpp"
#include "hidvfs/rlcore.hpp"
#include "hidvfs/serialization.hpp"

namespace hidvfs::rl {

std::vector<double> dueling_q(double v, std::span<const double> a) {
  if (a.empty()) throw std::domain_error("dueling_q: empty advantage vector");
  const double mean = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
  std::vector<double> q(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) q[i] = v + a[i] - mean;
  return q;
}

int argmax(std::span<const double> q) {
  if (q.empty()) throw std::domain_error("argmax of an empty vector");
  return static_cast<int>(std::max_element(q.begin(), q.end()) - q.begin());
}

std::vector<int> top_k(std::span<const double> q, int k) {
  if (k < 1 || k > static_cast<int>(q.size())) throw std::domain_error("top_k: k out of range");
  std::vector<int> idx(q.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return q[static_cast<std::size_t>(a)] > q[static_cast<std::size_t>(b)];
  });
  idx.resize(static_cast<std::size_t>(k));
  std::sort(idx.begin(), idx.end());
  return idx;
}

namespace {
double clip_to(double y, std::optional<double> clip) {
  return clip ? std::clamp(y, -*clip, *clip) : y;
}
}  // namespace

double double_dqn_target(double r, double gamma, std::span<const double> q_online_next,
                         std::span<const double> q_target_next, std::optional<double> clip,
                         bool terminal) {
  return double_dqn_target_set(r, gamma, q_online_next, q_target_next, 1, clip, terminal);
}

double double_dqn_target_set(double r, double gamma, std::span<const double> q_online_next,
                             std::span<const double> q_target_next, int k,
                             std::optional<double> clip, bool terminal) {
  if (q_online_next.size() != q_target_next.size())
    throw std::domain_error("double_dqn_target: online/target lengths differ");
  if (terminal) return clip_to(r, clip);
  if (q_online_next.empty()) throw std::domain_error("double_dqn_target: empty Q vectors");
  double v = 0.0;
  if (k == 1) {
    v = q_target_next[static_cast<std::size_t>(argmax(q_online_next))];
  } else {
    for (int a : top_k(q_online_next, k)) v += q_target_next[static_cast<std::size_t>(a)];
    v /= k;
  }
  return clip_to(r + gamma * v, clip);
}

int select_action(std::span<const double> q, double eps, Rng& rng) {
  if (q.empty()) throw std::domain_error("select_action: empty Q vector");
  if (!(eps >= 0.0 && eps <= 1.0)) throw std::domain_error("select_action: eps outside [0, 1]");
  if (eps > 0.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (u(rng) < eps) {
      std::uniform_int_distribution<int> pick(0, static_cast<int>(q.size()) - 1);
      return pick(rng);
    }
  }
  return argmax(q);
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::domain_error("replay capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
    return;
  }
  data_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= data_.size()) throw std::out_of_range("replay index out of range");
  return data_[(head_ + i) % data_.size()];
}

std::vector<Transition> ReplayBuffer::recent(std::size_t n) const {
  n = std::min(n, data_.size());
  std::vector<Transition> out;
  out.reserve(n);
  for (std::size_t i = data_.size() - n; i < data_.size(); ++i) out.push_back(at(i));
  return out;
}

std::vector<const Transition*> ReplayBuffer::sample_first(std::size_t pool, std::size_t n,
                                                          Rng& rng) const {
  if (n > pool) throw std::domain_error("replay sample larger than buffer");
  std::vector<std::size_t> idx(pool);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<const Transition*> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
    out.push_back(&at(idx[i]));
  }
  return out;
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  return sample_first(data_.size(), n, rng);
}

std::vector<const Transition*> ReplayBuffer::sample_older(std::size_t n, Rng& rng) const {
  return sample_first(data_.empty() ? 0 : data_.size() - 1, n, rng);
}

void ReplayBuffer::clear() {
  data_.clear();
  head_ = 0;
}

void TrainConfig::validate() const {
  auto bad = [](const std::string& field, const std::string& why) {
    throw ConfigError("train." + field + ": " + why);
  };
  if (!(lr > 0.0) || !std::isfinite(lr)) bad("lr", "must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0)) bad("gamma", "must lie in (0, 1]");
  if (batch_size < 1) bad("batch_size", "must be >= 1");
  if (sync_period < 1) bad("sync_period", "must be >= 1");
  if (!(eps_start >= 0.0 && eps_start <= 1.0)) bad("eps_start", "must lie in [0, 1]");
  if (!(eps_end >= 0.0 && eps_end <= 1.0)) bad("eps_end", "must lie in [0, 1]");
  if (!(eps_decay_frac > 0.0 && eps_decay_frac <= 1.0)) bad("eps_decay_frac", "must lie in (0, 1]");
  if (q_clip && !(*q_clip > 0.0)) bad("q_clip", "bound must be positive");
  if (plan_count < 0) bad("plan_count", "must be >= 0");
  if (horizon < 0) bad("horizon", "must be >= 0");
  if (hidden.empty()) bad("hidden", "needs at least one layer");
  for (int h : hidden)
    if (h < 1) bad("hidden", "layer sizes must be >= 1");
  if (!(grad_clip > 0.0)) bad("grad_clip", "must be positive");
  if (train_steps_per_epoch < 0) bad("train_steps_per_epoch", "must be >= 0");
  if (!(real_ratio >= 0.0 && real_ratio <= 1.0)) bad("real_ratio", "must lie in [0, 1]");
  if (replay_capacity < static_cast<std::size_t>(batch_size))
    bad("replay_capacity", "must be >= batch_size");
}

double TrainConfig::epsilon(int epoch, int total_epochs) const {
  const double span = std::max(1.0, eps_decay_frac * total_epochs);
  if (epoch >= span) return eps_end;
  return eps_start + (eps_end - eps_start) * (epoch / span);
}

QNetwork::QNetwork(int state_dim, int n_actions, const std::vector<int>& hidden, bool dueling,
                   Rng& rng)
    : n_actions_(n_actions), dueling_(dueling) {
  if (n_actions < 1) throw std::domain_error("QNetwork needs at least one action");
  std::vector<int> sizes{state_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(dueling ? n_actions + 1 : n_actions);
  net_ = Mlp(sizes, rng);
}

QNetwork::QNetwork(Mlp net, int n_actions, bool dueling)
    : net_(std::move(net)), n_actions_(n_actions), dueling_(dueling) {
  if (net_.output_size() != (dueling ? n_actions + 1 : n_actions))
    throw std::domain_error("QNetwork head size does not match the action count");
}

std::vector<double> QNetwork::q(std::span<const double> s) const {
  Mlp::Tape t;
  return q(s, t);
}

std::vector<double> QNetwork::q(std::span<const double> s, Mlp::Tape& tape) const {
  auto out = net_.forward(s, tape);
  if (!dueling_) return out;
  return dueling_q(out[0], std::span<const double>(out).subspan(1));
}

void QNetwork::backward(const Mlp::Tape& tape, std::span<const double> dq,
                        std::span<double> grad) const {
  if (!dueling_) {
    net_.backward(tape, dq, grad);
    return;
  }
  const double sum = std::accumulate(dq.begin(), dq.end(), 0.0);
  const double mean = sum / static_cast<double>(dq.size());
  std::vector<double> dout(dq.size() + 1);
  dout[0] = sum;
  for (std::size_t a = 0; a < dq.size(); ++a) dout[a + 1] = dq[a] - mean;
  net_.backward(tape, dout, grad);
}

double action_value(std::span<const double> q, const Transition& t) {
  if (t.action_set.empty()) return q[static_cast<std::size_t>(t.action)];
  double v = 0.0;
  for (int a : t.action_set) v += q[static_cast<std::size_t>(a)];
  return v / static_cast<double>(t.action_set.size());
}

StepStats loss_and_gradient(const QNetwork& online, const QNetwork& target,
                            std::span<const Transition* const> batch, const TrainConfig& cfg,
                            std::vector<double>& grad) {
  if (batch.empty()) throw std::domain_error("train_step: empty batch");
  grad.assign(online.net().param_count(), 0.0);
  StepStats st;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  Mlp::Tape tape;
  std::vector<double> dq(static_cast<std::size_t>(online.n_actions()));
  for (const Transition* t : batch) {
    const auto q = online.q(t->state, tape);
    const double qa = action_value(q, *t);
    double y = 0.0;
    if (t->terminal) {
      y = clip_to(t->reward, cfg.q_clip);
    } else {
      const auto qt = target.q(t->next_state);
      const auto qo = cfg.double_q ? online.q(t->next_state) : qt;
      y = double_dqn_target_set(t->reward, cfg.gamma, qo, qt, t->set_size(), cfg.q_clip);
    }
    const double diff = qa - y;
    st.loss += diff * diff * inv_b;
    st.max_abs_target = std::max(st.max_abs_target, std::abs(y));
    for (double v : q) st.max_abs_q = std::max(st.max_abs_q, std::abs(v));
    st.targets.push_back(y);
    std::fill(dq.begin(), dq.end(), 0.0);
    if (t->action_set.empty()) {
      dq[static_cast<std::size_t>(t->action)] = 2.0 * diff * inv_b;
    } else {
      const double share = 2.0 * diff * inv_b / static_cast<double>(t->action_set.size());
      for (int a : t->action_set) dq[static_cast<std::size_t>(a)] += share;
    }
    online.backward(tape, dq, grad);
  }
  return st;
}

StepStats train_step(QNetwork& online, const QNetwork& target,
                     std::span<const Transition* const> batch, const TrainConfig& cfg) {
  std::vector<double> grad;
  StepStats st = loss_and_gradient(online, target, batch, cfg, grad);
  if (!std::isfinite(st.loss)) throw TrainingError("non-finite training loss");
  double norm2 = 0.0;
  for (double g : grad) norm2 += g * g;
  const double norm = std::sqrt(norm2);
  if (!std::isfinite(norm)) throw TrainingError("non-finite gradient");
  const double scale = norm > cfg.grad_clip ? cfg.grad_clip / norm : 1.0;
  auto& p = online.net().params();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] -= cfg.lr * scale * grad[i];
  return st;
}

DqnAgent::DqnAgent(int state_dim, int n_actions, TrainConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)), rng_(seed) {
  cfg_.validate();
  online_ = QNetwork(state_dim, n_actions, cfg_.hidden, cfg_.dueling, rng_);
  target_ = online_;
}

int DqnAgent::act(std::span<const double> s, double eps) {
  return select_action(online_.q(s), eps, rng_);
}

std::optional<StepStats> DqnAgent::train(const ReplayBuffer& real, const ReplayBuffer* model) {
  const std::size_t n_real = real.size();
  const std::size_t n_model = model ? model->size() : 0;
  const auto b = static_cast<std::size_t>(cfg_.batch_size);
  if (n_real + n_model < b) return std::nullopt;
  std::size_t take_real = b;
  if (n_model > 0) {
    const auto want = static_cast<std::size_t>(std::lround(cfg_.real_ratio * static_cast<double>(b)));
    take_real = std::min(n_real, want);
    take_real = std::max(take_real, b - std::min(n_model, b - take_real));
    take_real = std::min(take_real, n_real);
  }
  const std::size_t take_model = b - take_real;
  std::vector<const Transition*> batch;
  if (cfg_.include_latest && take_real > 0) {
    // The newest transition is always in; the rest come from the older ones.
    batch = real.sample_older(take_real - 1, rng_);
    batch.push_back(&real.at(n_real - 1));
  } else {
    batch = real.sample(take_real, rng_);
  }
  if (take_model > 0) {
    const auto extra = model->sample(take_model, rng_);
    batch.insert(batch.end(), extra.begin(), extra.end());
  }
  StepStats st = train_step(online_, target_, batch, cfg_);
  if (++steps_ % cfg_.sync_period == 0) target_ = online_;
  return st;
}

nlohmann::json DqnAgent::snapshot() const {
  std::ostringstream rs;
  rs << rng_;
  return nlohmann::json{{"schema", "hidvfs.policy.v1"},
                        {"kind", "dqn"},
                        {"state_dim", online_.state_dim()},
                        {"n_actions", online_.n_actions()},
                        {"dueling", online_.dueling()},
                        {"config", to_json(cfg_)},
                        {"online", to_json(online_.net())},
                        {"target", to_json(target_.net())},
                        {"train_steps", steps_},
                        {"rng", rs.str()}};
}

DqnAgent DqnAgent::from_snapshot(const nlohmann::json& j) {
  if (j.value("schema", "") != "hidvfs.policy.v1" || j.value("kind", "") != "dqn")
    throw ConfigError("not a hidvfs.policy.v1 dqn snapshot");
  TrainConfig cfg = train_config_from_json(j.at("config"), TrainConfig{}, "config");
  DqnAgent a(j.at("state_dim").get<int>(), j.at("n_actions").get<int>(), cfg, 0);
  const bool dueling = j.at("dueling").get<bool>();
  const int n = j.at("n_actions").get<int>();
  a.online_ = QNetwork(mlp_from_json(j.at("online")), n, dueling);
  a.target_ = QNetwork(mlp_from_json(j.at("target")), n, dueling);
  a.steps_ = j.at("train_steps").get<std::int64_t>();
  std::istringstream rs(j.at("rng").get<std::string>());
  rs >> a.rng_;
  return a;
}

}  // namespace hidvfs::rl
