#include "hidvfs/envmodel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "hidvfs/errors.hpp"
#include "hidvfs/serialization.hpp"

namespace hidvfs::envmodel {

DynamicsModel::DynamicsModel(int state_dim, int n_actions, ModelConfig cfg, std::uint64_t seed)
    : DynamicsModel(state_dim, n_actions, nullptr, std::move(cfg), seed) {}

DynamicsModel::DynamicsModel(int state_dim, int action_dim, ActionEncoder encoder,
                             ModelConfig cfg, std::uint64_t seed)
    : state_dim_(state_dim),
      action_dim_(action_dim),
      encoder_(std::move(encoder)),
      cfg_(std::move(cfg)),
      rng_(seed) {
  if (state_dim < 1 || action_dim < 1)
    throw std::domain_error("DynamicsModel: empty state or action encoding");
  std::vector<int> sizes{state_dim + action_dim};
  sizes.insert(sizes.end(), cfg_.hidden.begin(), cfg_.hidden.end());
  sizes.push_back(state_dim + 1);
  net_ = rl::Mlp(sizes, rng_);
  logits_.assign(static_cast<std::size_t>(state_dim + action_dim), 0.0);
  m_.assign(net_.param_count() + logits_.size(), 0.0);
  v_ = m_;
}

std::vector<double> DynamicsModel::attention() const {
  const double mx = *std::max_element(logits_.begin(), logits_.end());
  std::vector<double> w(logits_.size());
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += (w[i] = std::exp(logits_[i] - mx));
  for (double& x : w) x /= s;
  return w;
}

std::vector<double> DynamicsModel::encode(std::span<const double> state, const Action& a) const {
  if (static_cast<int>(state.size()) != state_dim_)
    throw std::domain_error("DynamicsModel: state has the wrong number of features");
  std::vector<double> x(state.begin(), state.end());
  if (encoder_) {
    const auto f = encoder_(a);
    if (static_cast<int>(f.size()) != action_dim_)
      throw std::domain_error("DynamicsModel: action encoder returned the wrong width");
    x.insert(x.end(), f.begin(), f.end());
    return x;
  }
  x.resize(static_cast<std::size_t>(state_dim_ + action_dim_), 0.0);
  auto mark = [&](int idx) {
    if (idx < 0 || idx >= action_dim_) throw std::domain_error("DynamicsModel: action out of range");
    x[static_cast<std::size_t>(state_dim_ + idx)] = 1.0;
  };
  if (a.set.empty()) mark(a.index);
  for (int idx : a.set) mark(idx);
  return x;
}

std::vector<double> DynamicsModel::scaled(std::span<const double> x) const {
  const auto w = attention();
  const double d = static_cast<double>(w.size());
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = d * w[i] * x[i];
  return out;
}

Prediction DynamicsModel::predict(std::span<const double> state, const Action& action) const {
  const auto y = net_.forward(scaled(encode(state, action)));
  Prediction p;
  p.next_state.assign(y.begin(), y.end() - 1);
  p.reward = y.back();
  return p;
}

std::vector<double> DynamicsModel::fit(std::span<const Transition> real, int steps) {
  if (real.empty()) throw std::domain_error("fit needs at least one real transition");
  for (const auto& t : real)
    if (t.source != rl::Source::real)
      throw std::domain_error("fit received a model-generated transition");
  std::vector<std::vector<double>> xs, ys;
  for (const auto& t : real) {
    xs.push_back(encode(t.state, action_of(t)));
    std::vector<double> y = t.next_state;
    if (static_cast<int>(y.size()) != state_dim_)
      throw std::domain_error("fit: next_state has the wrong number of features");
    y.push_back(t.reward);
    ys.push_back(std::move(y));
  }
  const std::size_t n = xs.size();
  const std::size_t b = std::min(n, static_cast<std::size_t>(std::max(1, cfg_.batch_size)));
  const std::size_t np = net_.param_count();
  const std::size_t nin = logits_.size();
  const double d = static_cast<double>(nin);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> grad(np + nin);
  std::vector<double> history;
  rl::Mlp::Tape tape;
  for (int step = 0; step < steps; ++step) {
    for (std::size_t i = 0; i < b; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(idx[i], idx[pick(rng_)]);
    }
    const auto w = attention();
    std::fill(grad.begin(), grad.end(), 0.0);
    std::span<double> gnet(grad.data(), np);
    std::vector<double> dw(nin, 0.0);
    double loss = 0.0;
    const double norm = 1.0 / static_cast<double>(b * ys.front().size());
    for (std::size_t k = 0; k < b; ++k) {
      const auto& x = xs[idx[k]];
      const auto& y = ys[idx[k]];
      std::vector<double> xt(nin);
      for (std::size_t i = 0; i < nin; ++i) xt[i] = d * w[i] * x[i];
      const auto out = net_.forward(xt, tape);
      std::vector<double> dout(out.size());
      for (std::size_t o = 0; o < out.size(); ++o) {
        const double e = out[o] - y[o];
        loss += e * e * norm;
        dout[o] = 2.0 * e * norm;
      }
      const auto dx = net_.backward(tape, dout, gnet);
      for (std::size_t i = 0; i < nin; ++i) dw[i] += dx[i] * d * x[i];
    }
    if (!std::isfinite(loss)) throw TrainingError("environment model loss is not finite");
    const double wdot = std::inner_product(w.begin(), w.end(), dw.begin(), 0.0);
    for (std::size_t j = 0; j < nin; ++j) grad[np + j] = w[j] * (dw[j] - wdot);

    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    auto& p = net_.params();
    for (std::size_t i = 0; i < grad.size(); ++i) {
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
      const double upd = cfg_.lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + 1e-8);
      if (i < np) p[i] -= upd;
      else logits_[i - np] -= upd;
    }
    history.push_back(loss);
  }
  return history;
}

nlohmann::json DynamicsModel::snapshot() const {
  return nlohmann::json{{"schema", "hidvfs.policy.v1"},
                        {"kind", "dynamics"},
                        {"state_dim", state_dim_},
                        {"action_dim", action_dim_},
                        {"net", to_json(net_)},
                        {"attention_logits", logits_}};
}

Action action_of(const Transition& t) { return Action{t.action, t.action_set}; }

std::vector<Transition> rollout(const Predictor& model, std::span<const double> state,
                                const Policy& policy, int horizon) {
  if (horizon < 0) throw std::domain_error("rollout: horizon must be >= 0");
  std::vector<Transition> out;
  std::vector<double> s(state.begin(), state.end());
  for (int h = 0; h < horizon; ++h) {
    const Action a = policy(s);
    auto p = model.predict(s, a);
    Transition t;
    t.state = s;
    t.action = a.index;
    t.action_set = a.set;
    t.reward = p.reward;
    t.next_state = p.next_state;
    t.source = rl::Source::model;
    s = std::move(p.next_state);
    out.push_back(std::move(t));
  }
  return out;
}

double shaped_reward(const Transition& t, const Predictor& model, const Policy& policy,
                     int horizon, double gamma, bool averaging) {
  if (horizon < 0) throw std::domain_error("shaped_reward: horizon must be >= 0");
  if (horizon == 0) return t.reward;
  double r = t.reward;
  if (!t.terminal) {
    double g = 1.0;
    for (const auto& step : rollout(model, t.next_state, policy, horizon)) {
      g *= gamma;
      r += g * step.reward;
    }
  }
  return averaging ? r / (horizon + 1) : r;
}

}  // namespace hidvfs::envmodel
