#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "hidvfs/rlcore.hpp"

namespace hidvfs::rl {

void Mlp::layout() {
  if (sizes_.size() < 2) throw std::domain_error("Mlp needs at least input and output sizes");
  offsets_.clear();
  std::size_t off = 0;
  for (std::size_t l = 1; l < sizes_.size(); ++l) {
    if (sizes_[l - 1] < 1 || sizes_[l] < 1) throw std::domain_error("Mlp layer sizes must be >= 1");
    offsets_.push_back(off);
    off += static_cast<std::size_t>(sizes_[l]) * static_cast<std::size_t>(sizes_[l - 1] + 1);
  }
  offsets_.push_back(off);
}

Mlp::Mlp(std::vector<int> sizes, Rng& rng) : sizes_(std::move(sizes)) {
  layout();
  params_.assign(offsets_.back(), 0.0);
  for (std::size_t l = 1; l < sizes_.size(); ++l) {
    const auto in = static_cast<std::size_t>(sizes_[l - 1]);
    const auto out = static_cast<std::size_t>(sizes_[l]);
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> u(-bound, bound);
    double* w = params_.data() + offsets_[l - 1];
    for (std::size_t i = 0; i < in * out; ++i) w[i] = u(rng);
  }
}

Mlp::Mlp(std::vector<int> sizes, std::vector<double> params)
    : sizes_(std::move(sizes)), params_(std::move(params)) {
  layout();
  if (params_.size() != offsets_.back())
    throw std::domain_error("Mlp parameter vector does not match layer sizes");
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
  Tape t;
  return forward(x, t);
}

std::vector<double> Mlp::forward(std::span<const double> x, Tape& tape) const {
  if (static_cast<int>(x.size()) != input_size())
    throw std::domain_error("Mlp input has " + std::to_string(x.size()) + " features, expected " +
                            std::to_string(input_size()));
  const std::size_t layers = sizes_.size() - 1;
  tape.acts.resize(layers + 1);
  tape.acts[0].assign(x.begin(), x.end());
  for (std::size_t l = 1; l <= layers; ++l) {
    const auto in = static_cast<std::size_t>(sizes_[l - 1]);
    const auto out = static_cast<std::size_t>(sizes_[l]);
    const double* w = params_.data() + offsets_[l - 1];
    const double* b = w + in * out;
    const auto& a = tape.acts[l - 1];
    auto& z = tape.acts[l];
    z.assign(out, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      double s = b[o];
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) s += row[i] * a[i];
      z[o] = (l < layers) ? std::max(0.0, s) : s;
    }
  }
  return tape.acts.back();
}

std::vector<double> Mlp::backward(const Tape& tape, std::span<const double> dout,
                                  std::span<double> grad) const {
  const std::size_t layers = sizes_.size() - 1;
  if (grad.size() != params_.size()) throw std::domain_error("gradient buffer has wrong size");
  if (static_cast<int>(dout.size()) != output_size())
    throw std::domain_error("output gradient has wrong size");
  std::vector<double> delta(dout.begin(), dout.end());
  std::vector<double> prev;
  for (std::size_t l = layers; l >= 1; --l) {
    const auto in = static_cast<std::size_t>(sizes_[l - 1]);
    const auto out = static_cast<std::size_t>(sizes_[l]);
    const double* w = params_.data() + offsets_[l - 1];
    double* gw = grad.data() + offsets_[l - 1];
    double* gb = gw + in * out;
    const auto& a = tape.acts[l - 1];
    prev.assign(in, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      gb[o] += d;
      const double* row = w + o * in;
      double* grow = gw + o * in;
      for (std::size_t i = 0; i < in; ++i) {
        grow[i] += d * a[i];
        prev[i] += d * row[i];
      }
    }
    if (l > 1) {
      for (std::size_t i = 0; i < in; ++i)
        if (a[i] <= 0.0) prev[i] = 0.0;
    }
    delta.swap(prev);
  }
  return delta;
}

}  // namespace hidvfs::rl
