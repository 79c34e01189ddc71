#include "hidvfs/workload.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <stdexcept>

#include "hidvfs/errors.hpp"

namespace hidvfs::workload {

const char* to_string(Variant v) {
  switch (v) {
    case Variant::serial: return "serial";
    case Variant::tied: return "tied";
    case Variant::untied: return "untied";
  }
  return "?";
}

const char* to_string(Binding b) { return b == Binding::tied ? "tied" : "untied"; }

double DagTask::total_work() const {
  double w = 0.0;
  for (const auto& s : subtasks) w += s.work;
  return w;
}

double WorkloadModelParams::kappa(Variant v) const {
  switch (v) {
    case Variant::serial: return 0.0;
    case Variant::tied: return kappa_tied;
    case Variant::untied: return kappa_untied;
  }
  return 0.0;
}

double WorkloadModelParams::sigma(Variant v) const {
  return v == Variant::serial ? jitter_sigma : jitter_sigma * parallel_jitter_factor;
}

namespace {

enum class Shape { recursion, butterfly, fork_join, irregular };

struct Family {
  const char* name;
  Shape shape;
  double total_work;  // kilocycles at scale 1
  int a;              // shape parameters, meaning depends on shape
  int b;
};

// recursion: a = fan-out, b = base depth; butterfly: a = points per scale;
// fork_join: a = rounds, b = width per scale; irregular: a = nodes per scale, b = max deps.
const std::vector<Family>& families() {
  static const std::vector<Family> f = {
      {"alignment", Shape::fork_join, 5.0e6, 1, 10},
      {"concom", Shape::irregular, 8.0e6, 30, 2},
      {"fft", Shape::butterfly, 6.0e6, 8, 0},
      {"fib", Shape::recursion, 2.0e6, 2, 3},
      {"floorplan", Shape::recursion, 3.0e6, 3, 1},
      {"health", Shape::irregular, 5.0e6, 40, 2},
      {"knapsack", Shape::recursion, 2.5e6, 2, 3},
      {"nqueens", Shape::recursion, 3.0e6, 3, 1},
      {"sort", Shape::fork_join, 8.0e6, 4, 4},
      {"sparselu", Shape::fork_join, 3.0e6, 5, 3},
      {"strassen", Shape::fork_join, 4.0e6, 2, 7},
      {"uts", Shape::irregular, 6.0e6, 30, 2},
  };
  return f;
}

// Nodes under construction: deps plus a relative weight (light for spawn/join nodes).
struct Skeleton {
  std::vector<std::vector<int>> deps;
  std::vector<double> weight;

  int add(std::vector<int> d, double w) {
    deps.push_back(std::move(d));
    weight.push_back(w);
    return static_cast<int>(deps.size()) - 1;
  }
};

constexpr double kLight = 0.1;

std::pair<int, int> build_recursion(Skeleton& sk, int fanout, int depth, std::vector<int> parent_deps,
                                    Rng& rng) {
  std::uniform_real_distribution<double> u(0.5, 1.5);
  if (depth == 0) {
    int leaf = sk.add(std::move(parent_deps), u(rng));
    return {leaf, leaf};
  }
  int entry = sk.add(std::move(parent_deps), kLight);
  std::vector<int> exits;
  for (int i = 0; i < fanout; ++i) {
    auto [e, x] = build_recursion(sk, fanout, depth - 1, {entry}, rng);
    (void)e;
    exits.push_back(x);
  }
  int join = sk.add(exits, kLight);
  return {entry, join};
}

Skeleton make_skeleton(const Family& fam, int scale, Rng& rng) {
  Skeleton sk;
  std::uniform_real_distribution<double> u(0.5, 1.5);
  switch (fam.shape) {
    case Shape::recursion: {
      build_recursion(sk, fam.a, fam.b + scale, {}, rng);
      break;
    }
    case Shape::butterfly: {
      int points = 1;
      while (points < fam.a * scale) points *= 2;
      int stages = 0;
      while ((1 << stages) < points) ++stages;
      int source = sk.add({}, kLight);
      std::vector<int> prev(static_cast<std::size_t>(points));
      for (int i = 0; i < points; ++i) prev[static_cast<std::size_t>(i)] = sk.add({source}, u(rng));
      for (int s = 1; s <= stages; ++s) {
        std::vector<int> cur(static_cast<std::size_t>(points));
        const int span = 1 << (s - 1);
        for (int i = 0; i < points; ++i) {
          int partner = i ^ span;
          cur[static_cast<std::size_t>(i)] =
              sk.add({prev[static_cast<std::size_t>(i)], prev[static_cast<std::size_t>(partner)]}, u(rng));
        }
        prev = std::move(cur);
      }
      sk.add(prev, kLight);
      break;
    }
    case Shape::fork_join: {
      int barrier = sk.add({}, kLight);
      const int rounds = fam.a + (scale - 1);
      for (int r = 0; r < rounds; ++r) {
        const int width = std::max(2, fam.b * scale - (fam.a > 3 ? r : 0));
        std::vector<int> round;
        for (int i = 0; i < width; ++i) round.push_back(sk.add({barrier}, u(rng)));
        barrier = sk.add(round, kLight);
      }
      break;
    }
    case Shape::irregular: {
      const int n = fam.a * scale;
      sk.add({}, kLight);
      std::uniform_int_distribution<int> ndeps(1, fam.b);
      for (int i = 1; i < n; ++i) {
        const int lo = std::max(0, i - 8);
        std::uniform_int_distribution<int> pick(lo, i - 1);
        std::vector<int> d;
        const int k = ndeps(rng);
        for (int j = 0; j < k; ++j) d.push_back(pick(rng));
        std::sort(d.begin(), d.end());
        d.erase(std::unique(d.begin(), d.end()), d.end());
        // Heavy-tailed node sizes give the unbalanced behavior of tree search.
        std::exponential_distribution<double> ex(1.0);
        sk.add(std::move(d), 0.25 + ex(rng));
      }
      break;
    }
  }
  return sk;
}

}  // namespace

const std::vector<std::string>& benchmark_catalog() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& f : families()) n.emplace_back(f.name);
    return n;
  }();
  return names;
}

bool is_known_benchmark(const std::string& name) {
  const auto& c = benchmark_catalog();
  return std::find(c.begin(), c.end(), name) != c.end();
}

std::vector<DagTask> generate_suite(std::span<const std::string> names, int scale,
                                    std::uint64_t seed) {
  if (scale < 1) throw ConfigError("workload.scale must be >= 1");
  std::vector<DagTask> suite;
  const auto& fams = families();
  for (const auto& name : names) {
    auto it = std::find_if(fams.begin(), fams.end(),
                           [&](const Family& f) { return name == f.name; });
    if (it == fams.end()) throw ConfigError("unknown benchmark '" + name + "' in benchmarks");
    const auto fam_index = static_cast<std::uint64_t>(it - fams.begin());
    Rng rng = make_rng(seed, 1000 + fam_index);
    Skeleton sk = make_skeleton(*it, scale, rng);

    double wsum = 0.0;
    for (double w : sk.weight) wsum += w;
    const double total = it->total_work * scale;

    for (Variant v : {Variant::serial, Variant::tied, Variant::untied}) {
      DagTask t;
      t.id = static_cast<int>(suite.size());
      t.benchmark = name;
      t.variant = v;
      t.priority = 80;
      const Binding binding = v == Variant::untied ? Binding::untied : Binding::tied;
      for (std::size_t i = 0; i < sk.deps.size(); ++i) {
        t.subtasks.push_back(Subtask{static_cast<int>(i), total * sk.weight[i] / wsum, sk.deps[i],
                                     binding});
      }
      suite.push_back(std::move(t));
    }
  }
  return suite;
}

std::vector<int> topological_order(const DagTask& task) {
  const auto n = task.subtasks.size();
  std::vector<int> indeg(n, 0);
  std::vector<std::vector<int>> succ(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (task.subtasks[i].id != static_cast<int>(i))
      throw std::domain_error("subtask ids must equal their index");
    for (int d : task.subtasks[i].deps) {
      if (d < 0 || static_cast<std::size_t>(d) >= n) throw std::domain_error("dangling dependency");
      succ[static_cast<std::size_t>(d)].push_back(static_cast<int>(i));
      ++indeg[i];
    }
  }
  std::queue<int> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (indeg[i] == 0) ready.push(static_cast<int>(i));
  std::vector<int> order;
  while (!ready.empty()) {
    int v = ready.front();
    ready.pop();
    order.push_back(v);
    for (int s : succ[static_cast<std::size_t>(v)])
      if (--indeg[static_cast<std::size_t>(s)] == 0) ready.push(s);
  }
  if (order.size() != n) throw std::domain_error("task graph has a cycle");
  return order;
}

bool is_acyclic(const DagTask& task) {
  try {
    topological_order(task);
    return true;
  } catch (const std::domain_error&) {
    return false;
  }
}

double subtask_duration(const Subtask& sub, int k_allocated, int level, Variant variant,
                        const platform::FrequencyLadder& ladder, const WorkloadModelParams& params,
                        Rng& rng) {
  if (k_allocated < 1) throw std::domain_error("subtask_duration: k_allocated must be >= 1");
  const double f = static_cast<double>(platform::freq_of_level(ladder, level));
  const double inflation = 1.0 + params.kappa(variant) * (k_allocated - 1);
  std::normal_distribution<double> z(0.0, 1.0);
  const double jitter = std::exp(params.sigma(variant) * z(rng));
  return sub.work / f * inflation * jitter;
}

namespace {

double interp_ratio(double ratio, double x, double lo, double hi) {
  if (hi == lo) return 1.0;
  return std::pow(ratio, (x - lo) / (hi - lo));
}

double variant_scale(Variant v, const WorkloadModelParams& p) {
  switch (v) {
    case Variant::serial: return p.serial_miss_scale;
    case Variant::tied: return p.tied_miss_scale;
    case Variant::untied: return p.untied_miss_scale;
  }
  return 1.0;
}

}  // namespace

double expected_branch_misses(const DagTask& task, int cores, int level, int priority,
                              int n_levels, const WorkloadModelParams& p) {
  return p.branch_base * variant_scale(task.variant, p) *
         interp_ratio(p.branch_priority_ratio, priority, p.priority_low, p.priority_high) *
         interp_ratio(p.branch_cores_ratio, cores, p.cores_low, p.cores_high) *
         interp_ratio(p.branch_freq_ratio, level, 0, n_levels - 1);
}

double expected_cache_misses(const DagTask& task, int cores, int level, int priority,
                             int n_levels, const WorkloadModelParams& p) {
  return p.cache_base * variant_scale(task.variant, p) *
         interp_ratio(p.cache_priority_ratio, priority, p.priority_low, p.priority_high) *
         interp_ratio(p.cache_cores_ratio, cores, p.cores_low, p.cores_high) *
         interp_ratio(p.cache_freq_ratio, level, 0, n_levels - 1);
}

MissCounts miss_counts(const DagTask& task, int cores, int level, int priority, int n_levels,
                       const WorkloadModelParams& params, Rng& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  const double s = params.miss_sigma;
  const double bias = -0.5 * s * s;
  const double eb = expected_branch_misses(task, cores, level, priority, n_levels, params);
  const double ec = expected_cache_misses(task, cores, level, priority, n_levels, params);
  MissCounts m;
  m.branch = static_cast<std::int64_t>(std::llround(eb * std::exp(bias + s * z(rng))));
  m.cache = static_cast<std::int64_t>(std::llround(ec * std::exp(bias + s * z(rng))));
  return m;
}

}  // namespace hidvfs::workload
