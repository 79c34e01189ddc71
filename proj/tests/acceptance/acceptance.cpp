// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any criterion fails.

#include <sys/resource.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "hidvfs/agents.hpp"
#include "hidvfs/analysis.hpp"
#include "hidvfs/baselines.hpp"
#include "hidvfs/envmodel.hpp"
#include "hidvfs/harness.hpp"

using namespace hidvfs;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<workload::DagTask> fft_suite(std::uint64_t seed) {
  const std::vector<std::string> names{"fft"};
  return workload::generate_suite(names, 1, seed);
}

std::vector<double> one_hot(int i, int n) {
  std::vector<double> v(static_cast<std::size_t>(n), 0.0);
  v[static_cast<std::size_t>(i)] = 1.0;
  return v;
}

// ---- AC1 ----------------------------------------------------------------------------------

Outcome walkthrough() {
  const agents::Targets t{2.5, 1.0, 50.0};
  const agents::RewardParams p;
  const double r1 = agents::reward_profiler(3.1, 15.2, t, p);
  const double r2 = agents::reward_thermal(44.0, 44.0, t, p);
  const double r3 = agents::reward_priority(3.1, t);
  return {r1 >= 0.805 && r1 <= 0.810 && r2 == 0.70 && r3 == -0.24,
          fmt("r_profiler=%.6f r_thermal=%.17g r_priority=%.17g", r1, r2, r3)};
}

// ---- AC2 ----------------------------------------------------------------------------------

// Runs the four reference scenarios through a fresh environment each, independently of
// target_scenarios.
agents::Targets brute_force(const std::vector<workload::DagTask>& suite, const platform::Platform& p) {
  workload::WorkloadModelParams wp;
  wp.jitter_sigma = 0.0;
  const sim::EngineParams ep;
  const auto avail = p.topology.available();
  double m = std::numeric_limits<double>::infinity(), e = m;
  for (int level : {0, p.ladder.size() - 1}) {
    for (bool all : {true, false}) {
      sim::Environment env(suite, p, wp, ep, 99);
      sim::ScheduleDecision d;
      const std::vector<platform::CoreId> cores = all ? avail : std::vector<platform::CoreId>{avail[0]};
      for (std::size_t i = 0; i < suite.size(); ++i) d.apps.push_back(sim::AppDecision{cores, level, 80});
      const auto& r = env.step(d);
      m = std::min(m, r.obs.makespan);
      e = std::min(e, r.obs.energy);
    }
  }
  return {m, e, 50.0};
}

Outcome targets() {
  const platform::Platform p;
  const std::vector<std::vector<std::string>> suites{{"fft"}, {"sort", "strassen"}, {"fib", "uts", "health"}};
  int ok = 0;
  std::string detail;
  for (std::size_t i = 0; i < suites.size(); ++i) {
    const auto suite = workload::generate_suite(suites[i], 1, 42 + i);
    const auto got = agents::compute_targets(suite, p, {}, {});
    const auto want = brute_force(suite, p);
    const bool same = got.m_target == want.m_target && got.e_target == want.e_target;
    ok += same;
    detail += fmt("%s%s M_t=%.6g E_t=%.6g", i ? "; " : "", same ? "match" : "MISMATCH", got.m_target, got.e_target);
  }
  return {ok == 3, detail};
}

// ---- AC3 ----------------------------------------------------------------------------------

Outcome action_space() {
  const int count = agents::profiler_action_count(5, 12);
  bool bijective = true;
  for (int i = 0; i < count; ++i)
    bijective &= agents::encode_profiler_action(agents::decode_profiler_action(i, 5, 12), 5, 12) == i;
  harness::ExperimentConfig cfg;
  auto runner = harness::make_runner(cfg, 42);
  auto* h = dynamic_cast<agents::HierarchicalRunner*>(runner.get());
  for (int e = 0; e < 10; ++e) runner->step(Phase::train, e, 10);
  const int outputs = h->profiler().online().n_actions();
  rusage ru{};
  getrusage(RUSAGE_SELF, &ru);
  const double rss_mb = static_cast<double>(ru.ru_maxrss) / 1024.0;
  // a 5^12-entry table of doubles alone would take ~1.9 GB
  return {count == 60 && bijective && outputs == 60 && rss_mb < 256.0,
          fmt("table=%d network_outputs=%d bijective=%d peak_rss=%.0fMB", count, outputs, bijective, rss_mb)};
}

// ---- AC4 ----------------------------------------------------------------------------------

// 5-state chain: action 1 moves right (terminal +1 at state 4), action 0 moves left with
// +0.05 at state 0.
bool solve_chain(std::uint64_t seed) {
  rl::TrainConfig c;
  rl::DqnAgent ag(5, 2, c, seed);
  rl::ReplayBuffer buf(2000);
  int s = 0;
  for (int step = 0; step < 2000; ++step) {
    const int a = ag.act(one_hot(s, 5), c.epsilon(step, 2000));
    int ns = a == 1 ? s + 1 : std::max(s - 1, 0);
    double r = a == 0 && s == 0 ? 0.05 : 0.0;
    const bool term = ns == 4;
    if (term) r = 1.0;
    buf.push(rl::Transition{one_hot(s, 5), a, {}, r, one_hot(ns, 5), term, rl::Source::real});
    s = term ? 0 : ns;
    ag.train(buf, nullptr);
  }
  // value iteration
  std::array<double, 5> v{};
  std::array<int, 4> best{};
  for (int it = 0; it < 500; ++it) {
    for (int st = 0; st < 4; ++st) {
      const double right = st + 1 == 4 ? 1.0 : c.gamma * v[static_cast<std::size_t>(st + 1)];
      const double left = (st == 0 ? 0.05 : 0.0) + c.gamma * v[static_cast<std::size_t>(std::max(st - 1, 0))];
      v[static_cast<std::size_t>(st)] = std::max(left, right);
      best[static_cast<std::size_t>(st)] = right >= left ? 1 : 0;
    }
  }
  for (int st = 0; st < 4; ++st)
    if (rl::argmax(ag.q_values(one_hot(st, 5))) != best[static_cast<std::size_t>(st)]) return false;
  return true;
}

Outcome rl_correctness() {
  int solved = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) solved += solve_chain(seed);

  const std::vector<double> adv{1.0, 2.0, 3.0};
  const auto q = rl::dueling_q(5.0, adv);
  const bool dueling = q == std::vector<double>{4.0, 5.0, 6.0};
  const std::vector<double> on{1.0, 5.0}, tg{3.0, 5.0};
  const bool dbl = rl::double_dqn_target(1.0, 0.9, on, tg, std::nullopt) == 1.0 + 0.9 * 5.0 &&
                   rl::double_dqn_target(10.0, 0.9, on, tg, 10.0) == 10.0 &&
                   rl::double_dqn_target(-1.0, 0.9, on, tg, std::nullopt, true) == -1.0;

  agents::AgentConfig cfg;
  cfg.train.q_clip = 10.0;
  const platform::Platform p;
  const auto suite = fft_suite(42);
  const auto run = agents::hidvfs_train(cfg, suite, p, {}, {}, 42, 100);

  const auto off = agents::spike_stress(false, suite, p, 42, 300);
  const auto on_ = agents::spike_stress(true, suite, p, 42, 300);
  const bool stress = off.diverged && !on_.diverged && on_.max_abs_q <= 50.0;
  return {solved == 5 && dueling && dbl && run.max_abs_target <= 10.0 && stress,
          fmt("chain %d/5, dueling=%d double=%d, clipped max|y|=%.3f, stress off: diverged=%d after %d "
              "epochs, on: max|Q|=%.2f",
              solved, dueling, dbl, run.max_abs_target, off.diverged, off.epochs_run, on_.max_abs_q)};
}

// ---- AC5 ----------------------------------------------------------------------------------

// 3-state chain with one-hot states: every action advances (state 2 absorbs); the reward is
// that of the state being left, {0, 0, 1}.
std::vector<envmodel::Transition> chain3_data() {
  std::vector<envmodel::Transition> ts;
  const double rewards[3] = {0.0, 0.0, 1.0};
  for (int rep = 0; rep < 16; ++rep)
    for (int s = 0; s < 3; ++s)
      for (int a = 0; a < 2; ++a)
        ts.push_back({one_hot(s, 3), a, {}, rewards[s], one_hot(std::min(s + 1, 2), 3), false, rl::Source::real});
  return ts;
}

Outcome model_fidelity() {
  // linear toy: s' = 0.5 s + a, reward s'
  Rng rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<envmodel::Transition> toy;
  for (int i = 0; i < 200; ++i) {
    const double s = u(rng);
    const double ns = 0.5 * s + i % 2;
    toy.push_back({{s}, i % 2, {}, ns, {ns}, false, rl::Source::real});
  }
  envmodel::DynamicsModel lin(1, 2, {}, 1);
  lin.fit(toy, 2000);
  double mse = 0.0;
  for (const auto& t : toy) mse += std::pow(lin.predict(t.state, envmodel::action_of(t)).next_state[0] - t.next_state[0], 2);
  mse /= static_cast<double>(toy.size());

  bool identity = true;
  std::normal_distribution<double> z(0.0, 3.0);
  for (int i = 0; i < 100; ++i) {
    const envmodel::Transition t{{z(rng)}, i % 2, {}, z(rng), {z(rng)}, false, rl::Source::real};
    identity &= envmodel::shaped_reward(t, lin, {}, 0, 0.9, false) == t.reward;
  }

  envmodel::DynamicsModel chain(3, 2, {}, 3);
  chain.fit(chain3_data(), 3000);
  const envmodel::Policy stay = [](std::span<const double>) { return envmodel::Action{0, {}}; };
  const double gamma = 0.9;
  double worst = 0.0;
  // from each starting state, horizon 2: reward now plus the discounted rewards of the next two leaves
  const double rewards[3] = {0.0, 0.0, 1.0};
  for (int s = 0; s < 3; ++s) {
    const int ns = std::min(s + 1, 2);
    const envmodel::Transition t{one_hot(s, 3), 0, {}, rewards[s], one_hot(ns, 3), false, rl::Source::real};
    const double truth = rewards[s] + gamma * rewards[ns] + gamma * gamma * rewards[std::min(ns + 1, 2)];
    worst = std::max(worst, std::abs(envmodel::shaped_reward(t, chain, stay, 2, gamma, false) - truth));
  }
  return {mse < 1e-3 && identity && worst <= 1e-2,
          fmt("linear-toy MSE=%.2e, horizon-0 identity=%d, chain shaped-reward error=%.2e", mse, identity, worst)};
}

// ---- AC6 ----------------------------------------------------------------------------------

Outcome directions() {
  const platform::Platform p;
  baselines::StatsSamples all;
  for (std::uint64_t seed : {42, 123, 456})
    baselines::append(all, baselines::random_policy_samples(fft_suite(seed), p, {},
                                                            {}, 300, seed));
  struct Pair {
    const char* feature;
    const char* metric;
    const std::vector<double>* x;
    const std::vector<double>* y;
    int direction;  // +1 higher feature raises the metric, -1 lowers it, 0 no effect
  };
  const std::vector<Pair> pairs{
      {"freq", "makespan", &all.level, &all.makespan, -1},
      {"freq", "energy", &all.level, &all.energy, -1},
      {"cores", "energy", &all.cores, &all.energy, -1},
      {"cores", "makespan", &all.cores, &all.makespan, -1},
      {"priority", "cache_misses", &all.app_priority, &all.app_cache_misses, +1},
      {"freq", "branch_misses", &all.level, &all.branch_misses, 0},
  };
  bool pass = true;
  std::string detail;
  for (const auto& pr : pairs) {
    const auto t = analysis::median_split_test(pr.feature, pr.metric, *pr.x, *pr.y);
    const int dir = t.high_mean > t.low_mean ? 1 : -1;
    const bool ok = pr.direction == 0 ? t.test.p > 0.05 : t.test.p < 0.05 && dir == pr.direction;
    pass &= ok;
    detail += fmt("%s%s->%s p=%.2e%s", detail.empty() ? "" : "; ", pr.feature, pr.metric, t.test.p, ok ? "" : " (wrong)");
  }
  return {pass, detail};
}

// ---- AC7 / AC9 ----------------------------------------------------------------------------

harness::ExperimentConfig comparison_config(harness::Algorithm alg) {
  harness::ExperimentConfig c;
  c.algorithm = alg;
  c.epochs = 100;
  c.seeds = {42, 123, 456};
  return c;
}

double mean_of(const harness::ExperimentResult& r, const std::function<double(const harness::SeedResult&)>& f) {
  double s = 0.0;
  for (const auto& sr : r.seeds) s += f(sr);
  return s / static_cast<double>(r.seeds.size());
}

Outcome relative_performance(const fs::path& out, harness::ExperimentResult& hid) {
  hid = harness::run_experiment(comparison_config(harness::Algorithm::hidvfs), out / "hidvfs");
  const auto save = harness::run_experiment(comparison_config(harness::Algorithm::powersave), out / "powersave");
  const auto rnd = harness::run_experiment(comparison_config(harness::Algorithm::random), out / "random");
  if (!hid.ok() || !save.ok() || !rnd.ok()) return {false, "a run failed, see error.json"};
  auto ft = [](const harness::SeedResult& s) { return s.summaries.at("finetune"); };
  const double l10_h = mean_of(hid, [&](auto& s) { return ft(s).l10; });
  const double l10_p = mean_of(save, [&](auto& s) { return ft(s).l10; });
  const double l10_r = mean_of(rnd, [&](auto& s) { return ft(s).l10; });
  const double e_h = mean_of(hid, [&](auto& s) { return ft(s).total_energy; });
  const double e_r = mean_of(rnd, [&](auto& s) { return ft(s).total_energy; });
  // HF% over the finetuned epochs from the convergence epoch on (whole phase when not converged)
  const double hf = mean_of(hid, [](const harness::SeedResult& s) {
    const auto rows = harness::rows_of(s.rows, "finetune");
    const int c = s.summaries.at("finetune").convergence;
    const std::size_t from = c < static_cast<int>(rows.size()) ? static_cast<std::size_t>(c) : 0;
    std::vector<int> levels;
    for (std::size_t i = from; i < rows.size(); ++i) levels.push_back(rows[i].freq_level);
    return analysis::hf_rate(levels);
  });
  // convergence from scratch, i.e. in the training phase; finetuning starts near the optimum
  int converged = 0;
  std::string conv, conv_ft;
  for (const auto& s : hid.seeds) {
    const int c = s.summaries.at("train").convergence;
    converged += c <= 60;
    conv += fmt("%s%d", conv.empty() ? "" : ",", c);
    conv_ft += fmt("%s%d", conv_ft.empty() ? "" : ",", ft(s).convergence);
  }
  const bool pass = l10_h <= 0.5 * l10_p && l10_h <= 0.9 * l10_r && hf >= 70.0 && e_h <= e_r && converged >= 2;
  return {pass, fmt("L10 hidvfs=%.3f powersave=%.3f random=%.3f; HF=%.1f%%; energy hidvfs=%.1f random=%.1f; "
                    "convergence epochs train=%s finetune=%s",
                    l10_h, l10_p, l10_r, hf, e_h, e_r, conv.c_str(), conv_ft.c_str())};
}

// ---- AC8 ----------------------------------------------------------------------------------

Outcome thermal_correction() {
  const platform::Platform p;
  const agents::AgentConfig cfg;
  int corrected = 0, crossed = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto r = agents::hot_start_scenario(cfg, fft_suite(seed), p, {}, {}, seed);
    crossed += r.crossing_epoch >= 0;
    corrected += r.corrected;
  }
  return {corrected >= 16, fmt("corrected %d/20 (crossings %d/20)", corrected, crossed)};
}

// ---- AC9 ----------------------------------------------------------------------------------

Outcome determinism(const fs::path& out, const harness::ExperimentResult& first) {
  const auto again = harness::run_experiment(comparison_config(harness::Algorithm::hidvfs), out / "hidvfs_rerun");
  if (!again.ok() || first.seeds.empty()) return {false, "run failed"};
  int identical = 0, recomputable = 0;
  for (std::size_t i = 0; i < first.seeds.size(); ++i) {
    const auto csv_a = slurp(first.seeds[i].dir / "epochs.csv");
    identical += !csv_a.empty() && csv_a == slurp(again.seeds[i].dir / "epochs.csv");
    std::ifstream in(first.seeds[i].dir / "epochs.csv");
    const auto rows = harness::read_epochs_csv(in);
    const auto doc = nlohmann::json::parse(slurp(first.seeds[i].dir / "summary.json"));
    bool all = true;
    for (const auto& [phase, js] : doc["phases"].items())
      all &= harness::to_json(analysis::summarize(harness::rows_of(rows, phase))) ==
             harness::to_json(harness::summary_from_json(js));
    recomputable += all;
  }
  const int n = static_cast<int>(first.seeds.size());
  return {identical == n && recomputable == n,
          fmt("byte-identical CSVs %d/%d, summaries recomputed %d/%d", identical, n, recomputable, n)};
}

// ---- AC10 ---------------------------------------------------------------------------------

Outcome statistical_kernel() {
  const auto r = analysis::mann_whitney_u(std::vector<double>{1, 2}, std::vector<double>{3, 4});
  const bool exact = std::abs(r.p - 1.0 / 3.0) < 1e-12;
  Rng rng(10);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_int_distribution<int> len(1, 30);
  int symmetric = 0;
  for (int t = 0; t < 500; ++t) {
    std::vector<double> a(static_cast<std::size_t>(len(rng))), b(static_cast<std::size_t>(len(rng)));
    for (auto& x : a) x = std::round(4.0 * z(rng)) / 4.0;
    for (auto& x : b) x = std::round(4.0 * (z(rng) + 0.3)) / 4.0;
    const auto ab = analysis::mann_whitney_u(a, b);
    const auto ba = analysis::mann_whitney_u(b, a);
    const double n1n2 = static_cast<double>(a.size() * b.size());
    symmetric += std::abs(ab.u + ba.u - n1n2) < 1e-9 && std::abs(ab.p - ba.p) < 1e-12;
  }
  return {exact && symmetric == 500, fmt("p([1,2],[3,4])=%.17g, symmetric pairs %d/500", r.p, symmetric)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("Acceptance checks");
  fs::path out = "acceptance_runs";
  app.add_option("--out", out, "Directory for experiment artifacts");
  CLI11_PARSE(app, argc, argv);
  fs::remove_all(out);
  fs::create_directories(out);

  harness::ExperimentResult hid;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"AC1", walkthrough},
      {"AC2", targets},
      {"AC3", action_space},
      {"AC4", rl_correctness},
      {"AC5", model_fidelity},
      {"AC6", directions},
      {"AC7", [&] { return relative_performance(out, hid); }},
      {"AC8", thermal_correction},
      {"AC9", [&] { return determinism(out, hid); }},
      {"AC10", statistical_kernel},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !o.pass;
    std::printf("%s %s  %s (%.1fs)\n", name, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
