#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "hidvfs/errors.hpp"
#include "hidvfs/harness.hpp"

using namespace hidvfs;
using namespace hidvfs::harness;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const char* root = std::getenv("HIDVFS_TEST_TMP");
  fs::path dir = fs::path(root && *root ? root : fs::temp_directory_path().string()) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig small(Algorithm alg, int epochs = 15) {
  ExperimentConfig c;
  c.algorithm = alg;
  c.epochs = epochs;
  c.seeds = {7, 8};
  c.threads = 1;
  return c;
}

}  // namespace

TEST_CASE("config JSON round trip") {
  ExperimentConfig c;
  c.algorithm = Algorithm::sarb;
  c.benchmarks = {"fft", "sort"};
  c.epochs = 17;
  c.seeds = {1, 2};
  c.agent.train.lr = 0.003;
  c.platform.thermal.ambient = 31.5;
  c.ondemand.step = 3;
  c.write_trace = true;
  const auto back = config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(back.algorithm == Algorithm::sarb);
  CHECK(back.benchmarks == c.benchmarks);
  CHECK(back.agent.train.lr == 0.003);
  CHECK(back.platform.thermal.ambient == 31.5);
}

TEST_CASE("shipped configs load") {
  const fs::path dir = fs::path(HIDVFS_SOURCE_DIR) / "configs";
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() != ".json") continue;
    CAPTURE(e.path().string());
    CHECK_NOTHROW(load_config(e.path()));
  }
}

TEST_CASE("config errors name the field") {
  auto message = [](const json& j) {
    try {
      config_from_json(j);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message(json{{"epocs", 10}}).find("epocs") != std::string::npos);
  CHECK(message(json{{"train", {{"lr", 0.1}, {"gama", 0.9}}}}).find("gama") != std::string::npos);
  CHECK(message(json{{"epochs", 0}}).find("epochs") != std::string::npos);
  CHECK(message(json{{"epochs", "ten"}}).find("epochs") != std::string::npos);
  CHECK(message(json{{"algorithm", "dqn"}}).find("algorithm") != std::string::npos);
  CHECK(message(json{{"benchmarks", {"nope"}}}).find("nope") != std::string::npos);
  CHECK(message(json{{"schema", "other"}}).find("schema") != std::string::npos);
  CHECK(message(json{{"seeds", json::array()}}).find("seeds") != std::string::npos);
  CHECK(message(json::object()).empty());
  CHECK_THROWS_AS(load_config(scratch("cfg") / "missing.json"), ConfigError);
  const auto bad = scratch("cfg_bad") / "bad.json";
  std::ofstream(bad) << "{ not json";
  CHECK_THROWS_AS(load_config(bad), ConfigError);
}

TEST_CASE("output directory override") {
  ExperimentConfig c;
  c.output_dir = "from_file";
  ::unsetenv(kOutputDirEnv);
  CHECK(resolve_output_dir(c) == fs::path("from_file"));
  ::setenv(kOutputDirEnv, "", 1);
  CHECK(resolve_output_dir(c) == fs::path("from_file"));
  ::setenv(kOutputDirEnv, "from_env", 1);
  CHECK(resolve_output_dir(c) == fs::path("from_env"));
  ::unsetenv(kOutputDirEnv);
}

TEST_CASE("epochs CSV round trip") {
  const auto res = run_seed(small(Algorithm::hidvfs, 4), 11, std::nullopt);
  REQUIRE_FALSE(res.error);
  REQUIRE(res.rows.size() == 8);
  std::stringstream ss;
  write_epochs_csv(ss, res.rows);
  std::string first;
  std::getline(std::stringstream(ss.str()), first);
  CHECK(first.find(kEpochsSchema) != std::string::npos);
  const auto back = read_epochs_csv(ss);
  REQUIRE(back.size() == res.rows.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    const auto& a = res.rows[i];
    const auto& b = back[i];
    CHECK(a.phase == b.phase);
    CHECK(a.epoch == b.epoch);
    CHECK(a.makespan == b.makespan);
    CHECK(a.energy == b.energy);
    CHECK(a.temp_avg == b.temp_avg);
    CHECK(a.temp_max == b.temp_max);
    CHECK(a.branch_misses == b.branch_misses);
    CHECK(a.cache_misses == b.cache_misses);
    CHECK(a.freq_level == b.freq_level);
    CHECK(a.cores == b.cores);
    CHECK(a.priorities == b.priorities);
    CHECK(a.epsilon == b.epsilon);
    CHECK(a.r_profiler == b.r_profiler);
    CHECK(a.rs_priority == b.rs_priority);
  }
  std::stringstream broken("phase,epoch\ntrain,0\n");
  CHECK_THROWS_AS(read_epochs_csv(broken), ConfigError);
}

TEST_CASE("experiment artifacts are reproducible and self-consistent") {
  auto cfg = small(Algorithm::hidvfs);
  cfg.write_trace = true;
  const auto a = scratch("run_a");
  const auto b = scratch("run_b");
  const auto ra = run_experiment(cfg, a);
  const auto rb = run_experiment(cfg, b);
  REQUIRE(ra.ok());
  REQUIRE(rb.ok());
  CHECK(fs::exists(a / "config.json"));
  CHECK(config_from_json(json::parse(slurp(a / "config.json"))).epochs == cfg.epochs);
  for (auto seed : cfg.seeds) {
    const auto sd = "seed_" + std::to_string(seed);
    CAPTURE(sd);
    for (const char* f : {"epochs.csv", "summary.json", "policy_train.json", "policy_finetune.json",
                          "trace.jsonl"})
      CHECK(slurp(a / sd / f) == slurp(b / sd / f));
    CHECK_FALSE(fs::exists(a / sd / "error.json"));

    std::ifstream csv(a / sd / "epochs.csv");
    const auto rows = read_epochs_csv(csv);
    const auto doc = json::parse(slurp(a / sd / "summary.json"));
    CHECK(doc["schema"] == kSummarySchema);
    for (const char* phase : {"train", "finetune"}) {
      const auto recomputed = analysis::summarize(rows_of(rows, phase));
      CHECK(to_json(recomputed) == to_json(summary_from_json(doc["phases"][phase])));
    }

    std::ifstream tr(a / sd / "trace.jsonl");
    const auto tf = sim::read_trace_jsonl(tr);
    CHECK(check_trace(tf.suite, tf.decision, tf.trace, tf.origin).ok());
  }
  CHECK(slurp(a / "aggregate.json") == slurp(b / "aggregate.json"));
  CHECK(ra.aggregate["schema"] == kAggregateSchema);
}

TEST_CASE("in-memory and on-disk runs agree") {
  const auto cfg = small(Algorithm::ondemand);
  const auto mem = run_seed(cfg, 5, std::nullopt);
  const auto dir = scratch("disk");
  const auto disk = run_seed(cfg, 5, dir);
  std::stringstream x, y;
  write_epochs_csv(x, mem.rows);
  write_epochs_csv(y, disk.rows);
  CHECK(x.str() == y.str());
  CHECK(x.str() == slurp(dir / "epochs.csv"));
}

TEST_CASE("finetuning continues from the trained state") {
  const auto cfg = small(Algorithm::hidvfs, 5);
  auto runner = make_runner(cfg, 3);
  auto* h = dynamic_cast<agents::HierarchicalRunner*>(runner.get());
  REQUIRE(h != nullptr);
  for (int e = 0; e < 5; ++e) runner->step(Phase::train, e, 5);
  const auto buffered = h->real_buffer(0).size();
  const auto trained = runner->snapshot();
  CHECK(buffered > 0);
  runner->step(Phase::finetune, 0, 5);
  CHECK(h->real_buffer(0).size() > buffered);
  // the first finetune update starts from the trained weights, not a fresh network
  auto fresh = make_runner(cfg, 3);
  fresh->step(Phase::finetune, 0, 5);
  CHECK(runner->snapshot() != fresh->snapshot());
  CHECK(trained != fresh->snapshot());
}

TEST_CASE("governors have no policy file") {
  const auto cfg = small(Algorithm::performance);
  const auto dir = scratch("perf");
  const auto r = run_experiment(cfg, dir);
  REQUIRE(r.ok());
  const auto doc = json::parse(slurp(dir / "seed_7" / "summary.json"));
  CHECK(doc["policy"].is_null());
  CHECK_FALSE(fs::exists(dir / "seed_7" / "policy_train.json"));
  CHECK(doc["phases"]["train"]["hf_percent"] == 100.0);
}

TEST_CASE("plot bands") {
  std::map<std::uint64_t, std::vector<analysis::EpochMetrics>> runs;
  const double values[] = {4.0, 5.0, 6.0};
  for (std::uint64_t s = 0; s < 3; ++s) {
    analysis::EpochMetrics m;
    m.phase = "train";
    m.epoch = 0;
    m.makespan = values[s];
    m.freq_level = static_cast<int>(s) * 3;
    runs[s] = {m};
  }
  const auto band = band_rows(long_rows(runs, PlotKind::makespan));
  REQUIRE(band.size() == 1);
  CHECK(band[0].mean == 5.0);
  CHECK(band[0].half_width == 1.0);
  CHECK(band[0].n == 3);

  const std::map<std::uint64_t, std::vector<analysis::EpochMetrics>> one{{0, runs[0]}};
  const auto single = band_rows(long_rows(one, PlotKind::makespan));
  REQUIRE(single.size() == 1);
  CHECK(single[0].half_width == 0.0);

  for (const auto& r : long_rows(runs, PlotKind::freq)) CHECK(r.value == std::floor(r.value));

  for (auto k : {PlotKind::makespan, PlotKind::energy, PlotKind::freq, PlotKind::cores})
    CHECK(plot_kind_from_string(to_string(k)) == k);
  CHECK_FALSE(plot_kind_from_string("power").has_value());
}

TEST_CASE("plot data files") {
  const auto cfg = small(Algorithm::random);
  const auto run = scratch("plot_run");
  REQUIRE(run_experiment(cfg, run).ok());
  const auto out = scratch("plot_out");
  emit_plotdata(run, PlotKind::energy, out);
  const auto band = slurp(out / "energy_band.csv");
  const auto lng = slurp(out / "energy_long.csv");
  CHECK(band.find(kPlotSchema) != std::string::npos);
  // 2 phases x 15 epochs of bands, 2 seeds x 30 long rows; plus schema and header lines
  CHECK(std::count(band.begin(), band.end(), '\n') == 30 + 2);
  CHECK(std::count(lng.begin(), lng.end(), '\n') == 60 + 2);
  CHECK_THROWS_AS(emit_plotdata(scratch("empty"), PlotKind::energy, out), std::runtime_error);
}
