#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "hidvfs/errors.hpp"
#include "hidvfs/harness.hpp"
#include "hidvfs/serialization.hpp"

namespace hidvfs::harness {

using nlohmann::json;

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::hidvfs: return "hidvfs";
    case Algorithm::hidvfs_s: return "hidvfs_s";
    case Algorithm::sarb: return "sarb";
    case Algorithm::performance: return "performance";
    case Algorithm::powersave: return "powersave";
    case Algorithm::ondemand: return "ondemand";
    case Algorithm::random: return "random";
  }
  return "?";
}

std::optional<Algorithm> algorithm_from_string(const std::string& s) {
  for (auto a : {Algorithm::hidvfs, Algorithm::hidvfs_s, Algorithm::sarb, Algorithm::performance,
                 Algorithm::powersave, Algorithm::ondemand, Algorithm::random})
    if (s == to_string(a)) return a;
  return std::nullopt;
}

bool is_learned(Algorithm a) {
  return a == Algorithm::hidvfs || a == Algorithm::hidvfs_s || a == Algorithm::sarb;
}

void ExperimentConfig::validate() const {
  if (benchmarks.empty()) throw ConfigError("benchmarks: at least one benchmark required");
  for (const auto& b : benchmarks)
    if (!workload::is_known_benchmark(b)) throw ConfigError("benchmarks: unknown benchmark '" + b + "'");
  if (scale < 1) throw ConfigError("scale: must be >= 1");
  if (epochs < 1) throw ConfigError("epochs: must be >= 1");
  // Convergence needs a baseline of 5 epochs plus a 10-epoch window.
  if (epochs < 15) throw ConfigError("epochs: must be >= 15 so convergence can be reported");
  if (phases.empty()) throw ConfigError("phases: at least one phase required");
  std::set<Phase> seen_phases(phases.begin(), phases.end());
  if (seen_phases.size() != phases.size()) throw ConfigError("phases: duplicates");
  if (seeds.empty()) throw ConfigError("seeds: at least one seed required");
  std::set<std::uint64_t> seen(seeds.begin(), seeds.end());
  if (seen.size() != seeds.size()) throw ConfigError("seeds: must be distinct");
  if (output_dir.empty()) throw ConfigError("output_dir: must not be empty");
  if (threads < 0) throw ConfigError("threads: must be >= 0");
  if (!(engine.max_substep > 0.0)) throw ConfigError("engine.max_substep: must be positive");
  if (!(engine.decision_overhead >= 0.0))
    throw ConfigError("engine.decision_overhead: must be >= 0");
  if (!(platform.dvfs_switch_s >= 0.0)) throw ConfigError("platform.dvfs_switch_s: must be >= 0");
  if (!(platform.thermal.r_th > 0.0)) throw ConfigError("platform.thermal.r_th: must be positive");
  if (!(platform.thermal.tau > 0.0)) throw ConfigError("platform.thermal.tau: must be positive");
  if (!(agent.t_target > platform.thermal.ambient))
    throw ConfigError("reward.t_target: must exceed platform.thermal.ambient");
  if (!(workload.jitter_sigma >= 0.0)) throw ConfigError("workload.jitter_sigma: must be >= 0");
  if (!(workload.miss_sigma >= 0.0)) throw ConfigError("workload.miss_sigma: must be >= 0");
  if (ondemand.step < 1) throw ConfigError("ondemand.step: must be >= 1");
  if (!(ondemand.down_threshold < ondemand.up_threshold))
    throw ConfigError("ondemand.down_threshold: must be below up_threshold");
  agent.validate();
}

namespace {

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
}

[[noreturn]] void unknown(const std::string& path) { throw ConfigError(path + ": unknown field"); }

std::uint64_t json_seed(const json& j, const std::string& path) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0))
    throw ConfigError(path + ": expected a non-negative integer");
  return j.get<std::uint64_t>();
}

std::vector<int> json_int_list(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path + ": expected an array of integers");
  std::vector<int> out;
  for (const auto& v : j) out.push_back(json_int(v, path));
  return out;
}

void apply_platform(const json& j, platform::Platform& p) {
  require_object(j, "platform");
  for (const auto& [key, v] : j.items()) {
    const std::string path = "platform." + key;
    if (key == "dvfs_switch_s") {
      p.dvfs_switch_s = json_number(v, path);
    } else if (key == "power") {
      require_object(v, path);
      for (const auto& [k, x] : v.items()) {
        const std::string q = path + "." + k;
        if (k == "dyn_coeff") p.power.dyn_coeff = json_number(x, q);
        else if (k == "leak_base") p.power.leak_base = json_number(x, q);
        else if (k == "leak_temp_coeff") p.power.leak_temp_coeff = json_number(x, q);
        else if (k == "idle_power") p.power.idle_power = json_number(x, q);
        else if (k == "perf_scale_efficiency") p.power.perf_scale_efficiency = json_number(x, q);
        else if (k == "perf_scale_performance") p.power.perf_scale_performance = json_number(x, q);
        else unknown(q);
      }
    } else if (key == "thermal") {
      require_object(v, path);
      for (const auto& [k, x] : v.items()) {
        const std::string q = path + "." + k;
        if (k == "ambient") p.thermal.ambient = json_number(x, q);
        else if (k == "r_th") p.thermal.r_th = json_number(x, q);
        else if (k == "tau") p.thermal.tau = json_number(x, q);
        else if (k == "core_r_th") p.thermal.core_r_th = json_number(x, q);
        else unknown(q);
      }
    } else {
      unknown(path);
    }
  }
}

void apply_workload(const json& j, workload::WorkloadModelParams& w) {
  require_object(j, "workload");
  for (const auto& [key, v] : j.items()) {
    const std::string p = "workload." + key;
    if (key == "kappa_tied") w.kappa_tied = json_number(v, p);
    else if (key == "kappa_untied") w.kappa_untied = json_number(v, p);
    else if (key == "jitter_sigma") w.jitter_sigma = json_number(v, p);
    else if (key == "parallel_jitter_factor") w.parallel_jitter_factor = json_number(v, p);
    else if (key == "branch_base") w.branch_base = json_number(v, p);
    else if (key == "cache_base") w.cache_base = json_number(v, p);
    else if (key == "miss_sigma") w.miss_sigma = json_number(v, p);
    else unknown(p);
  }
}

void apply_engine(const json& j, sim::EngineParams& e) {
  require_object(j, "engine");
  for (const auto& [key, v] : j.items()) {
    const std::string p = "engine." + key;
    if (key == "max_substep") e.max_substep = json_number(v, p);
    else if (key == "decision_overhead") e.decision_overhead = json_number(v, p);
    else unknown(p);
  }
}

void apply_reward(const json& j, agents::AgentConfig& a) {
  require_object(j, "reward");
  for (const auto& [key, v] : j.items()) {
    const std::string p = "reward." + key;
    if (key == "beta") a.reward.beta = json_number(v, p);
    else if (key == "eps") a.reward.eps = json_number(v, p);
    else if (key == "above_penalty") a.reward.above_penalty = json_number(v, p);
    else if (key == "below_bonus") a.reward.below_bonus = json_number(v, p);
    else if (key == "crossing_penalty") a.reward.crossing_penalty = json_number(v, p);
    else if (key == "t_target") a.t_target = json_number(v, p);
    else unknown(p);
  }
}

void apply_model(const json& j, agents::AgentConfig& a) {
  require_object(j, "model");
  for (const auto& [key, v] : j.items()) {
    const std::string p = "model." + key;
    if (key == "hidden") a.model.hidden = json_int_list(v, p);
    else if (key == "lr") a.model.lr = json_number(v, p);
    else if (key == "beta1") a.model.beta1 = json_number(v, p);
    else if (key == "beta2") a.model.beta2 = json_number(v, p);
    else if (key == "batch_size") a.model.batch_size = json_int(v, p);
    else if (key == "fit_steps") a.model.fit_steps = json_int(v, p);
    else if (key == "window") {
      const int w = json_int(v, p);
      if (w < 1) throw ConfigError(p + ": must be >= 1");
      a.model.window = static_cast<std::size_t>(w);
    } else if (key == "enabled") a.use_model = json_bool(v, p);
    else if (key == "dyna_fraction") a.dyna_fraction = json_number(v, p);
    else unknown(p);
  }
}

void apply_agent(const json& j, agents::AgentConfig& a) {
  require_object(j, "agent");
  for (const auto& [key, v] : j.items()) {
    const std::string p = "agent." + key;
    if (key == "thermal_mode") {
      const auto s = json_string(v, p);
      if (s == "learned") a.thermal_mode = agents::SelectMode::learned;
      else if (s == "greedy") a.thermal_mode = agents::SelectMode::greedy;
      else throw ConfigError(p + ": expected \"learned\" or \"greedy\"");
    } else {
      unknown(p);
    }
  }
}

void apply_ondemand(const json& j, baselines::OndemandParams& o) {
  require_object(j, "ondemand");
  for (const auto& [key, v] : j.items()) {
    const std::string p = "ondemand." + key;
    if (key == "up_threshold") o.up_threshold = json_number(v, p);
    else if (key == "down_threshold") o.down_threshold = json_number(v, p);
    else if (key == "step") o.step = json_int(v, p);
    else if (key == "start_level") o.start_level = json_int(v, p);
    else unknown(p);
  }
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  require_object(j, "config");
  ExperimentConfig c;
  bool explicit_s = false;
  for (const auto& [key, v] : j.items()) {
    if (key == "schema") {
      if (json_string(v, "schema") != kConfigSchema)
        throw ConfigError(std::string("schema: expected \"") + kConfigSchema + "\"");
    } else if (key == "algorithm") {
      const auto s = json_string(v, key);
      const auto a = algorithm_from_string(s);
      if (!a) throw ConfigError("algorithm: unknown algorithm '" + s + "'");
      c.algorithm = *a;
    } else if (key == "benchmarks") {
      if (!v.is_array()) throw ConfigError("benchmarks: expected an array of names");
      c.benchmarks.clear();
      for (const auto& b : v) c.benchmarks.push_back(json_string(b, key));
    } else if (key == "scale") {
      c.scale = json_int(v, key);
    } else if (key == "epochs") {
      c.epochs = json_int(v, key);
    } else if (key == "phases") {
      if (!v.is_array()) throw ConfigError("phases: expected an array");
      c.phases.clear();
      for (const auto& p : v) {
        const auto s = json_string(p, key);
        if (s == "train") c.phases.push_back(Phase::train);
        else if (s == "finetune") c.phases.push_back(Phase::finetune);
        else throw ConfigError("phases: unknown phase '" + s + "'");
      }
    } else if (key == "seeds") {
      if (!v.is_array()) throw ConfigError("seeds: expected an array");
      c.seeds.clear();
      for (const auto& s : v) c.seeds.push_back(json_seed(s, key));
    } else if (key == "output_dir") {
      c.output_dir = json_string(v, key);
    } else if (key == "write_trace") {
      c.write_trace = json_bool(v, key);
    } else if (key == "threads") {
      c.threads = json_int(v, key);
    } else if (key == "platform") {
      apply_platform(v, c.platform);
    } else if (key == "workload") {
      apply_workload(v, c.workload);
    } else if (key == "engine") {
      apply_engine(v, c.engine);
    } else if (key == "reward") {
      apply_reward(v, c.agent);
    } else if (key == "train") {
      c.agent.train = train_config_from_json(v, c.agent.train, "train");
      explicit_s = v.contains("dueling") || v.contains("double_q");
    } else if (key == "model") {
      apply_model(v, c.agent);
    } else if (key == "agent") {
      apply_agent(v, c.agent);
    } else if (key == "ondemand") {
      apply_ondemand(v, c.ondemand);
    } else {
      unknown(key);
    }
  }
  if (c.algorithm == Algorithm::hidvfs_s && !explicit_s) {
    c.agent.train.dueling = false;
    c.agent.train.double_q = false;
  }
  c.validate();
  return c;
}

json to_json(const ExperimentConfig& c) {
  json phases = json::array();
  for (auto p : c.phases) phases.push_back(to_string(p));
  const auto& a = c.agent;
  return json{
      {"schema", kConfigSchema},
      {"algorithm", to_string(c.algorithm)},
      {"benchmarks", c.benchmarks},
      {"scale", c.scale},
      {"epochs", c.epochs},
      {"phases", phases},
      {"seeds", c.seeds},
      {"output_dir", c.output_dir},
      {"write_trace", c.write_trace},
      {"threads", c.threads},
      {"platform",
       {{"dvfs_switch_s", c.platform.dvfs_switch_s},
        {"power",
         {{"dyn_coeff", c.platform.power.dyn_coeff},
          {"leak_base", c.platform.power.leak_base},
          {"leak_temp_coeff", c.platform.power.leak_temp_coeff},
          {"idle_power", c.platform.power.idle_power},
          {"perf_scale_efficiency", c.platform.power.perf_scale_efficiency},
          {"perf_scale_performance", c.platform.power.perf_scale_performance}}},
        {"thermal",
         {{"ambient", c.platform.thermal.ambient},
          {"r_th", c.platform.thermal.r_th},
          {"tau", c.platform.thermal.tau},
          {"core_r_th", c.platform.thermal.core_r_th}}}}},
      {"workload",
       {{"kappa_tied", c.workload.kappa_tied},
        {"kappa_untied", c.workload.kappa_untied},
        {"jitter_sigma", c.workload.jitter_sigma},
        {"parallel_jitter_factor", c.workload.parallel_jitter_factor},
        {"branch_base", c.workload.branch_base},
        {"cache_base", c.workload.cache_base},
        {"miss_sigma", c.workload.miss_sigma}}},
      {"engine",
       {{"max_substep", c.engine.max_substep}, {"decision_overhead", c.engine.decision_overhead}}},
      {"reward",
       {{"beta", a.reward.beta},
        {"eps", a.reward.eps},
        {"above_penalty", a.reward.above_penalty},
        {"below_bonus", a.reward.below_bonus},
        {"crossing_penalty", a.reward.crossing_penalty},
        {"t_target", a.t_target}}},
      {"train", hidvfs::to_json(a.train)},
      {"model",
       {{"hidden", a.model.hidden},
        {"lr", a.model.lr},
        {"beta1", a.model.beta1},
        {"beta2", a.model.beta2},
        {"batch_size", a.model.batch_size},
        {"fit_steps", a.model.fit_steps},
        {"window", a.model.window},
        {"enabled", a.use_model},
        {"dyna_fraction", a.dyna_fraction}}},
      {"agent",
       {{"thermal_mode", a.thermal_mode == agents::SelectMode::learned ? "learned" : "greedy"}}},
      {"ondemand",
       {{"up_threshold", c.ondemand.up_threshold},
        {"down_threshold", c.ondemand.down_threshold},
        {"step", c.ondemand.step},
        {"start_level", c.ondemand.start_level}}}};
}

ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file " + file.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
  return config_from_json(j);
}

std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg) {
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return cfg.output_dir;
}

// --- epochs.csv ---

const std::vector<std::string>& epochs_csv_columns() {
  static const std::vector<std::string> cols = {
      "phase",      "epoch",      "makespan",  "energy",      "temp_avg",    "temp_max",
      "branch_misses", "cache_misses", "freq_level", "core_count", "cores",   "priorities",
      "epsilon",    "r_profiler", "r_thermal", "r_priority",  "rs_profiler", "rs_thermal",
      "rs_priority"};
  return cols;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

template <class T>
T parse_num(const std::string& s, const std::string& what, std::size_t line) {
  T v{};
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw ConfigError("epochs.csv line " + std::to_string(line) + ": bad " + what + " '" + s + "'");
  return v;
}

}  // namespace

void write_epochs_csv(std::ostream& os, const std::vector<analysis::EpochMetrics>& rows) {
  os << "# schema: " << kEpochsSchema << '\n';
  const auto& cols = epochs_csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  for (const auto& r : rows) {
    os << r.phase << ',' << r.epoch << ',' << fmt(r.makespan) << ',' << fmt(r.energy) << ','
       << fmt(r.temp_avg) << ',' << fmt(r.temp_max) << ',' << r.branch_misses << ','
       << r.cache_misses << ',' << r.freq_level << ',' << r.core_count << ',' << r.cores << ','
       << r.priorities << ',' << fmt(r.epsilon) << ',' << fmt(r.r_profiler) << ','
       << fmt(r.r_thermal) << ',' << fmt(r.r_priority) << ',' << fmt(r.rs_profiler) << ','
       << fmt(r.rs_thermal) << ',' << fmt(r.rs_priority) << '\n';
  }
}

std::vector<analysis::EpochMetrics> read_epochs_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != std::string("# schema: ") + kEpochsSchema)
    throw ConfigError(std::string("epochs.csv: missing '# schema: ") + kEpochsSchema + "' line");
  const auto& cols = epochs_csv_columns();
  if (!std::getline(is, line) || split(line, ',') != cols)
    throw ConfigError("epochs.csv: unexpected header row");
  std::vector<analysis::EpochMetrics> rows;
  std::size_t n = 2;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != cols.size())
      throw ConfigError("epochs.csv line " + std::to_string(n) + ": expected " +
                        std::to_string(cols.size()) + " fields");
    analysis::EpochMetrics r;
    r.phase = f[0];
    r.epoch = parse_num<int>(f[1], "epoch", n);
    r.makespan = parse_num<double>(f[2], "makespan", n);
    r.energy = parse_num<double>(f[3], "energy", n);
    r.temp_avg = parse_num<double>(f[4], "temp_avg", n);
    r.temp_max = parse_num<double>(f[5], "temp_max", n);
    r.branch_misses = parse_num<std::int64_t>(f[6], "branch_misses", n);
    r.cache_misses = parse_num<std::int64_t>(f[7], "cache_misses", n);
    r.freq_level = parse_num<int>(f[8], "freq_level", n);
    r.core_count = parse_num<int>(f[9], "core_count", n);
    r.cores = f[10];
    r.priorities = f[11];
    r.epsilon = parse_num<double>(f[12], "epsilon", n);
    r.r_profiler = parse_num<double>(f[13], "r_profiler", n);
    r.r_thermal = parse_num<double>(f[14], "r_thermal", n);
    r.r_priority = parse_num<double>(f[15], "r_priority", n);
    r.rs_profiler = parse_num<double>(f[16], "rs_profiler", n);
    r.rs_thermal = parse_num<double>(f[17], "rs_thermal", n);
    r.rs_priority = parse_num<double>(f[18], "rs_priority", n);
    rows.push_back(std::move(r));
  }
  return rows;
}

json to_json(const analysis::Summary& s) {
  return json{{"l10", s.l10},
              {"l20", s.l20},
              {"hf_percent", s.hf_percent},
              {"cores5_percent", s.cores5_percent},
              {"convergence_epoch", s.convergence},
              {"total_energy", s.total_energy},
              {"total_makespan", s.total_makespan},
              {"epochs", s.epochs}};
}

analysis::Summary summary_from_json(const json& j) {
  require_object(j, "summary");
  analysis::Summary s;
  s.l10 = json_number(j.at("l10"), "summary.l10");
  s.l20 = json_number(j.at("l20"), "summary.l20");
  s.hf_percent = json_number(j.at("hf_percent"), "summary.hf_percent");
  s.cores5_percent = json_number(j.at("cores5_percent"), "summary.cores5_percent");
  s.convergence = json_int(j.at("convergence_epoch"), "summary.convergence_epoch");
  s.total_energy = json_number(j.at("total_energy"), "summary.total_energy");
  s.total_makespan = json_number(j.at("total_makespan"), "summary.total_makespan");
  s.epochs = json_int(j.at("epochs"), "summary.epochs");
  return s;
}

std::vector<analysis::EpochMetrics> rows_of(const std::vector<analysis::EpochMetrics>& rows,
                                            const std::string& phase) {
  std::vector<analysis::EpochMetrics> out;
  std::copy_if(rows.begin(), rows.end(), std::back_inserter(out),
               [&](const analysis::EpochMetrics& r) { return r.phase == phase; });
  return out;
}

}  // namespace hidvfs::harness
