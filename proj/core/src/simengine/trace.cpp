#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "hidvfs/errors.hpp"
#include "hidvfs/simengine.hpp"

namespace hidvfs::sim {

using workload::DagTask;

namespace {

constexpr double kTol = 1e-9;

using SegMap = std::map<std::pair<int, int>, std::vector<JobRecord>>;

SegMap segments_by_subtask(std::span<const JobRecord> trace) {
  SegMap m;
  for (const auto& j : trace) m[{j.dag, j.subtask}].push_back(j);
  for (auto& [k, v] : m)
    std::sort(v.begin(), v.end(), [](const JobRecord& a, const JobRecord& b) { return a.start < b.start; });
  return m;
}

std::string job_name(int dag, int sub) {
  return "J(dag " + std::to_string(dag) + ", subtask " + std::to_string(sub) + ")";
}

double ready_time(const DagTask& task, int sub, const SegMap& segs, int dag, double origin) {
  double r = origin;
  for (int d : task.subtasks[static_cast<std::size_t>(sub)].deps) {
    auto it = segs.find({dag, d});
    if (it == segs.end()) continue;
    for (const auto& j : it->second) r = std::max(r, j.end);
  }
  return r;
}

std::vector<CoreId> allowed_cores(const DagTask& task, const AppDecision& a) {
  if (task.variant == workload::Variant::serial && !a.cores.empty()) return {a.cores.front()};
  return a.cores;
}

struct Waiting {
  int dag;
  int sub;
  double from;
  double to;
  std::vector<CoreId> cand;
};

// Intervals during which a subtask was runnable but not running, with the cores it could use.
std::vector<Waiting> waiting_intervals(std::span<const DagTask> suite, const ScheduleDecision& d,
                                       const SegMap& segs, double origin) {
  std::vector<Waiting> out;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    const auto& task = suite[i];
    const auto allowed = allowed_cores(task, d.apps.at(i));
    for (const auto& st : task.subtasks) {
      auto it = segs.find({static_cast<int>(i), st.id});
      if (it == segs.end()) continue;
      const auto& v = it->second;
      const double r = ready_time(task, st.id, segs, static_cast<int>(i), origin);
      out.push_back(Waiting{static_cast<int>(i), st.id, r, v.front().start, allowed});
      std::vector<CoreId> later = allowed;
      if (st.binding == workload::Binding::tied) later = {v.front().core};
      for (std::size_t k = 1; k < v.size(); ++k)
        out.push_back(Waiting{static_cast<int>(i), st.id, v[k - 1].end, v[k].start, later});
    }
  }
  return out;
}

double overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

}  // namespace

TraceCheck check_dependencies(std::span<const DagTask> suite, std::span<const JobRecord> trace,
                              double origin) {
  TraceCheck out;
  const auto segs = segments_by_subtask(trace);
  for (const auto& j : trace) {
    if (!(j.end > j.start)) out.violations.push_back(job_name(j.dag, j.subtask) + " has end <= start");
    if (j.dag < 0 || static_cast<std::size_t>(j.dag) >= suite.size()) {
      out.violations.push_back("job references unknown dag " + std::to_string(j.dag));
      continue;
    }
    const auto& task = suite[static_cast<std::size_t>(j.dag)];
    if (j.subtask < 0 || static_cast<std::size_t>(j.subtask) >= task.subtasks.size()) {
      out.violations.push_back("job references unknown subtask " + std::to_string(j.subtask));
      continue;
    }
    for (int d : task.subtasks[static_cast<std::size_t>(j.subtask)].deps) {
      auto it = segs.find({j.dag, d});
      if (it == segs.end()) {
        out.violations.push_back(job_name(j.dag, j.subtask) + " ran but predecessor " +
                                 std::to_string(d) + " never did");
        continue;
      }
      for (const auto& p : it->second) {
        if (p.end > j.start + kTol)
          out.violations.push_back(job_name(j.dag, j.subtask) + " starts before predecessor " +
                                   std::to_string(d) + " ends");
      }
    }
    if (j.start < origin - kTol)
      out.violations.push_back(job_name(j.dag, j.subtask) + " starts before the epoch origin");
  }
  return out;
}

TraceCheck check_tied_binding(std::span<const DagTask> suite, std::span<const JobRecord> trace) {
  TraceCheck out;
  for (const auto& [key, v] : segments_by_subtask(trace)) {
    const auto& task = suite[static_cast<std::size_t>(key.first)];
    if (task.subtasks[static_cast<std::size_t>(key.second)].binding != workload::Binding::tied)
      continue;
    for (const auto& j : v) {
      if (j.core != v.front().core)
        out.violations.push_back(job_name(key.first, key.second) + " is tied but migrated");
    }
  }
  return out;
}

TraceCheck check_priority(std::span<const DagTask> suite, const ScheduleDecision& decision,
                          std::span<const JobRecord> trace, double origin) {
  TraceCheck out;
  const auto segs = segments_by_subtask(trace);
  for (const auto& w : waiting_intervals(suite, decision, segs, origin)) {
    if (w.to - w.from <= kTol) continue;
    const int prio = decision.apps[static_cast<std::size_t>(w.dag)].priority;
    for (const auto& j : trace) {
      if (std::find(w.cand.begin(), w.cand.end(), j.core) == w.cand.end()) continue;
      if (decision.apps[static_cast<std::size_t>(j.dag)].priority >= prio) continue;
      if (overlap(w.from, w.to, j.start, j.end) > kTol)
        out.violations.push_back(job_name(j.dag, j.subtask) + " on core " + std::to_string(j.core) +
                                 " runs while higher-priority " + job_name(w.dag, w.sub) + " waits");
    }
  }
  return out;
}

TraceCheck check_work_conservation(std::span<const DagTask> suite, const ScheduleDecision& decision,
                                   std::span<const JobRecord> trace, double origin) {
  TraceCheck out;
  const auto segs = segments_by_subtask(trace);
  for (const auto& w : waiting_intervals(suite, decision, segs, origin)) {
    const double len = w.to - w.from;
    if (len <= kTol) continue;
    for (CoreId c : w.cand) {
      double busy = 0.0;
      for (const auto& j : trace)
        if (j.core == c) busy += overlap(w.from, w.to, j.start, j.end);
      if (busy < len - 1e-7)
        out.violations.push_back("core " + std::to_string(c) + " idles while " +
                                 job_name(w.dag, w.sub) + " is ready");
    }
  }
  return out;
}

TraceCheck check_trace(std::span<const DagTask> suite, const ScheduleDecision& decision,
                       std::span<const JobRecord> trace, double origin) {
  TraceCheck out;
  auto add = [&](TraceCheck c) {
    out.violations.insert(out.violations.end(), c.violations.begin(), c.violations.end());
  };
  add(check_dependencies(suite, trace, origin));
  add(check_tied_binding(suite, trace));
  add(check_priority(suite, decision, trace, origin));
  add(check_work_conservation(suite, decision, trace, origin));
  std::map<CoreId, std::vector<JobRecord>> per_core;
  for (const auto& j : trace) per_core[j.core].push_back(j);
  for (auto& [c, v] : per_core) {
    std::sort(v.begin(), v.end(), [](const JobRecord& a, const JobRecord& b) { return a.start < b.start; });
    for (std::size_t k = 1; k < v.size(); ++k)
      if (v[k].start < v[k - 1].end - kTol)
        out.violations.push_back("core " + std::to_string(c) + " runs two jobs at once");
  }
  return out;
}

void write_trace_jsonl(std::ostream& os, std::span<const DagTask> suite,
                       const ScheduleDecision& decision, std::span<const JobRecord> trace,
                       double origin) {
  using nlohmann::json;
  os << json{{"schema", "hidvfs.trace.v1"}, {"origin", origin}, {"policy", decision.policy}}.dump()
     << '\n';
  for (std::size_t i = 0; i < suite.size(); ++i) {
    const auto& t = suite[i];
    json subs = json::array();
    for (const auto& s : t.subtasks)
      subs.push_back({{"id", s.id}, {"work", s.work}, {"deps", s.deps},
                      {"binding", workload::to_string(s.binding)}});
    const auto& a = decision.apps.at(i);
    os << json{{"type", "dag"},          {"dag", i},
               {"benchmark", t.benchmark}, {"variant", workload::to_string(t.variant)},
               {"priority", a.priority},   {"cores", a.cores},
               {"level", a.freq_level},    {"subtasks", subs}}
              .dump()
       << '\n';
  }
  for (const auto& j : trace)
    os << json{{"type", "job"}, {"core", j.core}, {"dag", j.dag}, {"subtask", j.subtask},
               {"start", j.start}, {"end", j.end}}
              .dump()
       << '\n';
}

TraceFile read_trace_jsonl(std::istream& is) {
  using nlohmann::json;
  TraceFile tf;
  std::string line;
  bool header = false;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ConfigError("trace line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!header) {
      if (j.value("schema", "") != "hidvfs.trace.v1")
        throw ConfigError("trace file lacks the hidvfs.trace.v1 schema header");
      tf.origin = j.value("origin", 0.0);
      tf.decision.policy = j.value("policy", "");
      header = true;
      continue;
    }
    const std::string type = j.value("type", "");
    if (type == "dag") {
      DagTask t;
      t.id = j.at("dag").get<int>();
      t.benchmark = j.at("benchmark").get<std::string>();
      const std::string v = j.at("variant").get<std::string>();
      t.variant = v == "serial" ? workload::Variant::serial
                  : v == "tied" ? workload::Variant::tied
                                : workload::Variant::untied;
      t.priority = j.at("priority").get<int>();
      for (const auto& s : j.at("subtasks")) {
        workload::Subtask st;
        st.id = s.at("id").get<int>();
        st.work = s.value("work", 0.0);
        st.deps = s.at("deps").get<std::vector<int>>();
        st.binding = s.at("binding").get<std::string>() == "tied" ? workload::Binding::tied
                                                                  : workload::Binding::untied;
        t.subtasks.push_back(std::move(st));
      }
      tf.suite.push_back(std::move(t));
      tf.decision.apps.push_back(AppDecision{j.at("cores").get<std::vector<CoreId>>(),
                                             j.at("level").get<int>(), j.at("priority").get<int>()});
    } else if (type == "job") {
      tf.trace.push_back(JobRecord{j.at("core").get<int>(), j.at("dag").get<int>(),
                                   j.at("subtask").get<int>(), j.at("start").get<double>(),
                                   j.at("end").get<double>()});
    } else {
      throw ConfigError("trace line " + std::to_string(lineno) + ": unknown record type");
    }
  }
  if (!header) throw ConfigError("empty trace file");
  return tf;
}

}  // namespace hidvfs::sim
