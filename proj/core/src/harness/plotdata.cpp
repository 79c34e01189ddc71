#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "hidvfs/harness.hpp"

namespace hidvfs::harness {

namespace fs = std::filesystem;

const char* to_string(PlotKind k) {
  switch (k) {
    case PlotKind::makespan: return "makespan";
    case PlotKind::energy: return "energy";
    case PlotKind::freq: return "freq";
    case PlotKind::cores: return "cores";
  }
  return "?";
}

std::optional<PlotKind> plot_kind_from_string(const std::string& s) {
  for (auto k : {PlotKind::makespan, PlotKind::energy, PlotKind::freq, PlotKind::cores})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

namespace {

double value_of(const analysis::EpochMetrics& r, PlotKind k) {
  switch (k) {
    case PlotKind::makespan: return r.makespan;
    case PlotKind::energy: return r.energy;
    case PlotKind::freq: return r.freq_level;
    case PlotKind::cores: return r.core_count;
  }
  return 0.0;
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

std::vector<LongRow> long_rows(const std::map<std::uint64_t, std::vector<analysis::EpochMetrics>>& runs,
                               PlotKind kind) {
  std::vector<LongRow> out;
  for (const auto& [seed, rows] : runs)
    for (const auto& r : rows) out.push_back(LongRow{seed, r.phase, r.epoch, value_of(r, kind)});
  return out;
}

std::vector<BandRow> band_rows(const std::vector<LongRow>& rows) {
  // Phases keep their first-appearance order; epochs ascend within a phase.
  std::vector<std::string> phase_order;
  for (const auto& r : rows)
    if (std::find(phase_order.begin(), phase_order.end(), r.phase) == phase_order.end())
      phase_order.push_back(r.phase);
  std::vector<BandRow> out;
  for (const auto& ph : phase_order) {
    std::map<int, std::vector<double>> by_epoch;
    for (const auto& r : rows)
      if (r.phase == ph) by_epoch[r.epoch].push_back(r.value);
    for (const auto& [epoch, vals] : by_epoch) {
      BandRow b;
      b.phase = ph;
      b.epoch = epoch;
      b.n = static_cast<int>(vals.size());
      if (vals.size() == 1) {
        b.mean = vals.front();
      } else {
        const auto ms = analysis::aggregate_seeds(vals);
        b.mean = ms.mean;
        b.half_width = ms.std;
      }
      out.push_back(b);
    }
  }
  return out;
}

void emit_plotdata(const fs::path& run_dir, PlotKind kind, const fs::path& out_dir) {
  std::map<std::uint64_t, std::vector<analysis::EpochMetrics>> runs;
  if (fs::is_directory(run_dir)) {
    for (const auto& entry : fs::directory_iterator(run_dir)) {
      const auto name = entry.path().filename().string();
      if (!entry.is_directory() || name.rfind("seed_", 0) != 0) continue;
      const auto csv = entry.path() / "epochs.csv";
      if (!fs::exists(csv)) continue;
      std::uint64_t seed = 0;
      const auto digits = name.substr(5);
      const auto r = std::from_chars(digits.data(), digits.data() + digits.size(), seed);
      if (r.ec != std::errc() || r.ptr != digits.data() + digits.size()) continue;
      std::ifstream in(csv);
      runs[seed] = read_epochs_csv(in);
    }
  }
  if (runs.empty()) throw std::runtime_error("no seed_*/epochs.csv under " + run_dir.string());

  const auto longs = long_rows(runs, kind);
  const auto bands = band_rows(longs);
  const std::string series = to_string(kind);
  fs::create_directories(out_dir);
  {
    std::ofstream os(out_dir / (series + "_long.csv"));
    if (!os) throw std::runtime_error("cannot write " + (out_dir / (series + "_long.csv")).string());
    os << "# schema: " << kPlotSchema << "\nseed,phase,epoch,series,value\n";
    for (const auto& r : longs)
      os << r.seed << ',' << r.phase << ',' << r.epoch << ',' << series << ',' << fmt(r.value) << '\n';
  }
  std::ofstream os(out_dir / (series + "_band.csv"));
  if (!os) throw std::runtime_error("cannot write " + (out_dir / (series + "_band.csv")).string());
  os << "# schema: " << kPlotSchema << "\nphase,epoch,series,mean,half_width,n\n";
  for (const auto& b : bands)
    os << b.phase << ',' << b.epoch << ',' << series << ',' << fmt(b.mean) << ',' << fmt(b.half_width)
       << ',' << b.n << '\n';
}

}  // namespace hidvfs::harness
