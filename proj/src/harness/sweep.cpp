#include "bevguard/harness/sweep.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <thread>

#include "bevguard/core/error.hpp"

namespace bevguard::harness {

using nlohmann::json;

SweepAxis parse_axis(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == arg.size()) {
    throw ConfigError("sweep axis '" + arg + "': expected key=v1,v2,...");
  }
  SweepAxis axis;
  axis.key = arg.substr(0, eq);
  std::size_t start = eq + 1;
  while (start <= arg.size()) {
    const auto comma = arg.find(',', start);
    const std::string text = arg.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    json v = json::parse(text, nullptr, false);
    axis.values.push_back(v.is_discarded() ? json(text) : v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return axis;
}

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd r;
  if (v.empty()) return r;
  for (double x : v) r.mean += x;
  r.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return r;
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& job) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

SweepResult run_sweep(const json& base, const std::vector<SweepAxis>& axes, const std::vector<std::uint64_t>& seeds,
                      ResourceCache& resources, unsigned threads, const CellHook& hook) {
  if (seeds.empty()) throw ConfigError("sweep: need at least one seed");
  SweepResult result;
  result.axes = axes;
  std::size_t cells = 1;
  for (const auto& a : axes) {
    if (a.values.empty()) throw ConfigError("sweep axis " + a.key + ": no values");
    cells *= a.values.size();
  }
  std::vector<ScenarioConfig> configs;
  for (std::size_t cell = 0; cell < cells; ++cell) {
    SweepRow row;
    std::vector<std::string> overrides;
    std::size_t rem = cell;
    std::vector<json> values(axes.size());
    for (std::size_t k = axes.size(); k-- > 0;) {
      values[k] = axes[k].values[rem % axes[k].values.size()];
      rem /= axes[k].values.size();
    }
    for (std::size_t k = 0; k < axes.size(); ++k) overrides.push_back(axes[k].key + "=" + values[k].dump());
    ScenarioConfig c = from_json(apply_overrides(base, overrides));
    if (hook) hook(c);
    configs.push_back(c);
    row.values = values;
    row.reports.resize(seeds.size());
    result.rows.push_back(std::move(row));
  }
  parallel_for(cells * seeds.size(), threads, [&](std::size_t job) {
    const std::size_t cell = job / seeds.size();
    const std::size_t s = job % seeds.size();
    ScenarioConfig c = configs[cell];
    c.seed = seeds[s];
    result.rows[cell].reports[s] = run_scenario(c, resources.get(c), RunMode::evaluate);
  });
  for (auto& row : result.rows) {
    std::vector<double> ap50, ap70, f1, fdr;
    for (const auto& r : row.reports) {
      ap50.push_back(r.ap50);
      ap70.push_back(r.ap70);
      f1.push_back(r.detection.f1());
      fdr.push_back(r.detection.fdr());
    }
    row.ap50 = mean_std(ap50);
    row.ap70 = mean_std(ap70);
    row.f1 = mean_std(f1);
    row.fdr = mean_std(fdr);
  }
  return result;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string csv_cell(const json& v) {
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  if (s.find_first_of(",\"") != std::string::npos) {
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
  }
  return s;
}

}  // namespace

void write_sweep_csv(const SweepResult& r, std::ostream& out) {
  out << "# schema=bevguard.sweep/1\n";
  for (const auto& a : r.axes) out << a.key << ',';
  out << "seeds,ap50_mean,ap50_std,ap70_mean,ap70_std,f1_mean,f1_std,fdr_mean,fdr_std\n";
  for (const auto& row : r.rows) {
    for (const auto& v : row.values) out << csv_cell(v) << ',';
    out << row.reports.size() << ',' << fmt(row.ap50.mean) << ',' << fmt(row.ap50.std) << ',' << fmt(row.ap70.mean)
        << ',' << fmt(row.ap70.std) << ',' << fmt(row.f1.mean) << ',' << fmt(row.f1.std) << ',' << fmt(row.fdr.mean)
        << ',' << fmt(row.fdr.std) << '\n';
  }
}

}  // namespace bevguard::harness
