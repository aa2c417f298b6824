#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "bevguard/core/error.hpp"
#include "bevguard/harness/config.hpp"
#include "bevguard/harness/pipeline.hpp"
#include "bevguard/harness/plot.hpp"
#include "bevguard/harness/scenario.hpp"
#include "bevguard/harness/sweep.hpp"
#include "bevguard/stattest/stattest.hpp"
#include "bevguard/temporal/lstm_ae.hpp"

namespace fs = std::filesystem;
using namespace bevguard;
using namespace bevguard::harness;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Scenario config JSON (defaults apply to missing keys)");
  cmd->add_option("--set", c.overrides, "Override a config key, e.g. --set defense.k_hist=7")->take_all();
}

json base_json(const Common& c) {
  json j = json::object();
  if (!c.config.empty()) {
    std::ifstream in(c.config);
    if (!in) throw ConfigError("cannot read config file " + c.config);
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw ConfigError("config file " + c.config + ": " + e.what());
    }
  }
  return apply_overrides(j, c.overrides);
}

std::string out_path(const std::string& given, const std::string& name) {
  if (!given.empty()) return given;
  const fs::path dir = output_dir();
  fs::create_directories(dir);
  return (dir / name).string();
}

unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

void print_row(const std::string& name, const std::vector<EvalReport>& reports) {
  std::vector<double> ap50, ap70, f1, fdr;
  for (const auto& r : reports) {
    ap50.push_back(r.ap50);
    ap70.push_back(r.ap70);
    f1.push_back(r.detection.f1());
    fdr.push_back(r.detection.fdr());
  }
  const auto a = mean_std(ap50), b = mean_std(ap70), c = mean_std(f1), d = mean_std(fdr);
  std::printf("%-10s AP@0.5 %.4f +- %.4f  AP@0.7 %.4f +- %.4f  F1 %.3f  FDR %.3f\n", name.c_str(), a.mean, a.std,
              b.mean, b.std, c.mean, d.mean);
}

int cmd_simulate(const Common& common, std::string trace_path, std::string report_path, const std::string& positional) {
  Common c = common;
  if (!positional.empty()) c.config = positional;
  const ScenarioConfig cfg = from_json(base_json(c));
  ResourceCache cache;
  const Resources res = cache.get(cfg);
  trace_path = out_path(trace_path.empty() ? cfg.trace_path : trace_path, "trace.jsonl");
  std::ofstream trace(trace_path);
  if (!trace) throw ConfigError("cannot write trace " + trace_path);
  const EvalReport report = run_scenario(cfg, res, RunMode::evaluate, &trace);
  json out = report.summary();
  out["schema"] = "bevguard.report/1";
  out["config"] = to_json(cfg);
  std::ofstream(out_path(report_path, "report.json")) << out.dump(2) << '\n';
  std::cout << report.summary().dump(2) << '\n';
  return 0;
}

int cmd_build_flows(const Common& common, std::size_t scenarios, std::uint64_t seed, std::string out) {
  const ScenarioConfig cfg = from_json(base_json(common));
  const FlowDataset ds = build_flow_dataset(cfg, scenarios, seed);
  out = out_path(out, "flows.jsonl");
  save_flow_dataset(ds, out);
  std::printf("flows: train %zu (%zu scenarios), val %zu (%zu), test %zu (%zu) -> %s\n", ds.train.size(),
              ds.train_scenarios, ds.val.size(), ds.val_scenarios, ds.test.size(), ds.test_scenarios, out.c_str());
  return 0;
}

int cmd_train(const Common& common, const std::string& flows, temporal::TrainConfig train, std::string out) {
  const ScenarioConfig cfg = from_json(base_json(common));
  const FlowDataset ds = load_flow_dataset(flows);
  const auto model = train_model(ds, cfg, train);
  out = out_path(out, "model.json");
  temporal::save_model(model, out);
  std::vector<Eigen::MatrixXd> val;
  for (const auto& f : ds.val) val.push_back(temporal::flow_matrix(f, model));
  std::printf("trained on %zu flows: final train L_tr %.5f, val L_tr %.5f -> %s\n", ds.train.size(), model.final_loss,
              temporal::mean_l_tr(val, model), out.c_str());
  return 0;
}

int cmd_calibrate(const Common& common, std::size_t n, std::uint64_t base, bool fit, std::string out) {
  ScenarioConfig cfg = from_json(base_json(common));
  ResourceCache cache;
  ScenarioConfig model_cfg = cfg;
  model_cfg.defense.calibration_path.clear();
  const Resources res = cache.get(model_cfg);
  auto cal = build_calibration(cfg, seed_range(base, n), res);
  if (fit && cfg.defense.variant != Variant::gcp) throw ConfigError("--fit-weights applies to the gcp variant only");
  if (fit) {
    // Labeled validation batch: attacked observe runs on seeds disjoint from calibration.
    double f1 = 0.0;
    cal = fit_calibration_weights(cfg, cal, seed_range(base + 100000, std::max<std::size_t>(n / 2, 1)), res, &f1);
    std::printf("fitted weights omega_s=%.2f omega_t=%.2f (validation F1 %.3f)\n", cal.weights.omega_s,
                cal.weights.omega_t, f1);
  }
  out = out_path(out.empty() ? cfg.defense.calibration_path : out, "calibration-" + std::string(to_string(cfg.defense.variant)) + ".json");
  stattest::save_calibration(cal, out);
  std::printf("calibration: %zu scores from %zu runs, spatial alpha %.6f -> %s\n", cal.size(), n, cal.alpha_spatial,
              out.c_str());
  return 0;
}

int cmd_evaluate(const Common& common, std::size_t n, std::uint64_t base, const std::vector<std::string>& variants,
                 unsigned threads, bool plots, std::string out) {
  const json base_cfg = base_json(common);
  SweepAxis axis{"defense.variant", {}};
  for (const auto& v : variants) axis.values.push_back(v);
  ResourceCache cache;
  const auto result = run_sweep(base_cfg, {axis}, seed_range(base, n), cache, threads);
  json report = {{"schema", "bevguard.evaluation/1"}, {"seeds", seed_range(base, n)}, {"variants", json::array()}};
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    print_row(variants[i], result.rows[i].reports);
    json rows = json::array();
    for (const auto& r : result.rows[i].reports) rows.push_back(r.summary());
    report["variants"].push_back({{"variant", variants[i]}, {"runs", rows}});
  }
  out = out_path(out, "evaluation.json");
  std::ofstream(out) << report.dump(2) << '\n';
  if (plots) {
    for (std::size_t i = 0; i < result.rows.size(); ++i) {
      std::vector<double> clean, attacked;
      for (const auto& r : result.rows[i].reports) {
        for (const auto& s : r.scores) (s.attacked ? attacked : clean).push_back(s.raw.l_csc);
      }
      if (clean.empty() && attacked.empty()) continue;
      const auto path = fs::path(out).replace_filename("scores-" + variants[i] + ".svg").string();
      write_histogram_svg(path, "L_csc by message label (" + variants[i] + ")", {{"clean", clean}, {"attacked", attacked}});
    }
  }
  return 0;
}

int cmd_sweep(const Common& common, const std::vector<std::string>& grid, std::size_t n, std::uint64_t base,
              unsigned threads, bool plot, std::string out) {
  std::vector<SweepAxis> axes;
  for (const auto& g : grid) axes.push_back(parse_axis(g));
  ResourceCache cache;
  const auto result = run_sweep(base_json(common), axes, seed_range(base, n), cache, threads);
  out = out_path(out, "sweep.csv");
  std::ofstream csv(out);
  write_sweep_csv(result, csv);
  write_sweep_csv(result, std::cout);
  if (plot && !axes.empty() && axes.size() == 1 && axes[0].values.front().is_number()) {
    Series s{"AP@0.5", {}, {}}, s7{"AP@0.7", {}, {}};
    for (const auto& row : result.rows) {
      s.x.push_back(row.values[0].get<double>());
      s.y.push_back(row.ap50.mean);
      s7.x.push_back(row.values[0].get<double>());
      s7.y.push_back(row.ap70.mean);
    }
    write_line_svg(fs::path(out).replace_extension(".svg").string(), "AP vs " + axes[0].key, axes[0].key, "AP",
                   {s, s7});
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collaborative-perception attack and defense simulator"};
  app.require_subcommand(1);

  Common c_sim, c_flows, c_train, c_cal, c_eval, c_sweep;

  auto* sim = app.add_subcommand("simulate", "Run one scenario and write its JSONL trace and report");
  std::string sim_config, trace_path, report_path;
  sim->add_option("scenario", sim_config, "Scenario config JSON");
  add_common(sim, c_sim);
  sim->add_option("--trace", trace_path, "Trace output path");
  sim->add_option("--report", report_path, "Report output path");

  auto* flows = app.add_subcommand("build-flows", "Build the clean flow dataset (8:1:1 split by scenario)");
  add_common(flows, c_flows);
  std::size_t flow_scenarios = 50;
  std::uint64_t flow_seed = 1000;
  std::string flows_out;
  flows->add_option("--scenarios", flow_scenarios, "Number of clean scenarios");
  flows->add_option("--seed", flow_seed, "Base seed");
  flows->add_option("--out", flows_out, "Output JSONL");

  auto* train = app.add_subcommand("train-ae", "Train the LSTM autoencoder on a flow dataset");
  add_common(train, c_train);
  std::string flows_in, model_out;
  temporal::TrainConfig tcfg;
  train->add_option("--flows", flows_in, "Flow dataset JSONL")->required();
  train->add_option("--epochs", tcfg.epochs, "Training epochs");
  train->add_option("--batch", tcfg.batch_size, "Batch size");
  train->add_option("--lr", tcfg.learning_rate, "Adam step size");
  train->add_option("--seed", tcfg.seed, "Initialization and shuffling seed");
  train->add_option("--out", model_out, "Model output JSON");

  auto* cal = app.add_subcommand("calibrate", "Build a calibration set from attack-free runs");
  add_common(cal, c_cal);
  std::size_t cal_runs = 40;
  std::uint64_t cal_base = 5000;
  bool fit = false;
  std::string cal_out;
  cal->add_option("--runs", cal_runs, "Number of clean runs");
  cal->add_option("--seed", cal_base, "First seed");
  cal->add_flag("--fit-weights", fit, "Grid-search omega on a labeled attacked batch");
  cal->add_option("--out", cal_out, "Calibration output JSON");

  auto* eval = app.add_subcommand("evaluate", "Compare defense variants over seeds");
  add_common(eval, c_eval);
  std::size_t eval_seeds = 20;
  std::uint64_t eval_base = 1;
  std::vector<std::string> variants{"lower", "none", "baseline", "gcp-s", "gcp-t", "gcp", "upper"};
  unsigned eval_threads = default_threads();
  bool plots = false;
  std::string eval_out;
  eval->add_option("--seeds", eval_seeds, "Number of seeds");
  eval->add_option("--seed", eval_base, "First seed");
  eval->add_option("--variants", variants, "Variants to compare")->delimiter(',');
  eval->add_option("--threads", eval_threads, "Worker threads");
  eval->add_flag("--plots", plots, "Write SVG score histograms");
  eval->add_option("--out", eval_out, "Evaluation JSON");

  auto* sweep = app.add_subcommand("sweep", "Run a parameter grid and write a CSV matrix");
  add_common(sweep, c_sweep);
  std::vector<std::string> grid;
  std::size_t sweep_seeds = 5;
  std::uint64_t sweep_base = 1;
  unsigned sweep_threads = default_threads();
  bool sweep_plot = false;
  std::string sweep_out;
  sweep->add_option("--grid", grid, "Axis as key=v1,v2 (repeatable)")->required();
  sweep->add_option("--seeds", sweep_seeds, "Seeds per cell");
  sweep->add_option("--seed", sweep_base, "First seed");
  sweep->add_option("--threads", sweep_threads, "Worker threads");
  sweep->add_flag("--plot", sweep_plot, "Write an AP-vs-parameter SVG for a single numeric axis");
  sweep->add_option("--out", sweep_out, "CSV output");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*sim) return cmd_simulate(c_sim, trace_path, report_path, sim_config);
    if (*flows) return cmd_build_flows(c_flows, flow_scenarios, flow_seed, flows_out);
    if (*train) return cmd_train(c_train, flows_in, tcfg, model_out);
    if (*cal) return cmd_calibrate(c_cal, cal_runs, cal_base, fit, cal_out);
    if (*eval) return cmd_evaluate(c_eval, eval_seeds, eval_base, variants, eval_threads, plots, eval_out);
    if (*sweep) return cmd_sweep(c_sweep, grid, sweep_seeds, sweep_base, sweep_threads, sweep_plot, sweep_out);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
