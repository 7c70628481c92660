// Copyright 2026 The detect-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// detect_lab command-line driver.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "detect_lab/errors.h"
#include "detect_lab/graph.h"
#include "detect_lab/graph_sim.h"
#include "detect_lab/harness.h"
#include "detect_lab/info_metrics.h"
#include "detect_lab/rng.h"
#include "detect_lab/sequential.h"
#include "detect_lab/spectral.h"
#include "detect_lab/temporal_sim.h"
#include "detect_lab/text_format.h"

namespace fs = std::filesystem;
using namespace detect_lab;
using json = nlohmann::ordered_json;

namespace {

// --config has to be known before the option table is built, because config
// values become the option defaults.
std::optional<std::string> find_config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return std::string(argv[i + 1]);
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return std::nullopt;
}

struct Context {
  harness::RunConfig config;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;

  std::uint64_t seed_or(std::uint64_t fallback) const {
    return seed ? *seed : config.get_seed("experiment.seed", fallback);
  }

  fs::path output(const std::string& name) const {
    fs::create_directories(out_dir);
    return fs::path(out_dir) / name;
  }

  void emit_json(const std::string& name, const json& j) const {
    const auto text = j.dump(2) + "\n";
    std::ofstream(output(name)) << text;
    std::cout << text;
  }

  void emit_grid(const std::string& name, const harness::SweepGrid& grid) const {
    const auto path = output(name);
    std::ofstream out(path);
    harness::write_csv(out, grid);
    std::cout << "wrote " << path.string() << " (" << grid.rows.size() << " rows)\n";
  }
};

// Option whose default comes from "<section>.<name>" in the config file.
template <typename T>
CLI::Option* bound(CLI::App* sub, const Context& ctx, const std::string& name, T& var, const std::string& help) {
  const auto key = sub->get_name() + "." + name;
  if (ctx.config.has(key)) {
    if constexpr (std::is_same_v<T, std::string>) {
      var = ctx.config.get_string(key, var);
    } else if constexpr (std::is_same_v<T, bool>) {
      var = ctx.config.get_bool(key, var);
    } else if constexpr (std::is_integral_v<T>) {
      var = static_cast<T>(ctx.config.get_int(key, static_cast<std::int64_t>(var)));
    } else {
      var = static_cast<T>(ctx.config.get_double(key, static_cast<double>(var)));
    }
  }
  if constexpr (std::is_same_v<T, bool>) {
    return sub->add_flag("--" + name, var, help);
  } else {
    return sub->add_option("--" + name, var, help)->capture_default_str();
  }
}

std::optional<temporal::HawkesKernel> parse_hawkes(const std::string& text, double& delta_h) {
  if (text.empty()) return std::nullopt;
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      parts.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("--hawkes expects a,beta,delta_h");
    }
  }
  if (parts.size() != 3) throw ConfigError("--hawkes expects a,beta,delta_h");
  delta_h = parts[2];
  return temporal::HawkesKernel{parts[0], parts[1]};
}

sequential::ScanMode parse_scan_mode(const std::string& mode) {
  if (mode == "oracle") return sequential::ScanMode::kOracleSet;
  if (mode == "topm") return sequential::ScanMode::kTopEdges;
  throw ConfigError("--mode must be oracle or topm");
}

sequential::TemporalModel temporal_model(double mu, double delta, const std::string& hawkes) {
  sequential::TemporalModel model;
  model.mu = mu;
  model.delta = delta;
  double delta_h = 0.0;
  if (auto kernel = parse_hawkes(hawkes, delta_h)) {
    model.kind = temporal::ProcessKind::kHawkes;
    model.kernel = *kernel;
    model.delta_h = delta_h;
  }
  return model;
}

json arl_json(const sequential::ArlCalibration& c) {
  return {{"threshold", c.threshold},       {"achieved_arl", c.achieved_arl}, {"ci_low", c.ci_low},
          {"ci_high", c.ci_high},           {"replicates", c.replicates},     {"horizon_bins", c.horizon_bins},
          {"censored", c.censored},         {"reached", c.reached}};
}

std::string with_extension(const std::string& path, const std::string& ext) {
  return fs::path(path).replace_extension(ext).string();
}

}  // namespace

int main(int argc, char** argv) {
  Context ctx;
  CLI::App app{"Detectability experiments for planted dense subgraphs and network change points"};
  app.require_subcommand(1);
  // "--h" is the bin width, so help is long-form only.
  app.set_help_flag("--help", "print this help message and exit");
  app.set_version_flag("--version", std::string(harness::kCodeVersion));

  try {
    if (auto path = find_config_path(argc, argv)) ctx.config = harness::RunConfig::load(*path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }

  std::string config_path;
  std::uint64_t seed_value = 0;
  app.add_option("--config", config_path, "key = value config file (JSON accepted)");
  auto* seed_opt = app.add_option("--seed", seed_value, "base seed");
  app.add_option("--out", ctx.out_dir, "output directory")->capture_default_str();

  // threshold
  auto* th = app.add_subcommand("threshold", "information budget and detectability margins");
  std::int64_t th_n = 100000;
  std::int64_t th_k = 500;
  double th_p = 0.01;
  double th_delta = std::nan("");
  double th_rate = std::nan("");
  double th_alpha = std::nan("");
  std::string th_penalty = "logn";
  bound(th, ctx, "n", th_n, "vertices");
  bound(th, ctx, "k", th_k, "planted set size");
  bound(th, ctx, "p", th_p, "background edge probability");
  bound(th, ctx, "delta", th_delta, "edge lift (defaults to the minimal detectable lift)");
  bound(th, ctx, "info-rate", th_rate, "temporal KL rate I");
  bound(th, ctx, "alpha", th_alpha, "false-alarm level for the delay prediction");
  bound(th, ctx, "penalty", th_penalty, "logn or logbinom")->check(CLI::IsMember({"logn", "logbinom"}));

  // simulate-static
  auto* ss = app.add_subcommand("simulate-static", "write an ER or planted graph");
  std::int64_t ss_n = 2000;
  std::int64_t ss_k = 60;
  double ss_p = 0.005;
  double ss_delta = 0.0;
  double ss_eps = 0.0;
  std::string ss_mode = "rewire";
  bool ss_null = false;
  std::string ss_file = "graph.txt";
  bound(ss, ctx, "n", ss_n, "vertices");
  bound(ss, ctx, "k", ss_k, "planted set size");
  bound(ss, ctx, "p", ss_p, "background edge probability");
  bound(ss, ctx, "delta", ss_delta, "internal lift");
  bound(ss, ctx, "null", ss_null, "sample ER(n, p) without a planted set");
  bound(ss, ctx, "perturb", ss_eps, "fraction of edges to perturb");
  bound(ss, ctx, "perturb-mode", ss_mode, "add, drop or rewire")->check(CLI::IsMember({"add", "drop", "rewire"}));
  bound(ss, ctx, "file", ss_file, "output file name inside --out");

  // detect-static
  auto* ds = app.add_subcommand("detect-static", "non-backtracking localized-energy test");
  std::string ds_graph;
  std::int64_t ds_k = 60;
  double ds_alpha = 0.05;
  std::string ds_method = "nb";
  bool ds_prune = false;
  bool ds_degnorm = false;
  std::int64_t ds_calib = 0;
  double ds_threshold = std::nan("");
  bound(ds, ctx, "graph", ds_graph, "graph file")->required(!ctx.config.has("detect-static.graph"));
  bound(ds, ctx, "k", ds_k, "planted set size");
  bound(ds, ctx, "alpha", ds_alpha, "false-positive level");
  bound(ds, ctx, "method", ds_method, "nb or bethe")->check(CLI::IsMember({"nb", "bethe"}));
  bound(ds, ctx, "prune", ds_prune, "prune to the top-k vertices during power iteration");
  bound(ds, ctx, "degree-normalize", ds_degnorm, "divide vertex scores by sqrt(degree)");
  bound(ds, ctx, "calib-replicates", ds_calib, "null replicates (default ceil(10/alpha))");
  bound(ds, ctx, "threshold", ds_threshold, "use this threshold instead of calibrating");

  // simulate-temporal
  auto* st = app.add_subcommand("simulate-temporal", "write a Poisson or Hawkes event stream");
  std::int64_t st_n = 20;
  std::int64_t st_k = 3;
  double st_mu = 1.0;
  double st_delta = 1.0;
  double st_tau = 0.0;
  double st_T = 100.0;
  std::string st_hawkes;
  std::string st_file = "events.csv";
  bound(st, ctx, "n", st_n, "vertices");
  bound(st, ctx, "k", st_k, "planted set size");
  bound(st, ctx, "mu", st_mu, "baseline rate per ordered pair");
  bound(st, ctx, "delta", st_delta, "Poisson rate lift after the change");
  bound(st, ctx, "tau", st_tau, "change time");
  bound(st, ctx, "T", st_T, "horizon");
  bound(st, ctx, "hawkes", st_hawkes, "a,beta,delta_h for a Hawkes stream");
  bound(st, ctx, "file", st_file, "event CSV name inside --out (metadata goes next to it as .json)");

  // detect-temporal
  auto* dt = app.add_subcommand("detect-temporal", "CUSUM scan over an event stream");
  std::string dt_events;
  std::string dt_meta;
  double dt_mu = 1.0;
  double dt_delta = 1.0;
  std::string dt_hawkes;
  double dt_h = 1.0;
  double dt_alpha = 0.01;
  std::int64_t dt_window = 0;
  std::string dt_mode = "topm";
  std::int64_t dt_k = 0;
  std::int64_t dt_calib = 400;
  double dt_threshold = std::nan("");
  std::string dt_path;
  bound(dt, ctx, "events", dt_events, "event CSV")->required(!ctx.config.has("detect-temporal.events"));
  bound(dt, ctx, "metadata", dt_meta, "metadata JSON (defaults to the CSV path with .json)");
  bound(dt, ctx, "mu", dt_mu, "baseline rate");
  bound(dt, ctx, "delta", dt_delta, "Poisson lift");
  bound(dt, ctx, "hawkes", dt_hawkes, "a,beta,delta_h");
  bound(dt, ctx, "h", dt_h, "bin width");
  bound(dt, ctx, "alpha", dt_alpha, "false-alarm level, target ARL 1/alpha bins");
  bound(dt, ctx, "window", dt_window, "sliding window in bins (0 = none)");
  bound(dt, ctx, "mode", dt_mode, "oracle or topm")->check(CLI::IsMember({"oracle", "topm"}));
  bound(dt, ctx, "k", dt_k, "planted size (defaults to the metadata value)");
  bound(dt, ctx, "calib-replicates", dt_calib, "null paths for threshold calibration");
  bound(dt, ctx, "threshold", dt_threshold, "use this threshold instead of calibrating");
  bound(dt, ctx, "path-csv", dt_path, "also write the statistic path as bin,G");

  // calibrate
  auto* ca = app.add_subcommand("calibrate", "CUSUM threshold for a target average run length");
  double ca_target = 100.0;
  double ca_mu = 1.0;
  double ca_delta = 1.0;
  std::string ca_hawkes;
  double ca_h = 1.0;
  std::int64_t ca_n = 2;
  std::int64_t ca_k = 2;
  std::string ca_mode = "oracle";
  std::int64_t ca_window = 0;
  std::int64_t ca_reps = 400;
  bool ca_point = false;
  bound(ca, ctx, "target-arl", ca_target, "target ARL in bins");
  bound(ca, ctx, "mu", ca_mu, "baseline rate");
  bound(ca, ctx, "delta", ca_delta, "Poisson lift");
  bound(ca, ctx, "hawkes", ca_hawkes, "a,beta,delta_h");
  bound(ca, ctx, "h", ca_h, "bin width");
  bound(ca, ctx, "n", ca_n, "vertices (top-m mode)");
  bound(ca, ctx, "k", ca_k, "planted size");
  bound(ca, ctx, "mode", ca_mode, "oracle or topm")->check(CLI::IsMember({"oracle", "topm"}));
  bound(ca, ctx, "window", ca_window, "sliding window in bins (0 = none)");
  bound(ca, ctx, "replicates", ca_reps, "null paths");
  bound(ca, ctx, "point-estimate", ca_point, "match the mean run length instead of its lower bound");

  // sweep
  auto* sw = app.add_subcommand("sweep", "parameter sweeps written as CSV");
  std::string sw_kind;
  sw->add_option("kind", sw_kind, "heatmap, temporal, delay or robustness")
      ->required()
      ->check(CLI::IsMember({"heatmap", "temporal", "delay", "robustness"}));

  auto* cs = app.add_subcommand("case-study", "worked numeric example as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  if (seed_opt->count() > 0) ctx.seed = seed_value;
  if (ctx.seed) ctx.config.set("experiment.seed", std::to_string(*ctx.seed));

  try {
    if (th->parsed()) {
      const auto mode = th_penalty == "logn" ? info::PenaltyMode::kLogN : info::PenaltyMode::kLogBinomial;
      const auto dmin = info::delta_min(th_n, th_p, th_k);
      const double delta = std::isnan(th_delta) ? dmin.value : th_delta;
      const auto budget = info::info_budget_static(th_n, th_k, {th_p, delta}, mode);
      json j;
      j["n"] = th_n;
      j["k"] = th_k;
      j["p"] = th_p;
      j["delta"] = delta;
      j["chi2_edge"] = info::chi_square_bernoulli({th_p, delta});
      j["accumulated"] = budget.accumulated;
      j["penalty"] = budget.penalty;
      j["penalty_mode"] = th_penalty;
      j["margin"] = budget.margin;
      j["delta_min"] = dmin.value;
      j["delta_min_clamped"] = dmin.clamped;
      j["sparse_lift_threshold"] = info::sparse_lift_threshold(th_n, th_p * static_cast<double>(th_n), th_k);
      if (!std::isnan(th_rate)) {
        j["info_rate"] = th_rate;
        j["required_T"] = info::required_horizon(th_n, th_rate);
        if (!std::isnan(th_alpha)) j["expected_delay"] = info::expected_delay(th_alpha, th_rate);
      }
      ctx.emit_json("threshold.json", j);
    } else if (ss->parsed()) {
      const auto seed = ctx.seed_or(1);
      Graph g;
      std::vector<Vertex> planted;
      if (ss_null) {
        g = generate_er(static_cast<std::size_t>(ss_n), ss_p, seed);
      } else {
        auto inst = generate_planted(static_cast<std::size_t>(ss_n), ss_p, ss_delta, static_cast<std::size_t>(ss_k), seed);
        g = std::move(inst.graph);
        planted = std::move(inst.planted);
      }
      if (ss_eps > 0.0) {
        const auto mode = ss_mode == "add" ? PerturbMode::kAdd : ss_mode == "drop" ? PerturbMode::kDrop : PerturbMode::kRewire;
        g = perturb(g, {ss_eps, mode, derive_seed(seed, 4), std::nullopt});
      }
      const auto path = ctx.output(ss_file);
      std::ofstream out(path);
      write_graph(out, g, ss_null ? nullptr : &planted);
      std::cout << "wrote " << path.string() << " (n=" << g.num_vertices() << ", m=" << g.num_edges() << ")\n";
    } else if (ds->parsed()) {
      std::ifstream in(ds_graph);
      if (!in) throw ConfigError("cannot open graph file " + ds_graph);
      const auto file = read_graph(in);
      spectral::StaticDetectorConfig config;
      config.method = ds_method == "bethe" ? spectral::ScoreMethod::kBetheHessian : spectral::ScoreMethod::kNonBacktracking;
      config.power.prune = ds_prune;
      config.power.degree_normalize = ds_degnorm;
      const auto seed = ctx.seed_or(1);
      const auto k = static_cast<std::size_t>(ds_k);
      spectral::SpectralVerdict verdict;
      if (!std::isnan(ds_threshold)) {
        verdict = spectral::detect_static(file.graph, k, ds_threshold, config, seed);
      } else {
        require(ds_alpha > 0.0 && ds_alpha < 1.0, "alpha must lie in (0,1)");
        const auto reps = ds_calib > 0 ? static_cast<std::size_t>(ds_calib)
                                       : static_cast<std::size_t>(std::ceil(10.0 / ds_alpha));
        verdict = spectral::detect_static_calibrated(file.graph, k, ds_alpha, reps, config, seed);
      }
      json j;
      j["statistic"] = verdict.statistic;
      j["threshold"] = verdict.threshold;
      j["reject"] = verdict.reject;
      j["candidate_set"] = verdict.candidate_set;
      j["iterations_used"] = verdict.iterations_used;
      j["converged"] = verdict.converged;
      if (file.has_planted) {
        std::size_t hits = 0;
        for (auto v : verdict.candidate_set)
          hits += std::binary_search(file.planted.begin(), file.planted.end(), v) ? 1 : 0;
        j["planted_overlap"] = file.planted.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(file.planted.size());
      }
      ctx.emit_json("verdict.json", j);
    } else if (st->parsed()) {
      const auto seed = ctx.seed_or(1);
      double delta_h = 0.0;
      temporal::EventStream stream;
      if (auto kernel = parse_hawkes(st_hawkes, delta_h)) {
        stream = temporal::simulate_hawkes_network(static_cast<std::size_t>(st_n), st_mu, *kernel, delta_h,
                                                   static_cast<std::size_t>(st_k), st_tau, st_T, seed);
      } else {
        stream = temporal::simulate_poisson_network(static_cast<std::size_t>(st_n), st_mu, st_delta,
                                                    static_cast<std::size_t>(st_k), st_tau, st_T, seed);
      }
      const auto csv_path = ctx.output(st_file);
      std::ofstream csv(csv_path);
      temporal::write_events_csv(csv, stream);
      std::ofstream meta(with_extension(csv_path.string(), ".json"));
      temporal::write_metadata_json(meta, stream);
      std::cout << "wrote " << csv_path.string() << " (" << stream.total_events() << " events)\n";
    } else if (dt->parsed()) {
      std::ifstream csv(dt_events);
      if (!csv) throw ConfigError("cannot open event file " + dt_events);
      const auto meta_path = dt_meta.empty() ? with_extension(dt_events, ".json") : dt_meta;
      std::ifstream meta(meta_path);
      if (!meta) throw ConfigError("cannot open metadata file " + meta_path);
      const auto stream = temporal::read_event_stream(csv, meta);
      const auto seed = ctx.seed_or(1);

      sequential::DetectorConfig config;
      config.model = temporal_model(dt_mu, dt_delta, dt_hawkes);
      config.h = dt_h;
      config.mode = parse_scan_mode(dt_mode);
      config.k = dt_k > 0 ? static_cast<std::size_t>(dt_k)
                          : (stream.planted.empty() ? stream.params.k : stream.planted.size());
      if (dt_window > 0) config.window = static_cast<std::size_t>(dt_window);
      config.record_path = !dt_path.empty();
      if (config.mode == sequential::ScanMode::kOracleSet)
        require(!stream.planted.empty(), "oracle mode needs a planted set in the metadata");

      json calibration;
      if (!std::isnan(dt_threshold)) {
        config.threshold = dt_threshold;
      } else {
        require(dt_alpha > 0.0 && dt_alpha <= 0.1, "alpha must lie in (0, 0.1]");
        sequential::NullModel null_model;
        null_model.model = config.model;
        null_model.h = dt_h;
        null_model.mode = config.mode;
        null_model.n = stream.n;
        null_model.k = config.mode == sequential::ScanMode::kOracleSet ? stream.planted.size() : config.k;
        null_model.window = config.window;
        const auto cal = sequential::calibrate_arl(null_model, 1.0 / dt_alpha, static_cast<std::size_t>(dt_calib), seed);
        config.threshold = cal.threshold;
        calibration = arl_json(cal);
      }
      const auto report = sequential::detect_temporal(stream, config);
      json j;
      j["alarm"] = report.alarm_time.has_value();
      j["alarm_time"] = report.alarm_time ? json(*report.alarm_time) : json(nullptr);
      j["alarm_bin"] = report.alarm_bin ? json(*report.alarm_bin) : json(nullptr);
      j["threshold"] = report.threshold;
      j["change_time"] = report.change_time ? json(*report.change_time) : json(nullptr);
      j["delay"] = report.delay ? json(*report.delay) : json(nullptr);
      j["false_alarm"] = report.false_alarm;
      j["max_statistic"] = report.max_statistic;
      j["bins"] = report.bins;
      if (!calibration.is_null()) j["calibration"] = calibration;
      ctx.emit_json("alarm.json", j);
      if (!dt_path.empty()) {
        std::ofstream out(ctx.output(dt_path));
        out << "bin,G\n";
        for (std::size_t b = 0; b < report.path.size(); ++b) out << b << ',' << format_double(report.path[b]) << '\n';
      }
    } else if (ca->parsed()) {
      sequential::NullModel null_model;
      null_model.model = temporal_model(ca_mu, ca_delta, ca_hawkes);
      null_model.h = ca_h;
      null_model.mode = parse_scan_mode(ca_mode);
      null_model.n = static_cast<std::size_t>(ca_n);
      null_model.k = static_cast<std::size_t>(ca_k);
      if (ca_window > 0) null_model.window = static_cast<std::size_t>(ca_window);
      const auto cal = sequential::calibrate_arl(null_model, ca_target, static_cast<std::size_t>(ca_reps),
                                                 ctx.seed_or(1), !ca_point);
      json j = arl_json(cal);
      j["target_arl"] = ca_target;
      std::cout << "b = " << format_double(cal.threshold) << ", achieved ARL = " << format_double(cal.achieved_arl)
                << " bins\n";
      ctx.emit_json("calibration.json", j);
    } else if (sw->parsed()) {
      if (sw_kind == "heatmap") {
        ctx.emit_grid("heatmap.csv", harness::sweep_static_heatmap(ctx.config));
      } else if (sw_kind == "temporal") {
        const auto sweep = harness::sweep_temporal_threshold(ctx.config);
        ctx.emit_grid("temporal_threshold.csv", sweep.threshold);
        if (!sweep.overlay.rows.empty()) ctx.emit_grid("temporal_overlay.csv", sweep.overlay);
      } else if (sw_kind == "delay") {
        ctx.emit_grid("delay.csv", harness::sweep_delay(ctx.config));
      } else {
        const auto result = harness::robustness_experiment(ctx.config);
        ctx.emit_grid("robustness_static.csv", result.static_power);
        ctx.emit_grid("robustness_rho.csv", result.inflation);
        ctx.emit_grid("robustness_temporal.csv", result.temporal);
      }
      std::ofstream(ctx.output("sweep_" + sw_kind + ".conf")) << ctx.config.to_text();
    } else if (cs->parsed()) {
      ctx.emit_json("case_study.json", harness::case_study(ctx.config));
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "infeasible parameters: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
