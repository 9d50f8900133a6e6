#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <numeric>

#include "json.hpp"
#include "safectrl/errors.hpp"
#include "safectrl/kinematics.hpp"
#include "safectrl/metrics.hpp"
#include "safectrl/scenario.hpp"
#include "safectrl/simulate.hpp"
#include "safectrl/trace_io.hpp"
#include "safectrl/train.hpp"

namespace fs = std::filesystem;
using namespace safectrl;

namespace {

std::vector<std::pair<std::string, std::string>> parse_sets(
    const std::vector<std::string>& sets) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const std::string& s : sets) {
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError(s, "expected key=value");
    out.push_back({s.substr(0, eq), s.substr(eq + 1)});
  }
  return out;
}

void write_manifest(const Scenario& sc, const std::string& path) {
  nlohmann::json j;
  j["config"] = nlohmann::json::parse(sc.resolved_json);
  j["seed"] = sc.seed;
  j["manipulator_hash"] = file_hash_hex(sc.manipulator_path);
  j["versions"] = {{"safectrl", "0.1.0"},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                 std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)}};
  std::ofstream out(path);
  out << j.dump(1) << "\n";
}

int run_one(const Scenario& sc, const std::string& outdir, bool verbose) {
  fs::create_directories(outdir);
  const SimResult r = run_scenario(sc);
  write_trace_csv(r.trace, outdir + "/trace.csv");
  write_metrics(r.metrics, outdir + "/metrics.txt");
  write_manifest(sc, outdir + "/run.json");
  if (verbose) {
    std::cout << "samples: " << r.trace.size()
              << "  path: " << r.metrics.path_length << " m"
              << "  rotation: " << r.metrics.rotation_deg << " deg"
              << "  max |e| tracking: " << r.metrics.max_eucl_tracking << " m\n";
    if (!r.step_seconds.empty()) {
      std::vector<double> ts = r.step_seconds;
      std::nth_element(ts.begin(), ts.begin() + ts.size() / 2, ts.end());
      std::cout << "median control step: " << ts[ts.size() / 2] * 1e3 << " ms\n";
    }
  }
  if (!r.completed) {
    std::cerr << "run failed: " << r.failure << " (partial trace kept)\n";
    return 1;
  }
  return 0;
}

struct VariantResult {
  std::string name;
  bool ok = false;
  std::string failure;
  Metrics metrics;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safety-critical manipulator control simulator"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir = "out", controller, trace_path, corpus_path;
  std::vector<std::string> sets;
  std::vector<double> sweep_values;
  std::vector<int> hidden_sizes{64};
  long long seed = -1;
  int epochs = 200;
  int corpus_size = 1200;
  int phases = 10;
  bool generate_corpus_flag = false;
  double d_safe_ref = 0.12;

  auto add_common = [&](CLI::App* cmd, bool needs_out) {
    cmd->add_option("--scenario", scenario_path, "scenario file")->required();
    cmd->add_option("--set", sets, "override: dotted.key=value (repeatable)");
    cmd->add_option("--seed", seed, "override the scenario seed");
    if (needs_out) cmd->add_option("--out", out_dir, "output directory");
  };

  CLI::App* cmd_run = app.add_subcommand("run", "run one scenario");
  add_common(cmd_run, true);
  cmd_run->add_option("--controller", controller,
                      "controller variant (tviblf-ecbf | nn-tviblf-ecbf | "
                      "nn-tviblf-aecbf)");

  CLI::App* cmd_validate = app.add_subcommand("validate", "validate a scenario file");
  add_common(cmd_validate, false);
  cmd_validate->add_option("--controller", controller, "controller variant");

  CLI::App* cmd_compare =
      app.add_subcommand("compare", "run all three controller variants");
  add_common(cmd_compare, true);

  CLI::App* cmd_sweep = app.add_subcommand("sweep-r", "sweep the ECBF gain ratio");
  add_common(cmd_sweep, true);
  cmd_sweep->add_option("--values", sweep_values, "r values")->required();

  CLI::App* cmd_train = app.add_subcommand("train-mlp", "train the position surrogate");
  add_common(cmd_train, true);
  cmd_train->add_option("--hidden", hidden_sizes, "hidden sizes (repeatable)");
  cmd_train->add_option("--epochs", epochs, "Levenberg-Marquardt step budget");
  cmd_train->add_option("--corpus", corpus_path, "existing corpus CSV");
  cmd_train->add_flag("--generate-corpus", generate_corpus_flag,
                      "harvest a corpus from baseline runs");
  cmd_train->add_option("--corpus-size", corpus_size, "records kept after decimation");
  cmd_train->add_option("--phases", phases, "trajectory phase shifts for harvesting");

  CLI::App* cmd_plot = app.add_subcommand("plot-data", "export plot-ready CSV files");
  cmd_plot->add_option("--trace", trace_path, "trace.csv from a run")->required();
  cmd_plot->add_option("--out", out_dir, "output directory");
  cmd_plot->add_option("--d-safe", d_safe_ref, "reference safety distance column");

  CLI11_PARSE(app, argc, argv);

  try {
    auto overrides = parse_sets(sets);
    if (!controller.empty()) overrides.push_back({"controller", controller});
    if (seed >= 0) overrides.push_back({"seed", std::to_string(seed)});

    if (app.got_subcommand(cmd_validate)) {
      const Scenario sc = load_scenario(scenario_path, overrides);
      std::cout << "scenario '" << sc.name << "' is valid ("
                << sc.model.dof << " dof, " << sc.obstacles.size()
                << " obstacles, controller " << sc.controller_variant << ")\n";
      return 0;
    }

    if (app.got_subcommand(cmd_run)) {
      const Scenario sc = load_scenario(scenario_path, overrides);
      return run_one(sc, out_dir, true);
    }

    if (app.got_subcommand(cmd_compare)) {
      const std::vector<std::string> variants = {"tviblf-ecbf", "nn-tviblf-ecbf",
                                                 "nn-tviblf-aecbf"};
      fs::create_directories(out_dir);
      std::vector<std::future<VariantResult>> futs;
      for (const std::string& v : variants) {
        futs.push_back(std::async(std::launch::async, [&, v]() {
          VariantResult res;
          res.name = v;
          try {
            auto ov = overrides;
            ov.push_back({"controller", v});
            const Scenario sc = load_scenario(scenario_path, ov);
            const SimResult r = run_scenario(sc);
            const std::string dir = out_dir + "/" + v;
            fs::create_directories(dir);
            write_trace_csv(r.trace, dir + "/trace.csv");
            write_metrics(r.metrics, dir + "/metrics.txt");
            write_manifest(sc, dir + "/run.json");
            res.metrics = r.metrics;
            res.ok = r.completed;
            if (!r.completed) res.failure = r.failure;
          } catch (const std::exception& e) {
            res.failure = e.what();
          }
          return res;
        }));
      }
      std::vector<VariantResult> results;
      for (auto& f : futs) results.push_back(f.get());

      std::ofstream table(out_dir + "/compare.txt");
      auto emit_row = [&](const std::string& label,
                          const std::function<double(const Metrics&)>& get) {
        table << label;
        for (const auto& r : results)
          table << "\t" << (r.ok ? fmt(get(r.metrics)) : "FAILED");
        table << "\n";
      };
      table << "metric";
      for (const auto& r : results) table << "\t" << r.name;
      table << "\n";
      emit_row("distance_m", [](const Metrics& m) { return m.path_length; });
      emit_row("rotation_deg", [](const Metrics& m) { return m.rotation_deg; });
      emit_row("ex_max_tracking", [](const Metrics& m) { return m.max_err_tracking[0]; });
      emit_row("ey_max_tracking", [](const Metrics& m) { return m.max_err_tracking[1]; });
      emit_row("ez_max_tracking", [](const Metrics& m) { return m.max_err_tracking.size() > 2 ? m.max_err_tracking[2] : 0.0; });
      emit_row("ed_max_tracking", [](const Metrics& m) { return m.max_eucl_tracking; });
      emit_row("ex_max_avoidance", [](const Metrics& m) { return m.max_err_avoidance[0]; });
      emit_row("ey_max_avoidance", [](const Metrics& m) { return m.max_err_avoidance[1]; });
      emit_row("ez_max_avoidance", [](const Metrics& m) { return m.max_err_avoidance.size() > 2 ? m.max_err_avoidance[2] : 0.0; });
      emit_row("ed_max_avoidance", [](const Metrics& m) { return m.max_eucl_avoidance; });
      emit_row("amse_tracking", [](const Metrics& m) { return m.amse_tracking; });
      emit_row("min_obstacle_distance_m", [](const Metrics& m) { return m.min_obstacle_distance; });

      bool all_ok = true;
      for (const auto& r : results) {
        if (!r.ok) {
          std::cerr << r.name << " failed: " << r.failure << "\n";
          all_ok = false;
        }
      }
      int assertions_failed = 0;
      if (all_ok) {
        auto check = [&](const std::string& what, double a, double b, double c) {
          const bool pass = a > b && b > c;
          table << "assert " << what << " (decreasing): "
                << (pass ? "PASS" : "FAIL") << " (" << fmt(a) << " / " << fmt(b)
                << " / " << fmt(c) << ")\n";
          if (!pass) ++assertions_failed;
        };
        check("movement", results[0].metrics.path_length,
              results[1].metrics.path_length, results[2].metrics.path_length);
        check("rotation", results[0].metrics.rotation_deg,
              results[1].metrics.rotation_deg, results[2].metrics.rotation_deg);
      }
      table.close();
      std::cout << "wrote " << out_dir << "/compare.txt\n";
      std::ifstream echo(out_dir + "/compare.txt");
      std::cout << echo.rdbuf();
      return all_ok ? (assertions_failed > 0 ? 2 : 0) : 1;
    }

    if (app.got_subcommand(cmd_sweep)) {
      for (double v : sweep_values)
        if (!(v > 0.0)) throw ConfigError("--values", "r values must be > 0");
      fs::create_directories(out_dir);
      std::ofstream summary(out_dir + "/sweep.txt");
      summary << "r\tmax_path_deviation_m\tmin_obstacle_distance_m\n";
      double best_r = 0.0, best_dev = std::numeric_limits<double>::infinity();
      bool all_ok = true;
      for (double v : sweep_values) {
        auto ov = overrides;
        ov.push_back({"safety.r_ratio", fmt(v)});
        const Scenario sc = load_scenario(scenario_path, ov);
        const std::string dir = out_dir + "/r_" + fmt(v);
        fs::create_directories(dir);
        const SimResult r = run_scenario(sc);
        write_trace_csv(r.trace, dir + "/trace.csv");
        write_metrics(r.metrics, dir + "/metrics.txt");
        write_manifest(sc, dir + "/run.json");
        if (!r.completed) {
          summary << fmt(v) << "\tFAILED\t-\n";
          all_ok = false;
          continue;
        }
        const double dev =
            std::max(r.metrics.max_eucl_tracking, r.metrics.max_eucl_avoidance);
        summary << fmt(v) << "\t" << fmt(dev) << "\t"
                << fmt(r.metrics.min_obstacle_distance) << "\n";
        if (dev < best_dev) {
          best_dev = dev;
          best_r = v;
        }
      }
      summary << "minimizer r=" << fmt(best_r) << " (max deviation "
              << fmt(best_dev) << " m)\n";
      summary.close();
      std::ifstream echo(out_dir + "/sweep.txt");
      std::cout << echo.rdbuf();
      return all_ok ? 0 : 1;
    }

    if (app.got_subcommand(cmd_train)) {
      const Scenario sc = load_scenario(scenario_path, overrides);
      fs::create_directories(out_dir);
      TrainingCorpus corpus;
      if (!corpus_path.empty()) {
        corpus = TrainingCorpus::load_csv(corpus_path, sc.model.dof,
                                          sc.model.task_dim);
      } else if (generate_corpus_flag) {
        std::cout << "harvesting corpus (" << phases << " phases)...\n";
        corpus = generate_corpus(sc, phases, corpus_size);
        corpus.save_csv(out_dir + "/corpus.csv");
        std::cout << "corpus: " << corpus.size() << " records -> " << out_dir
                  << "/corpus.csv\n";
      } else {
        throw ConfigError("--corpus",
                          "no corpus given; pass --corpus FILE or --generate-corpus");
      }

      std::ofstream report(out_dir + "/train_report.txt");
      report << "hidden\tepochs_run\ttrain_amse_m2\theldout_amse_m2\teval_us\n";
      for (int h : hidden_sizes) {
        TrainOptions opt;
        opt.hidden = h;
        opt.epochs = epochs;
        opt.seed = sc.seed;
        TrainReport rep;
        std::cout << "training hidden=" << h << "...\n";
        const MlpSurrogate s = train_mlp(corpus, sc.model, opt, &rep);
        const std::string model_path =
            out_dir + "/mlp" + std::to_string(h) + ".json";
        s.save(model_path);

        // Per-evaluation forward + jacobian timing.
        const Eigen::VectorXd u = Eigen::VectorXd::Zero(sc.model.task_dim);
        const Eigen::VectorXd q = sc.initial_q;
        const Eigen::VectorXd qd = Eigen::VectorXd::Zero(sc.model.dof);
        const auto t0 = std::chrono::steady_clock::now();
        constexpr int reps = 200;
        for (int i = 0; i < reps; ++i) {
          volatile double sink = surrogate_forward(s, sc.model, u, q, qd).sum() +
                                 surrogate_jacobian_wrt_input(s, sc.model, u, q, qd).sum();
          (void)sink;
        }
        const double us = std::chrono::duration<double, std::micro>(
                              std::chrono::steady_clock::now() - t0)
                              .count() /
                          reps;
        report << h << "\t" << rep.epochs_run << "\t" << fmt(rep.train_amse)
               << "\t" << fmt(rep.heldout_amse) << "\t" << fmt(us) << "\n";
        std::cout << "  heldout AMSE " << rep.heldout_amse << " m^2, "
                  << rep.epochs_run << " accepted steps -> " << model_path << "\n";
      }
      report.close();
      std::ifstream echo(out_dir + "/train_report.txt");
      std::cout << echo.rdbuf();
      return 0;
    }

    if (app.got_subcommand(cmd_plot)) {
      fs::create_directories(out_dir);
      const SimTrace tr = read_trace_csv(
          trace_path, {"t", "xd_x", "xd_y", "z1_x", "z1_y", "filter_active"});
      static const char* axes = "xyz";
      const int n = tr.task_dim;
      char buf[32];
      auto w = [&buf](std::ofstream& o, double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        o << v;
        (void)buf;
      };
      (void)w;

      std::ofstream err(out_dir + "/tracking_error.csv");
      err << "t,ex,ey";
      if (n > 2) err << ",ez";
      err << ",ed\n";
      for (int k = 0; k < tr.size(); ++k) {
        double e2 = 0.0;
        err << tr.at(k, "t");
        for (int a = 0; a < n; ++a) {
          const double e = tr.at(k, std::string("z1_") + axes[a]);
          e2 += e * e;
          err << ',' << e;
        }
        err << ',' << std::sqrt(e2) << "\n";
      }

      std::ofstream dist(out_dir + "/obstacle_distance.csv");
      dist << "t";
      for (int o = 1; o <= tr.n_obstacles; ++o) dist << ",dist_" << o;
      dist << ",d_safe\n";
      for (int k = 0; k < tr.size(); ++k) {
        dist << tr.at(k, "t");
        for (int o = 1; o <= tr.n_obstacles; ++o)
          dist << ',' << tr.at(k, "dist_" + std::to_string(o));
        dist << ',' << d_safe_ref << "\n";
      }

      std::ofstream traj(out_dir + "/trajectory.csv");
      traj << "t";
      for (int a = 0; a < n; ++a) traj << ',' << axes[a];
      for (int a = 0; a < n; ++a) traj << ",xd_" << axes[a];
      traj << "\n";
      const std::string pee = "p" + std::to_string(tr.dof) + "_";
      for (int k = 0; k < tr.size(); ++k) {
        traj << tr.at(k, "t");
        for (int a = 0; a < n; ++a) traj << ',' << tr.at(k, pee + axes[a]);
        for (int a = 0; a < n; ++a)
          traj << ',' << tr.at(k, std::string("xd_") + axes[a]);
        traj << "\n";
      }

      std::ofstream force(out_dir + "/control_force.csv");
      force << "t";
      for (int a = 0; a < n; ++a) force << ",F_" << axes[a];
      for (int a = 0; a < n; ++a) force << ",u_" << axes[a];
      force << ",filter_active\n";
      for (int k = 0; k < tr.size(); ++k) {
        force << tr.at(k, "t");
        for (int a = 0; a < n; ++a)
          force << ',' << tr.at(k, std::string("F_") + axes[a]);
        for (int a = 0; a < n; ++a)
          force << ',' << tr.at(k, std::string("u_") + axes[a]);
        force << ',' << tr.at(k, "filter_active") << "\n";
      }
      std::cout << "wrote tracking_error.csv, obstacle_distance.csv, "
                   "trajectory.csv, control_force.csv in "
                << out_dir << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
