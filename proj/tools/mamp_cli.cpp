#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "mamp/harness.hpp"

namespace {

struct Flags {
  std::string config;
  std::string algo, variance_mode, mode, out;
  std::string m, n, kappa, mu, snr_db, iters, trials, seed, damping_length;
};

void add_common(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "flat key-value config file; CLI flags override");
  app->add_option("--algo", f.algo, "amp | oamp | mamp");
  app->add_option("--M", f.m, "number of measurements");
  app->add_option("--N", f.n, "signal dimension");
  app->add_option("--kappa", f.kappa, "condition number of A");
  app->add_option("--mu", f.mu, "Bernoulli-Gaussian sparsity (P{x_i != 0})");
  app->add_option("--snr-db", f.snr_db, "SNR in dB; sigma^2 = 10^(-snr_db/10)");
  app->add_option("--iters", f.iters, "iteration count (<= 128)");
  app->add_option("--trials", f.trials, "number of Monte Carlo trials");
  app->add_option("--seed", f.seed, "base seed; trial i uses seed + i");
  app->add_option("--damping-length", f.damping_length, "damping window length L");
  app->add_option("--variance-mode", f.variance_mode, "analytic_se | empirical_residual");
  app->add_option("--mode", f.mode, "sim | se | both");
  app->add_option("--out", f.out, "output path");
}

std::map<std::string, std::string> overrides(const Flags& f) {
  std::map<std::string, std::string> kv;
  auto put = [&](const char* k, const std::string& v) {
    if (!v.empty()) kv[k] = v;
  };
  put("algo", f.algo);
  put("M", f.m);
  put("N", f.n);
  put("kappa", f.kappa);
  put("mu", f.mu);
  put("snr-db", f.snr_db);
  put("iters", f.iters);
  put("trials", f.trials);
  put("seed", f.seed);
  put("damping-length", f.damping_length);
  put("variance-mode", f.variance_mode);
  put("mode", f.mode);
  put("out", f.out);
  return kv;
}

mamp::ExperimentConfig build_config(const Flags& f) {
  std::map<std::string, std::string> file_kv;
  if (!f.config.empty()) file_kv = mamp::parse_config_file(f.config);
  return mamp::load_config(file_kv, overrides(f));
}

void emit(const mamp::RunReportCollection& coll) {
  if (coll.cfg.output_path.empty()) {
    std::cout << mamp::csv_to_string(coll);
  } else {
    mamp::write_csv(coll, coll.cfg.output_path);
    std::cerr << "wrote " << coll.cfg.output_path << "\n";
  }
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"signal recovery benchmarks: memory AMP, OAMP/VAMP, AMP"};
  app.require_subcommand(1);

  Flags f;
  std::string sweep_kappas, sweep_snrs, sweep_Ls;

  CLI::App* cmd_run = app.add_subcommand("run", "simulate and/or track state evolution, emit CSV");
  add_common(cmd_run, f);
  CLI::App* cmd_se = app.add_subcommand("se", "state evolution only (no simulation)");
  add_common(cmd_se, f);
  CLI::App* cmd_sweep = app.add_subcommand("sweep", "grid over kappa / snr-db / damping-length");
  add_common(cmd_sweep, f);
  cmd_sweep->add_option("--kappa-list", sweep_kappas, "comma-separated kappa values");
  cmd_sweep->add_option("--snr-list", sweep_snrs, "comma-separated SNR values (dB)");
  cmd_sweep->add_option("--L-list", sweep_Ls, "comma-separated damping lengths");
  CLI::App* cmd_diag = app.add_subcommand("diagnose", "orthogonality / Gaussianity diagnostics");
  add_common(cmd_diag, f);
  CLI::App* cmd_plot = app.add_subcommand("plot", "run the experiment and write an SVG plot");
  add_common(cmd_plot, f);

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_run->parsed()) {
      emit(mamp::run_experiment(build_config(f)));
    } else if (cmd_se->parsed()) {
      mamp::ExperimentConfig cfg = build_config(f);
      cfg.mode = "se";
      emit(mamp::run_experiment(cfg));
    } else if (cmd_sweep->parsed()) {
      mamp::ExperimentConfig base = build_config(f);
      auto kappas = split_csv(sweep_kappas.empty() ? std::to_string(base.kappa) : sweep_kappas);
      auto snrs = split_csv(sweep_snrs.empty() ? std::to_string(base.snr_db) : sweep_snrs);
      auto Ls = split_csv(sweep_Ls.empty() ? std::to_string(base.damping_length) : sweep_Ls);
      for (const auto& ks : kappas) {
        for (const auto& ss : snrs) {
          for (const auto& ls : Ls) {
            mamp::ExperimentConfig cfg = base;
            cfg.kappa = std::stod(ks);
            cfg.snr_db = std::stod(ss);
            cfg.damping_length = std::stoul(ls);
            std::ostringstream name;
            if (!base.output_path.empty()) {
              name << base.output_path << ".kappa" << ks << "_snr" << ss << "_L" << ls << ".csv";
              cfg.output_path = name.str();
            }
            std::cerr << "sweep: kappa=" << ks << " snr-db=" << ss << " L=" << ls << "\n";
            emit(mamp::run_experiment(cfg));
          }
        }
      }
    } else if (cmd_diag->parsed()) {
      mamp::ExperimentConfig cfg = build_config(f);
      if (cfg.algo != "mamp") cfg.algo = "mamp";
      auto diag = mamp::diagnose_orthogonality(cfg, cfg.trials);
      std::printf("seeds: %zu\n", diag.seeds);
      std::printf("max |corr|: %.6g\n", diag.max_abs_corr);
      std::printf("max excess kurtosis: %.6g\n", diag.max_excess_kurtosis);
      const auto T = diag.mean_corr.rows();
      std::printf("mean corr matrix (rows t, cols t' <= t):\n");
      for (Eigen::Index t = 0; t < T; ++t) {
        for (Eigen::Index tp = 0; tp <= t; ++tp) std::printf("% .4f ", diag.mean_corr(t, tp));
        std::printf("\n");
      }
    } else if (cmd_plot->parsed()) {
      mamp::ExperimentConfig cfg = build_config(f);
      const std::string svg_path = cfg.output_path.empty() ? "mamp_plot.svg" : cfg.output_path;
      cfg.output_path.clear();
      auto coll = mamp::run_experiment(cfg);
      mamp::write_plot_svg(coll, svg_path);
      std::cerr << "wrote " << svg_path << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
