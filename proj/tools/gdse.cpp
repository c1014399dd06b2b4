#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "gdse/experiments.hpp"
#include "gdse/verification.hpp"

using namespace gdse;

int main(int argc, char** argv) {
  CLI::App app{"finite-width gradient descent laboratory"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", dist;
  int m = -1, n = -1, q = -1, L = -1, iters = -1, reps = -1, mc = -1, fig = 1;
  double eta = -1.0, sigma_xi = -1.0, scale = 0.5;
  uint64_t seed = 0;
  bool seed_set = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--m", m, "sample size");
    sub->add_option("--n", n, "feature dimension");
    sub->add_option("--q", q, "network width");
    sub->add_option("--L", L, "number of layers");
    sub->add_option("--eta", eta, "step size (all layers)");
    sub->add_option("--sigma-xi", sigma_xi, "noise standard deviation");
    sub->add_option("--iters", iters, "GD iterations");
    sub->add_option("--reps", reps, "Monte Carlo replications");
    sub->add_option("--dist", dist, "feature distribution");
    sub->add_option("--seed", seed, "random seed")
        ->each([&](const std::string&) { seed_set = true; });
    sub->add_option("--mc-samples", mc, "fresh test points per replication");
    sub->add_option("--out-dir", out_dir, "output directory");
  };

  CLI::App* train = app.add_subcommand("train", "run augmented GD");
  add_common(train);
  CLI::App* se = app.add_subcommand("se", "run the state evolution engine");
  add_common(se);
  CLI::App* figure = app.add_subcommand("figure", "reproduce a figure");
  add_common(figure);
  figure->add_option("--fig", fig, "figure id (1-5)");
  figure->add_option("--scale", scale, "size/replication scale factor");
  CLI::App* verify = app.add_subcommand("verify", "run the invariant suite");
  add_common(verify);

  CLI11_PARSE(app, argc, argv);

  ExperimentConfig cfg;
  try {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw std::invalid_argument("config: cannot open file");
      nlohmann::json j;
      in >> j;
      cfg = j.get<ExperimentConfig>();
    }
    if (m >= 0) cfg.m = m;
    if (n >= 0) cfg.n = n;
    if (q >= 0) cfg.q = q;
    if (L >= 0) cfg.L = L;
    if (L >= 0 || eta >= 0.0) {
      double rate = eta >= 0.0 ? eta : (cfg.eta.empty() ? 2.0 : cfg.eta[0]);
      cfg.eta.assign(size_t(std::max(cfg.L, 1)), rate);
    }
    if (sigma_xi >= 0.0) cfg.sigma_xi = sigma_xi;
    if (iters >= 0) cfg.iters = iters;
    if (reps >= 0) cfg.reps = reps;
    if (!dist.empty()) cfg.feature_dist = dist;
    if (seed_set) cfg.seed = seed;
    if (mc >= 0) cfg.mc_samples = mc;

    std::string err = validate_config(cfg);
    if (!err.empty()) {
      std::cerr << "config error: " << err << "\n";
      return 1;
    }

    std::filesystem::create_directories(out_dir);
    if (train->parsed()) {
      auto rows = run_train(cfg);
      std::string path = out_dir + "/train.csv";
      write_train_csv(path, rows, cfg.L);
      std::cout << "wrote " << path << "\n";
      if (cfg.mode == "both") {
        auto curves = run_se_curves(cfg);
        write_se_csv(out_dir + "/se.csv", curves);
        std::cout << "wrote " << out_dir << "/se.csv\n";
      }
    } else if (se->parsed()) {
      auto curves = run_se_curves(cfg);
      std::string path = out_dir + "/se.csv";
      write_se_csv(path, curves);
      std::cout << "wrote " << path << "\n";
    } else if (figure->parsed()) {
      for (const std::string& f : reproduce_figure(fig, scale, cfg.seed,
                                                   out_dir))
        std::cout << "wrote " << f << "\n";
    } else if (verify->parsed()) {
      auto results = run_verification(cfg);
      bool all_pass = true;
      for (const auto& r : results) {
        std::printf("%-36s %s  measured=%.3e tol=%.3e %s\n", r.name.c_str(),
                    r.pass ? "PASS" : "FAIL", r.measured, r.tolerance,
                    r.note.c_str());
        all_pass = all_pass && r.pass;
      }
      if (!all_pass) return 2;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
