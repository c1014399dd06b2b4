#pragma once

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>
#include <thread>
#include <vector>

#include "gdse/augmented_gd.hpp"
#include "gdse/data_model.hpp"
#include "gdse/evaluation.hpp"
#include "gdse/network.hpp"
#include "gdse/rng.hpp"
#include "gdse/state_evolution.hpp"
#include "gdse/svg.hpp"

namespace gdse {

struct ExperimentConfig {
  std::string mode = "train";  // train | se | both | verify | figure
  std::string teacher = "single_index";  // or multi_index
  int teacher_dim = 10;
  std::string activation = "sigmoid";
  std::string link = "tanh";
  int m = 300, n = 600, q = 10, L = 2;
  std::vector<double> eta{2.0, 2.0};  // per layer; broadcast from CLI scalar
  double sigma_xi = 0.5;              // noise std (sigma_xi^2 = 1/4 default)
  int iters = 70;
  int reps = 120;
  std::string feature_dist = "gaussian";
  uint64_t seed = 1;
  int mc_samples = 50000;  // fresh test points per replication
  int se_samples = 20000;  // SE ensemble size
};

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = nlohmann::json{{"mode", c.mode},
                     {"teacher", c.teacher},
                     {"teacher_dim", c.teacher_dim},
                     {"activation", c.activation},
                     {"link", c.link},
                     {"m", c.m},
                     {"n", c.n},
                     {"q", c.q},
                     {"L", c.L},
                     {"eta", c.eta},
                     {"sigma_xi", c.sigma_xi},
                     {"iters", c.iters},
                     {"reps", c.reps},
                     {"feature_dist", c.feature_dist},
                     {"seed", c.seed},
                     {"mc_samples", c.mc_samples},
                     {"se_samples", c.se_samples}};
}

inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  ExperimentConfig d;
  c.mode = j.value("mode", d.mode);
  c.teacher = j.value("teacher", d.teacher);
  c.teacher_dim = j.value("teacher_dim", d.teacher_dim);
  c.activation = j.value("activation", d.activation);
  c.link = j.value("link", d.link);
  c.m = j.value("m", d.m);
  c.n = j.value("n", d.n);
  c.q = j.value("q", d.q);
  c.L = j.value("L", d.L);
  if (j.contains("eta")) {
    if (j["eta"].is_number())
      c.eta.assign(size_t(std::max(c.L, 1)), j["eta"].get<double>());
    else
      c.eta = j["eta"].get<std::vector<double>>();
  } else {
    c.eta = d.eta;
  }
  c.sigma_xi = j.value("sigma_xi", d.sigma_xi);
  c.iters = j.value("iters", d.iters);
  c.reps = j.value("reps", d.reps);
  c.feature_dist = j.value("feature_dist", d.feature_dist);
  c.seed = j.value("seed", d.seed);
  c.mc_samples = j.value("mc_samples", d.mc_samples);
  c.se_samples = j.value("se_samples", d.se_samples);
}

// "" means valid; otherwise a field-level message.
inline std::string validate_config(const ExperimentConfig& c) {
  auto bad = [](const std::string& s) { return s; };
  if (c.m < 1) return bad("m: must be >= 1");
  if (c.n < 1) return bad("n: must be >= 1");
  if (c.q < 1) return bad("q: must be >= 1");
  if (c.L < 2) return bad("L: must be >= 2");
  if (int(c.eta.size()) != c.L) return bad("eta: need one rate per layer");
  for (double e : c.eta)
    if (!(e >= 0.0)) return bad("eta: rates must be >= 0");
  if (c.sigma_xi < 0.0) return bad("sigma_xi: must be >= 0");
  if (c.iters < 0) return bad("iters: must be >= 0");
  if (c.reps < 1) return bad("reps: must be >= 1");
  if (c.mc_samples < 2) return bad("mc_samples: must be >= 2");
  if (c.se_samples < 2) return bad("se_samples: must be >= 2");
  if (c.teacher != "single_index" && c.teacher != "multi_index")
    return bad("teacher: unknown value '" + c.teacher + "'");
  if (c.mode != "train" && c.mode != "se" && c.mode != "both" &&
      c.mode != "verify" && c.mode != "figure")
    return bad("mode: unknown value '" + c.mode + "'");
  try {
    registry_get(c.activation);
    registry_get(c.link);
    FeatureDist::parse(c.feature_dist);
  } catch (const std::exception& e) {
    return bad(e.what());
  }
  return "";
}

struct TrainRow {
  int rep = 0, t = 0;
  double e_test_hat = 0.0, e_test_mc = 0.0, e_test_mc_se = 0.0,
         e_train = 0.0;
  std::vector<double> reldist;
};

struct SERow {
  int t = 0;
  double e_train_pred = 0.0, e_test_pred = 0.0;
};

// Per-experiment fixed quantities (shared signal across replications).
struct TeacherDraw {
  Eigen::VectorXd mu_star;  // single index
  Eigen::MatrixXd U_star;   // multi index (teacher_dim x n)
};

inline TeacherDraw draw_teacher(const ExperimentConfig& c) {
  TeacherDraw t;
  auto rng = make_stream(c.seed, 0, "teacher");
  if (c.teacher == "multi_index")
    t.U_star = gaussian_matrix(c.teacher_dim, c.n, rng) /
               std::sqrt(double(c.n));
  else
    t.mu_star = generate_signal(c.n, rng);
  return t;
}

// Worker cap: GDSE_THREADS if set, else 1 (replications are the only
// parallel axis; per-rep streams keep results independent of the cap).
inline int worker_count(int jobs) {
  int cap = 1;
  if (const char* env = std::getenv("GDSE_THREADS")) {
    cap = std::atoi(env);
    if (cap < 1) cap = 1;
  }
  unsigned hw = std::thread::hardware_concurrency();
  if (hw > 0) cap = std::min(cap, int(hw));
  return std::min(cap, std::max(jobs, 1));
}

inline std::vector<TrainRow> run_train(const ExperimentConfig& cfg) {
  std::string err = validate_config(cfg);
  if (!err.empty()) throw std::invalid_argument(err);
  TeacherDraw teacher = draw_teacher(cfg);
  FeatureDist dist = FeatureDist::parse(cfg.feature_dist);
  ActivationSet acts = make_activation_set(cfg.L, cfg.activation);
  ScalarFunction link = registry_get(cfg.link);
  std::vector<std::vector<TrainRow>> per_rep(cfg.reps);
  auto run_rep = [&](int rep) {
    std::vector<TrainRow>& rows = per_rep[rep];
    auto rx = make_stream(cfg.seed, uint64_t(rep), "X");
    Eigen::MatrixXd X = generate_features(cfg.m, cfg.n, dist, rx);
    auto ry = make_stream(cfg.seed, uint64_t(rep), "xi");
    Eigen::VectorXd Y, xi;
    std::function<Eigen::VectorXd(const Eigen::MatrixXd&)> target;
    if (cfg.teacher == "multi_index") {
      std::tie(Y, xi) = generate_multi_index(X, teacher.U_star, cfg.sigma_xi,
                                             ry);
      target = multi_index_target(teacher.U_star);
    } else {
      std::tie(Y, xi) =
          generate_responses(X, teacher.mu_star, link, cfg.sigma_xi, ry);
      Eigen::VectorXd mu = teacher.mu_star;
      target = [mu, link](const Eigen::MatrixXd& Xt) -> Eigen::VectorXd {
        return (Xt * mu).unaryExpr([&](double v) { return link(v); });
      };
    }
    Eigen::MatrixXd Y_q = Eigen::MatrixXd::Zero(cfg.m, cfg.q);
    Y_q.col(0) = Y;
    auto rw = make_stream(cfg.seed, uint64_t(rep), "W0");
    NetworkParams W0 = init_gaussian(cfg.L, cfg.q, cfg.n, rw);
    // one fixed test set per replication, reused across iterations
    auto rtest = make_stream(cfg.seed, uint64_t(rep), "test");
    Eigen::MatrixXd Xt = generate_features(cfg.mc_samples, cfg.n, dist,
                                           rtest);
    AugGDHooks hooks;
    hooks.per_iteration = [&](const AugGDState& st, AugGDRecord& rec) {
      auto rdummy = make_stream(0, 0, "unused");
      auto [mc, se] = test_error_mc_target(st.W, target, xi, dist, 0, rdummy,
                                           acts, &Xt);
      TrainRow row;
      row.rep = rep;
      row.t = rec.t;
      row.e_test_hat = rec.e_test_hat;
      row.e_test_mc = mc;
      row.e_test_mc_se = se;
      row.e_train = rec.e_train;
      row.reldist = rec.reldist;
      rows.push_back(std::move(row));
    };
    run_augmented_gd(X, Y_q, W0, acts, cfg.eta, cfg.iters, hooks);
  };
  const int workers = worker_count(cfg.reps);
  if (workers <= 1) {
    for (int rep = 0; rep < cfg.reps; ++rep) run_rep(rep);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int rep = next.fetch_add(1); rep < cfg.reps;
             rep = next.fetch_add(1))
          run_rep(rep);
      });
    for (auto& th : pool) th.join();
  }
  std::vector<TrainRow> rows;
  for (auto& r : per_rep)
    rows.insert(rows.end(), std::make_move_iterator(r.begin()),
                std::make_move_iterator(r.end()));
  return rows;
}

// SE-predicted error curves, computed on the rep-0 realization of the noise
// pool and initialization (the SE law is conditional on both).
inline std::vector<SERow> run_se_curves(const ExperimentConfig& cfg) {
  std::string err = validate_config(cfg);
  if (!err.empty()) throw std::invalid_argument(err);
  if (cfg.teacher != "single_index")
    throw std::invalid_argument("teacher: se mode needs single_index");
  TeacherDraw teacher = draw_teacher(cfg);
  FeatureDist dist = FeatureDist::parse(cfg.feature_dist);
  ActivationSet acts = make_activation_set(cfg.L, cfg.activation);
  ScalarFunction link = registry_get(cfg.link);
  auto rx = make_stream(cfg.seed, 0, "X");
  Eigen::MatrixXd X = generate_features(cfg.m, cfg.n, dist, rx);
  auto ry = make_stream(cfg.seed, 0, "xi");
  auto [Y, xi] = generate_responses(X, teacher.mu_star, link, cfg.sigma_xi,
                                    ry);
  auto rw = make_stream(cfg.seed, 0, "W0");
  NetworkParams W0 = init_gaussian(cfg.L, cfg.q, cfg.n, rw);
  SEConfig se;
  se.n = cfg.n;
  se.q = cfg.q;
  se.L = cfg.L;
  se.m = cfg.m;
  se.phi = double(cfg.m) / double(cfg.n);
  se.eta = cfg.eta;
  se.acts = &acts;
  se.link = link;
  se.xi = xi;
  se.N = cfg.se_samples;
  se.T_max = cfg.iters + 1;
  se.seed = cfg.seed;
  SEState st = se_init(W0, teacher.mu_star, cfg.q);
  MCEnsemble ens = se_make_ensemble(se, st);
  std::vector<SERow> rows;
  for (int t = 0; t <= cfg.iters; ++t) {
    se_advance(st, ens, se);
    auto [tr, te] = se_errors(st, t);
    rows.push_back({t, tr, te});
  }
  return rows;
}

namespace detail {
inline std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}
}  // namespace detail

inline void write_train_csv(const std::string& path,
                            const std::vector<TrainRow>& rows, int L) {
  std::ofstream out(path);
  out << "rep,t,e_test_hat,e_test_mc,e_test_mc_se,e_train";
  for (int a = 1; a <= L; ++a) out << ",reldist_l" << a;
  out << "\n";
  for (const auto& r : rows) {
    out << r.rep << "," << r.t << "," << detail::num(r.e_test_hat) << ","
        << detail::num(r.e_test_mc) << "," << detail::num(r.e_test_mc_se)
        << "," << detail::num(r.e_train);
    for (double d : r.reldist) out << "," << detail::num(d);
    out << "\n";
  }
}

inline void write_se_csv(const std::string& path,
                         const std::vector<SERow>& rows) {
  std::ofstream out(path);
  out << "t,e_train_pred,e_test_pred\n";
  for (const auto& r : rows)
    out << r.t << "," << detail::num(r.e_train_pred) << ","
        << detail::num(r.e_test_pred) << "\n";
}

// Replication means and standard errors per iteration, for charting.
struct CurveStats {
  std::vector<double> mean_hat, se_hat, mean_mc, se_mc, mean_train;
};

inline CurveStats summarize(const std::vector<TrainRow>& rows, int iters) {
  CurveStats s;
  s.mean_hat.assign(iters + 1, 0.0);
  s.se_hat.assign(iters + 1, 0.0);
  s.mean_mc.assign(iters + 1, 0.0);
  s.se_mc.assign(iters + 1, 0.0);
  s.mean_train.assign(iters + 1, 0.0);
  std::vector<int> cnt(iters + 1, 0);
  for (const auto& r : rows)
    if (r.t <= iters) {
      s.mean_hat[r.t] += r.e_test_hat;
      s.mean_mc[r.t] += r.e_test_mc;
      s.mean_train[r.t] += r.e_train;
      ++cnt[r.t];
    }
  for (int t = 0; t <= iters; ++t) {
    int c = std::max(cnt[t], 1);
    s.mean_hat[t] /= c;
    s.mean_mc[t] /= c;
    s.mean_train[t] /= c;
  }
  for (const auto& r : rows)
    if (r.t <= iters) {
      s.se_hat[r.t] += (r.e_test_hat - s.mean_hat[r.t]) *
                       (r.e_test_hat - s.mean_hat[r.t]);
      s.se_mc[r.t] += (r.e_test_mc - s.mean_mc[r.t]) *
                      (r.e_test_mc - s.mean_mc[r.t]);
    }
  for (int t = 0; t <= iters; ++t) {
    int c = cnt[t];
    if (c > 1) {
      s.se_hat[t] = std::sqrt(s.se_hat[t] / (c - 1) / c);
      s.se_mc[t] = std::sqrt(s.se_mc[t] / (c - 1) / c);
    } else {
      s.se_hat[t] = s.se_mc[t] = 0.0;
    }
  }
  return s;
}

struct FigurePanel {
  std::string name;
  ExperimentConfig cfg;
  bool with_se = false;  // also draw SE-predicted curves
};

// Panel configurations for the five reference experiments; scale multiplies
// m, n (and the width for the wide-network panels) and the replication count.
inline std::vector<FigurePanel> figure_panels(int id, double scale,
                                              uint64_t seed) {
  auto scaled = [&](int v) { return std::max(2, int(std::lround(v * scale))); };
  ExperimentConfig base;
  base.seed = seed;
  base.m = scaled(300);
  base.n = scaled(600);
  base.q = 10;
  base.sigma_xi = 0.5;
  base.mode = "train";
  std::vector<FigurePanel> panels;
  switch (id) {
    case 1:
      for (int L : {2, 3, 5}) {
        ExperimentConfig c = base;
        c.L = L;
        c.eta.assign(L, 2.0);
        c.iters = 70;
        c.reps = std::max(2, int(std::lround(120 * scale)));
        panels.push_back({"fig1_L" + std::to_string(L), c, L == 2});
      }
      break;
    case 2:
      for (double phi : {0.5, 1.0, 2.0}) {
        ExperimentConfig c = base;
        c.teacher = "multi_index";
        c.n = scaled(int(std::lround(300 / phi)));
        c.L = 2;
        c.eta.assign(2, 2.0);
        c.iters = 70;
        c.reps = std::max(2, int(std::lround(120 * scale)));
        char nm[32];
        std::snprintf(nm, sizeof(nm), "fig2_phi%g", phi);
        panels.push_back({nm, c, false});
      }
      break;
    case 3:
      for (double ratio : {0.1, 0.2, 0.5}) {
        ExperimentConfig c = base;
        c.L = 2;
        c.eta.assign(2, 2.0);
        c.q = std::max(2, int(std::lround(ratio * c.m)));
        c.iters = 50;
        c.reps = std::max(2, int(std::lround(30 * scale)));
        char nm[32];
        std::snprintf(nm, sizeof(nm), "fig3_qm%g", ratio);
        panels.push_back({nm, c, false});
      }
      break;
    case 4:
      for (int L : {2, 3, 5}) {
        ExperimentConfig c = base;
        c.L = L;
        c.eta.assign(L, 2.0);
        c.sigma_xi = 0.0;
        c.iters = 60;
        c.reps = std::max(2, int(std::lround(80 * scale)));
        panels.push_back({"fig4_noiseless_L" + std::to_string(L), c, false});
      }
      break;
    case 5:
      for (std::string act : {"relu", "smoothed_relu"}) {
        ExperimentConfig c = base;
        c.activation = act;
        c.L = 2;
        c.eta.assign(2, 2.0);
        c.sigma_xi = 0.0;
        c.iters = 50;
        c.reps = std::max(2, int(std::lround(120 * scale)));
        panels.push_back({"fig5_" + act, c, false});
      }
      break;
    default:
      throw std::invalid_argument("fig: id must be in 1..5");
  }
  return panels;
}

inline std::vector<std::string> reproduce_figure(int id, double scale,
                                                 uint64_t seed,
                                                 const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> written;
  for (const FigurePanel& p : figure_panels(id, scale, seed)) {
    std::vector<TrainRow> rows = run_train(p.cfg);
    std::string csv = out_dir + "/" + p.name + ".csv";
    write_train_csv(csv, rows, p.cfg.L);
    written.push_back(csv);
    CurveStats st = summarize(rows, p.cfg.iters);
    std::vector<ChartSeries> series;
    series.push_back({"estimate", st.mean_hat, st.se_hat});
    series.push_back({"mc test error", st.mean_mc, st.se_mc});
    series.push_back({"train error", st.mean_train, {}});
    if (p.with_se) {
      ExperimentConfig c = p.cfg;
      std::vector<SERow> se = run_se_curves(c);
      std::string se_csv = out_dir + "/" + p.name + "_se.csv";
      write_se_csv(se_csv, se);
      written.push_back(se_csv);
      ChartSeries cs;
      cs.name = "se prediction";
      for (const auto& r : se) cs.y.push_back(r.e_test_pred);
      series.push_back(cs);
    }
    std::string svg = out_dir + "/" + p.name + ".svg";
    svg_line_chart(svg, p.name, "error", series);
    written.push_back(svg);
  }
  return written;
}

}  // namespace gdse
