#include "mamp/harness.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "mamp/parallel.hpp"
#include "mamp/rng.hpp"

namespace mamp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

[[noreturn]] void bad_key(const std::string& key, const std::string& why) {
  throw std::invalid_argument("config key '" + key + "': " + why);
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    bad_key(key, "not a number: '" + v + "'");
  }
  if (pos != v.size()) bad_key(key, "trailing characters in '" + v + "'");
  return x;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  unsigned long long x = 0;
  try {
    x = std::stoull(v, &pos);
  } catch (const std::exception&) {
    bad_key(key, "not a non-negative integer: '" + v + "'");
  }
  if (pos != v.size()) bad_key(key, "trailing characters in '" + v + "'");
  return static_cast<std::uint64_t>(x);
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "algo",  "M",    "N",    "kappa",          "mu",   "snr-db",        "iters",
      "trials", "seed", "damping-length", "variance-mode", "mode", "out"};
  return keys;
}

void apply_kv(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "algo") {
    if (value != "amp" && value != "oamp" && value != "mamp") {
      bad_key(key, "must be one of amp|oamp|mamp, got '" + value + "'");
    }
    cfg.algo = value;
  } else if (key == "M") {
    cfg.m = static_cast<std::size_t>(parse_u64(key, value));
  } else if (key == "N") {
    cfg.n = static_cast<std::size_t>(parse_u64(key, value));
  } else if (key == "kappa") {
    cfg.kappa = parse_double(key, value);
  } else if (key == "mu") {
    cfg.mu = parse_double(key, value);
  } else if (key == "snr-db") {
    cfg.snr_db = parse_double(key, value);
  } else if (key == "iters") {
    cfg.t_max = static_cast<std::size_t>(parse_u64(key, value));
  } else if (key == "trials") {
    cfg.trials = static_cast<std::size_t>(parse_u64(key, value));
  } else if (key == "seed") {
    cfg.base_seed = parse_u64(key, value);
  } else if (key == "damping-length") {
    cfg.damping_length = static_cast<std::size_t>(parse_u64(key, value));
  } else if (key == "variance-mode") {
    if (value == "analytic_se") {
      cfg.variance_mode = VarianceMode::analytic_se;
    } else if (value == "empirical_residual") {
      cfg.variance_mode = VarianceMode::empirical_residual;
    } else {
      bad_key(key, "must be analytic_se|empirical_residual, got '" + value + "'");
    }
  } else if (key == "mode") {
    if (value != "sim" && value != "se" && value != "both") {
      bad_key(key, "must be one of sim|se|both, got '" + value + "'");
    }
    cfg.mode = value;
  } else if (key == "out") {
    cfg.output_path = value;
  } else {
    throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

std::string fmt12(double x) {
  if (std::isnan(x)) return std::string();
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return std::string(buf);
}

double to_db(double x) {
  if (std::isnan(x)) return kNaN;
  return 10.0 * std::log10(std::max(x, 1e-300));
}

struct Trial {
  cvec x, y;
};

Trial make_trial(const LinearOperator& op, const BernoulliGaussianPrior& prior,
                 double sigma2, std::uint64_t seed) {
  Trial tr;
  tr.x = sample_signal(prior, op.n(), seed * 6364136223846793005ULL + 1442695040888963407ULL);
  tr.y = op.forward(tr.x);
  Rng noise(seed * 2862933555777941757ULL + 3037000493ULL);
  const double sd = std::sqrt(sigma2);
  for (auto& yi : tr.y) yi += sd * noise.cgauss();
  return tr;
}

}  // namespace

double ExperimentConfig::sigma2() const { return std::pow(10.0, -snr_db / 10.0); }

void ExperimentConfig::validate() const {
  if (m == 0) bad_key("M", "required and must be >= 1");
  if (n == 0) bad_key("N", "required and must be >= 1");
  if (!(kappa >= 1.0) || !std::isfinite(kappa)) bad_key("kappa", "must be >= 1");
  if (!(mu > 0.0) || !(mu <= 1.0)) bad_key("mu", "must be in (0, 1]");
  if (!std::isfinite(snr_db)) bad_key("snr-db", "must be finite");
  if (t_max < 1) bad_key("iters", "must be >= 1");
  if (t_max > kMaxIterations) bad_key("iters", "must be <= 128");
  if (trials < 1) bad_key("trials", "must be >= 1");
  if (damping_length < 1) bad_key("damping-length", "must be >= 1");
  if (algo != "amp" && algo != "oamp" && algo != "mamp") bad_key("algo", "must be amp|oamp|mamp");
  if (mode != "sim" && mode != "se" && mode != "both") bad_key("mode", "must be sim|se|both");
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t sep = line.find('=');
    std::string key, value;
    if (sep != std::string::npos) {
      key = trim(line.substr(0, sep));
      value = trim(line.substr(sep + 1));
    } else {
      sep = line.find_first_of(" \t");
      if (sep == std::string::npos) {
        throw std::invalid_argument("config file " + path + ":" + std::to_string(lineno) +
                                    ": expected 'key = value'");
      }
      key = trim(line.substr(0, sep));
      value = trim(line.substr(sep + 1));
    }
    if (key.empty() || value.empty()) {
      throw std::invalid_argument("config file " + path + ":" + std::to_string(lineno) +
                                  ": empty key or value");
    }
    kv[key] = value;
  }
  return kv;
}

ExperimentConfig load_config(const std::map<std::string, std::string>& file_kv,
                             const std::map<std::string, std::string>& override_kv) {
  std::map<std::string, std::string> merged = file_kv;
  for (const auto& [k, v] : override_kv) merged[k] = v;
  for (const auto& [k, v] : merged) {
    if (known_keys().count(k) == 0) throw std::invalid_argument("unknown config key '" + k + "'");
    (void)v;
  }
  if (merged.count("M") == 0) bad_key("M", "missing (required)");
  if (merged.count("N") == 0) bad_key("N", "missing (required)");
  ExperimentConfig cfg;
  for (const auto& [k, v] : merged) apply_kv(cfg, k, v);
  cfg.validate();
  return cfg;
}

RunReportCollection run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const double sigma2 = cfg.sigma2();
  const BernoulliGaussianPrior prior{cfg.mu};
  const bool want_sim = (cfg.mode == "sim" || cfg.mode == "both");
  const bool want_se = (cfg.mode == "se" || cfg.mode == "both");

  RunReportCollection coll;
  coll.cfg = cfg;

  // singular values are fixed by (m, n, kappa), so one spectral table serves
  // every trial; the permutation and signal are redrawn per trial
  auto op0 = build_operator(cfg.m, cfg.n, cfg.kappa, cfg.base_seed, EnsembleKind::svd_dft);
  const SpectralTable table = compute_spectral_table(*op0, cfg.t_max);

  std::optional<MampPlan> plan;
  const bool need_plan =
      (cfg.algo == "mamp") &&
      (want_se || (want_sim && cfg.variance_mode == VarianceMode::analytic_se));
  if (need_plan) {
    plan.emplace(build_mamp_plan(table, prior, sigma2, cfg.t_max, cfg.damping_length));
  }

  if (want_se) {
    coll.se_mse.assign(cfg.t_max, kNaN);
    coll.se_v_gamma.assign(cfg.t_max, kNaN);
    coll.se_v_phibar.assign(cfg.t_max, kNaN);
    coll.se_theta.assign(cfg.t_max, kNaN);
    coll.se_xi.assign(cfg.t_max, kNaN);
    if (cfg.algo == "mamp") {
      for (std::size_t t = 1; t <= cfg.t_max; ++t) {
        coll.se_mse[t - 1] = plan->mmse_pred[t];
        coll.se_v_gamma[t - 1] = plan->cov.V_gamma(t, t);
        coll.se_v_phibar[t - 1] = plan->cov.V_phibar(t, t);
        coll.se_theta[t - 1] = plan->schedule.theta[t];
        coll.se_xi[t - 1] = plan->schedule.xi[t];
      }
    } else if (cfg.algo == "oamp") {
      RunReport se = run_oamp_vamp(*op0, table, prior, cvec(cfg.m), sigma2, cfg.t_max,
                                   OampMode::track_se_only);
      for (const auto& rec : se.iterations) {
        coll.se_mse[rec.t - 1] = rec.mse_se_predicted;
        coll.se_v_gamma[rec.t - 1] = rec.v_gamma_tt;
        coll.se_v_phibar[rec.t - 1] = rec.v_phibar_tt;
      }
    }
    // amp: no SE valid for non-IID spectra; columns stay empty
  }

  if (want_sim) {
    coll.trials.resize(cfg.trials);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t is = 0; is < static_cast<std::ptrdiff_t>(cfg.trials); ++is) {
      const std::size_t i = static_cast<std::size_t>(is);
      const std::uint64_t seed = cfg.base_seed + i;
      const auto t0 = std::chrono::steady_clock::now();
      auto op = (i == 0) ? op0
                         : build_operator(cfg.m, cfg.n, cfg.kappa, seed, EnsembleKind::svd_dft);
      Trial tr = make_trial(*op, prior, sigma2, seed);
      TrialRecord rec;
      rec.index = i;
      rec.seed = seed;
      if (cfg.algo == "mamp") {
        rec.report = run_mamp(*op, table, prior, tr.y, sigma2, cfg.t_max, cfg.damping_length,
                              cfg.variance_mode, &tr.x, plan ? &*plan : nullptr);
      } else if (cfg.algo == "oamp") {
        rec.report = run_oamp_vamp(*op, table, prior, tr.y, sigma2, cfg.t_max,
                                   OampMode::simulate, &tr.x);
      } else {
        rec.report = run_amp(*op, prior, tr.y, sigma2, cfg.t_max, 1.0, &tr.x);
      }
      rec.wall_time_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      coll.trials[i] = std::move(rec);
    }

    coll.mse_median.assign(cfg.t_max, kNaN);
    coll.mse_q1.assign(cfg.t_max, kNaN);
    coll.mse_q3.assign(cfg.t_max, kNaN);
    coll.diverged_by_iter.assign(cfg.t_max, 0);
    for (std::size_t t = 1; t <= cfg.t_max; ++t) {
      std::vector<double> vals;
      std::size_t ndiv = 0;
      for (const TrialRecord& tr : coll.trials) {  // index order: deterministic
        const bool div = (tr.report.status == RunStatus::diverged);
        if (div) {
          const std::size_t last_t =
              tr.report.iterations.empty() ? 0 : tr.report.iterations.back().t;
          if (t >= last_t) ++ndiv;
          continue;  // diverged trials never contaminate aggregates
        }
        if (t <= tr.report.iterations.size()) {
          const double m = tr.report.iterations[t - 1].mse_posterior;
          if (!std::isnan(m)) vals.push_back(m);
        }
      }
      coll.diverged_by_iter[t - 1] = ndiv;
      coll.mse_median[t - 1] = quantile(vals, 0.5);
      coll.mse_q1[t - 1] = quantile(vals, 0.25);
      coll.mse_q3[t - 1] = quantile(vals, 0.75);
    }
  }
  return coll;
}

std::string csv_to_string(const RunReportCollection& coll) {
  std::ostringstream out;
  out << "t,mse_sim_median_db,mse_sim_q1_db,mse_sim_q3_db,mse_se_db,"
         "v_gamma_tt,v_phibar_tt,theta_t,xi_t,diverged_trials\n";
  const std::size_t T = coll.cfg.t_max;
  const bool have_sim = !coll.mse_median.empty();
  const bool have_se = !coll.se_mse.empty();

  // diagnostics columns: deterministic SE values when available, otherwise the
  // median of the per-trial recorded values (empirical-schedule runs)
  auto sim_median_field = [&](std::size_t t, auto getter) -> double {
    std::vector<double> vals;
    for (const auto& tr : coll.trials) {
      if (tr.report.status == RunStatus::diverged) continue;
      if (t <= tr.report.iterations.size()) {
        const double v = getter(tr.report.iterations[t - 1]);
        if (!std::isnan(v)) vals.push_back(v);
      }
    }
    return quantile(vals, 0.5);
  };

  for (std::size_t t = 1; t <= T; ++t) {
    double vg = kNaN, vphi = kNaN, theta = kNaN, xi = kNaN;
    if (have_se) {
      vg = coll.se_v_gamma[t - 1];
      vphi = coll.se_v_phibar[t - 1];
      theta = coll.se_theta[t - 1];
      xi = coll.se_xi[t - 1];
    }
    if (have_sim) {
      if (std::isnan(vg)) vg = sim_median_field(t, [](const IterationRecord& r) { return r.v_gamma_tt; });
      if (std::isnan(vphi)) vphi = sim_median_field(t, [](const IterationRecord& r) { return r.v_phibar_tt; });
      if (std::isnan(theta)) theta = sim_median_field(t, [](const IterationRecord& r) { return r.theta_t; });
      if (std::isnan(xi)) xi = sim_median_field(t, [](const IterationRecord& r) { return r.xi_t; });
    }
    out << t << ',';
    out << fmt12(have_sim ? to_db(coll.mse_median[t - 1]) : kNaN) << ',';
    out << fmt12(have_sim ? to_db(coll.mse_q1[t - 1]) : kNaN) << ',';
    out << fmt12(have_sim ? to_db(coll.mse_q3[t - 1]) : kNaN) << ',';
    out << fmt12(have_se ? to_db(coll.se_mse[t - 1]) : kNaN) << ',';
    out << fmt12(vg) << ',' << fmt12(vphi) << ',' << fmt12(theta) << ',' << fmt12(xi) << ',';
    if (have_sim) out << coll.diverged_by_iter[t - 1];
    out << '\n';
  }
  return out.str();
}

void write_csv(const RunReportCollection& coll, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << csv_to_string(coll);
  if (!out) throw std::runtime_error("write failed: " + path);
}

OrthogonalityDiagnostics diagnose_orthogonality(const ExperimentConfig& cfg,
                                                std::size_t seeds, std::size_t t_limit) {
  if (cfg.algo != "mamp") {
    throw std::invalid_argument("diagnose_orthogonality: requires algo = mamp");
  }
  cfg.validate();
  const double sigma2 = cfg.sigma2();
  const BernoulliGaussianPrior prior{cfg.mu};
  const std::size_t T = std::min(cfg.t_max, t_limit);
  const double N = static_cast<double>(cfg.n);

  auto op0 = build_operator(cfg.m, cfg.n, cfg.kappa, cfg.base_seed, EnsembleKind::svd_dft);
  const SpectralTable table = compute_spectral_table(*op0, cfg.t_max);
  std::optional<MampPlan> plan;
  if (cfg.variance_mode == VarianceMode::analytic_se) {
    plan.emplace(build_mamp_plan(table, prior, sigma2, cfg.t_max, cfg.damping_length));
  }

  OrthogonalityDiagnostics diag;
  diag.mean_corr = Eigen::MatrixXd::Zero(T, T);
  diag.excess_kurtosis.assign(T, 0.0);
  std::vector<Eigen::MatrixXd> corr_per_seed(seeds, Eigen::MatrixXd::Zero(T, T));
  std::vector<std::vector<double>> kurt_per_seed(seeds, std::vector<double>(T, kNaN));

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t ss = 0; ss < static_cast<std::ptrdiff_t>(seeds); ++ss) {
    const std::size_t s = static_cast<std::size_t>(ss);
    const std::uint64_t seed = cfg.base_seed + s;
    auto op = (s == 0) ? op0
                       : build_operator(cfg.m, cfg.n, cfg.kappa, seed, EnsembleKind::svd_dft);
    Trial tr = make_trial(*op, prior, sigma2, seed);
    MampTrace trace;
    run_mamp(*op, table, prior, tr.y, sigma2, T, cfg.damping_length, cfg.variance_mode,
             &tr.x, plan ? &*plan : nullptr, &trace);
    const std::size_t Ts = std::min(T, trace.r.size());
    for (std::size_t t = 0; t < Ts; ++t) {
      cvec g = trace.r[t];
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= tr.x[i];
      const double e2 = par::norm2(g) / N;
      double e4 = 0.0;
      for (const auto& gi : g) e4 += std::norm(gi) * std::norm(gi);
      e4 /= N;
      kurt_per_seed[s][t] = e4 / (e2 * e2) - 2.0;
      for (std::size_t tp = 0; tp <= t; ++tp) {
        cvec f = trace.x_iter[tp];
        for (std::size_t i = 0; i < f.size(); ++i) f[i] -= tr.x[i];
        const double ip = par::dot_real(g, f) / N;
        corr_per_seed[s](static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(tp)) =
            ip / std::sqrt(trace.v_gamma_tt[t] * trace.v_phibar_tt[tp]);
      }
    }
  }

  std::vector<std::size_t> kurt_counts(T, 0);
  for (std::size_t s = 0; s < seeds; ++s) {
    diag.mean_corr += corr_per_seed[s];
    for (std::size_t t = 0; t < T; ++t) {
      if (!std::isnan(kurt_per_seed[s][t])) {
        diag.excess_kurtosis[t] += kurt_per_seed[s][t];
        ++kurt_counts[t];
      }
    }
  }
  diag.mean_corr /= static_cast<double>(seeds);
  for (std::size_t t = 0; t < T; ++t) {
    diag.excess_kurtosis[t] =
        kurt_counts[t] ? diag.excess_kurtosis[t] / static_cast<double>(kurt_counts[t]) : kNaN;
  }
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t tp = 0; tp <= t; ++tp) {
      diag.max_abs_corr = std::max(
          diag.max_abs_corr,
          std::abs(diag.mean_corr(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(tp))));
    }
    if (!std::isnan(diag.excess_kurtosis[t])) {
      diag.max_excess_kurtosis = std::max(diag.max_excess_kurtosis, diag.excess_kurtosis[t]);
    }
  }
  diag.seeds = seeds;
  return diag;
}

void write_plot_svg(const RunReportCollection& coll, const std::string& path) {
  const std::size_t T = coll.cfg.t_max;
  const double W = 860.0, H = 520.0, ml = 70.0, mr = 20.0, mt = 30.0, mb = 50.0;
  const double pw = W - ml - mr, ph = H - mt - mb;

  auto db = [](double v) { return 10.0 * std::log10(std::max(v, 1e-300)); };
  double ymin = 1e300, ymax = -1e300;
  auto scan = [&](const std::vector<double>& v, bool as_db) {
    for (double x : v) {
      if (std::isnan(x)) continue;
      const double y = as_db ? db(x) : x;
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  };
  scan(coll.mse_median, true);
  scan(coll.mse_q1, true);
  scan(coll.mse_q3, true);
  scan(coll.se_mse, true);
  if (!(ymin < ymax)) {
    ymin = -50.0;
    ymax = 0.0;
  }
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;

  auto px = [&](double t) { return ml + pw * (t - 1.0) / std::max(1.0, static_cast<double>(T) - 1.0); };
  auto py = [&](double y) { return mt + ph * (ymax - y) / (ymax - ymin); };

  auto polyline = [&](const std::vector<double>& v, const char* style) {
    std::ostringstream p;
    bool open = false;
    std::ostringstream segs;
    for (std::size_t t = 1; t <= T && t <= v.size(); ++t) {
      if (std::isnan(v[t - 1])) {
        if (open) segs << "\"/>\n";
        open = false;
        continue;
      }
      if (!open) {
        segs << "<polyline " << style << " fill=\"none\" points=\"";
        open = true;
      }
      segs << px(static_cast<double>(t)) << ',' << py(db(v[t - 1])) << ' ';
    }
    if (open) segs << "\"/>\n";
    return segs.str();
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // axes + gridlines with labels
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
      << mt + ph << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
      << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 5; ++k) {
    const double yv = ymin + (ymax - ymin) * k / 5.0;
    svg << "<line x1=\"" << ml << "\" y1=\"" << py(yv) << "\" x2=\"" << ml + pw << "\" y2=\""
        << py(yv) << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << ml - 8 << "\" y=\"" << py(yv) + 4
        << "\" text-anchor=\"end\" font-size=\"12\">" << fmt12(std::round(yv * 10.0) / 10.0)
        << "</text>\n";
  }
  for (int k = 0; k <= 5; ++k) {
    const double tv = 1.0 + (static_cast<double>(T) - 1.0) * k / 5.0;
    svg << "<text x=\"" << px(tv) << "\" y=\"" << mt + ph + 18
        << "\" text-anchor=\"middle\" font-size=\"12\">" << static_cast<int>(std::round(tv))
        << "</text>\n";
  }
  svg << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 12
      << "\" text-anchor=\"middle\" font-size=\"13\">iteration t</text>\n";
  svg << "<text x=\"16\" y=\"" << mt + ph / 2
      << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 " << mt + ph / 2
      << ")\">MSE (dB)</text>\n";
  svg << "<text x=\"" << ml << "\" y=\"18\" font-size=\"13\">" << coll.cfg.algo
      << "  M=" << coll.cfg.m << " N=" << coll.cfg.n << " kappa=" << coll.cfg.kappa
      << " SNR=" << coll.cfg.snr_db << "dB L=" << coll.cfg.damping_length << "</text>\n";

  // IQR band
  if (!coll.mse_q1.empty() && !coll.mse_q3.empty()) {
    std::ostringstream pts;
    bool any = false;
    for (std::size_t t = 1; t <= T; ++t) {
      if (std::isnan(coll.mse_q1[t - 1])) continue;
      pts << px(static_cast<double>(t)) << ',' << py(db(coll.mse_q1[t - 1])) << ' ';
      any = true;
    }
    for (std::size_t t = T; t >= 1; --t) {
      if (std::isnan(coll.mse_q3[t - 1])) continue;
      pts << px(static_cast<double>(t)) << ',' << py(db(coll.mse_q3[t - 1])) << ' ';
      if (t == 1) break;
    }
    if (any) svg << "<polygon fill=\"#a0c4ff\" fill-opacity=\"0.35\" points=\"" << pts.str() << "\"/>\n";
  }
  svg << polyline(coll.mse_median, "stroke=\"#1f4e9c\" stroke-width=\"2\"");
  svg << polyline(coll.se_mse, "stroke=\"#c23b22\" stroke-width=\"2\" stroke-dasharray=\"6 4\"");
  svg << "<text x=\"" << ml + pw - 180 << "\" y=\"" << mt + 16
      << "\" font-size=\"12\" fill=\"#1f4e9c\">simulation median (IQR band)</text>\n";
  svg << "<text x=\"" << ml + pw - 180 << "\" y=\"" << mt + 32
      << "\" font-size=\"12\" fill=\"#c23b22\">state evolution</text>\n";
  svg << "</svg>\n";

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << svg.str();
}

}  // namespace mamp
