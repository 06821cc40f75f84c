#include "mpforge/concentration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>

#include <fmt/format.h>

#include "mpforge/error.hpp"
#include "mpforge/log.hpp"
#include "mpforge/parallel.hpp"

namespace mpforge {

namespace {

Pl2Functional estimate_functional(std::string name, std::function<double(double, double)> phi) {
  Pl2Functional f;
  f.name = std::move(name);
  f.arity = FunctionalArity::estimate;
  f.phi = std::move(phi);
  f.predict = [phi = f.phi](const PredictionContext& ctx, int k) {
    const SEStep& st = ctx.se.steps.at(static_cast<std::size_t>(k));
    double cross = std::isfinite(st.cx1) ? st.cx1 : 0.0;
    return expect_denoised(ctx.model.prior, st.gamma1, st.sigma2_1, phi, ctx.se_opts.nodes, cross);
  };
  return f;
}

Pl2Functional iterate_functional(std::string name, int lag) {
  Pl2Functional f;
  f.name = std::move(name);
  f.arity = FunctionalArity::iterate;
  f.lag = lag;
  f.phi = [](double a, double b) { return a * b; };
  f.predict = [lag](const PredictionContext& ctx, int k) {
    if (ctx.gp == nullptr) fail(ErrorKind::internal_error, "iterate prediction needs the Gaussian-process model");
    return ctx.gp->in.sigma_u(k, k - lag);
  };
  return f;
}

bool needs_iterates(const std::vector<const Pl2Functional*>& fs) {
  return std::any_of(fs.begin(), fs.end(), [](const Pl2Functional* f) { return f->arity == FunctionalArity::iterate; });
}

std::vector<const Pl2Functional*> resolve(const std::vector<Pl2Functional>& all, const std::vector<std::string>& names) {
  std::vector<const Pl2Functional*> out;
  for (const auto& n : names) out.push_back(&find_functional(all, n));
  return out;
}

SolverConfig trial_solver_config(const HarnessConfig& cfg, std::size_t trial, bool iterates) {
  SolverConfig s = cfg.solver;
  s.max_iters = cfg.iterations - 1;
  s.stop_change_eps = 0.0;
  s.keep_x_hat = KeepPolicy::every;
  s.keep_iterates = iterates;
  s.init_seed = trial_init_seed(cfg.seed, trial);
  return s;
}

void check_harness(const HarnessConfig& cfg) {
  if (cfg.algorithm != "amp" && cfg.algorithm != "vamp" && cfg.algorithm != "gvamp")
    fail(ErrorKind::invalid_config, "harness supports amp, vamp and gvamp", "algorithm");
  if (cfg.sizes.empty()) fail(ErrorKind::invalid_config, "at least one size is required", "sizes");
  for (auto n : cfg.sizes)
    if (n < 2) fail(ErrorKind::invalid_config, "sizes must be at least 2", "sizes");
  if (cfg.trials < 1) fail(ErrorKind::invalid_config, "trials must be positive", "trials");
  if (cfg.iterations < 1) fail(ErrorKind::invalid_config, "iterations must be positive", "iterations");
  if (cfg.functionals.empty()) fail(ErrorKind::invalid_config, "no functionals requested", "functionals");
  cfg.model.validate();
}

}  // namespace

std::vector<Pl2Functional> builtin_functionals() {
  std::vector<Pl2Functional> fs;
  fs.push_back(estimate_functional("squared_error", [](double a, double b) { return (a - b) * (a - b); }));
  fs.push_back(estimate_functional("product", [](double a, double b) { return a * b; }));
  fs.push_back(estimate_functional("second_moment", [](double a, double) { return a * a; }));
  fs.push_back(iterate_functional("iterate_second", 0));
  fs.push_back(iterate_functional("iterate_lag1", 1));
  return fs;
}

const Pl2Functional& find_functional(const std::vector<Pl2Functional>& all, const std::string& name) {
  for (const auto& f : all)
    if (f.name == name) return f;
  fail(ErrorKind::invalid_config, "unknown functional '" + name + "'", "functionals");
}

double empirical_average(const Pl2Functional& f, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  require(a.size() == b.size() && a.size() > 0, ErrorKind::invalid_dimension, "functional arguments differ in length");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) sum += f.phi(a(i), b(i));
  return sum / static_cast<double>(a.size());
}

double evaluate_on_trace(const Pl2Functional& f, const SolverTrace& trace, const ProblemInstance& inst, int k) {
  if (f.arity == FunctionalArity::estimate) {
    require(static_cast<std::size_t>(k) < trace.x_hat.size(), ErrorKind::invalid_parameter,
            "trace does not hold x_hat for this iteration");
    return empirical_average(f, trace.x_hat[static_cast<std::size_t>(k)], inst.x0);
  }
  if (k < f.lag) return std::numeric_limits<double>::quiet_NaN();
  require(static_cast<std::size_t>(k) < trace.iterates.size(), ErrorKind::invalid_parameter,
          "trace does not hold iterates for this iteration");
  Eigen::VectorXd ek = trace.iterates[static_cast<std::size_t>(k)].r1 - inst.x0;
  Eigen::VectorXd ej = trace.iterates[static_cast<std::size_t>(k - f.lag)].r1 - inst.x0;
  return empirical_average(f, ek, ej);
}

double estimate_pl2_constant(const Pl2Functional& f, Rng& rng, int samples, double scale) {
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    double a = scale * rng.normal(), b = scale * rng.normal();
    double a2 = scale * rng.normal(), b2 = scale * rng.normal();
    double dist = std::hypot(a - a2, b - b2);
    if (dist < 1e-12) continue;
    double bound = dist * (1.0 + std::hypot(a, b) + std::hypot(a2, b2));
    worst = std::max(worst, std::abs(f.phi(a, b) - f.phi(a2, b2)) / bound);
  }
  return worst;
}

SETrajectory harness_state_evolution(const HarnessConfig& cfg) {
  check_harness(cfg);
  try {
    SolverConfig clips = cfg.solver;
    int last = cfg.iterations - 1;
    if (cfg.algorithm == "amp") return run_se_amp(cfg.model, last, clips, cfg.se_opts);
    if (cfg.algorithm == "vamp") return run_se_vamp(cfg.model, se_init(cfg.model, clips), last, clips, cfg.se_opts);
    return run_se_gvamp(cfg.model, se_init(cfg.model, clips), last, clips, cfg.se_opts);
  } catch (const Error& e) {
    fail(ErrorKind::invalid_config, fmt::format("state evolution failed for this model: {}", e.what()),
         e.field().empty() ? "model" : e.field());
  }
}

SolverTrace run_harness_trial(const HarnessConfig& cfg, Eigen::Index n, std::size_t trial, ProblemInstance& inst) {
  std::vector<Pl2Functional> all = builtin_functionals();
  bool iterates = needs_iterates(resolve(all, cfg.functionals));
  SolverConfig s = trial_solver_config(cfg, trial, iterates);
  if (cfg.algorithm == "amp") {
    inst = sample_iid_gaussian_instance(cfg.model, n, cfg.seed, trial);
    return run_amp(inst, cfg.model.prior, s);
  }
  inst = sample_instance(cfg.model, n, cfg.seed, trial);
  if (cfg.algorithm == "vamp") return run_vamp(inst, cfg.model.prior, s);
  return run_gvamp(inst, cfg.model.prior, cfg.model.channel, s);
}

std::vector<TrialRecord> run_trials(const HarnessConfig& cfg) {
  check_harness(cfg);
  const std::vector<Pl2Functional> all = builtin_functionals();
  const std::vector<const Pl2Functional*> fs = resolve(all, cfg.functionals);
  const SETrajectory se = harness_state_evolution(cfg);

  std::optional<GaussianProcessModel> gp;
  if (needs_iterates(fs)) {
    if (cfg.algorithm == "amp")
      fail(ErrorKind::invalid_config, "iterate functionals need vamp or gvamp", "functionals");
    GeneralSeModel gm =
        GeneralSeModel::from(cfg.model, cfg.algorithm == "vamp" ? GeneralKind::vamp : GeneralKind::gvamp);
    try {
      SETrajectory gse = run_se_general(gm, se_init(cfg.model, cfg.solver), cfg.iterations - 1, cfg.solver, cfg.gp_opts);
      gp = track_gaussian_process(gm, gse, cfg.iterations - 1, cfg.gp_opts);
    } catch (const Error& e) {
      fail(ErrorKind::invalid_config, fmt::format("Gaussian-process model failed: {}", e.what()), "functionals");
    }
  }
  PredictionContext ctx{cfg.model, se, gp ? &*gp : nullptr, cfg.se_opts};
  const int kcount = std::min<int>(cfg.iterations, static_cast<int>(se.steps.size()));
  std::vector<std::vector<double>> prediction(fs.size(), std::vector<double>(static_cast<std::size_t>(kcount)));
  for (std::size_t j = 0; j < fs.size(); ++j)
    for (int k = 0; k < kcount; ++k)
      prediction[j][static_cast<std::size_t>(k)] =
          k < fs[j]->lag ? std::numeric_limits<double>::quiet_NaN() : fs[j]->predict(ctx, k);

  struct Task {
    Eigen::Index n;
    std::size_t trial;
  };
  std::vector<Task> tasks;
  for (auto n : cfg.sizes)
    for (int t = 0; t < cfg.trials; ++t) tasks.push_back({n, static_cast<std::size_t>(t)});

  std::vector<std::vector<TrialRecord>> slots(tasks.size());
  parallel_for(tasks.size(), cfg.workers, [&](std::size_t i) {
    ProblemInstance inst;
    SolverTrace trace = run_harness_trial(cfg, tasks[i].n, tasks[i].trial, inst);
    auto& out = slots[i];
    for (int k = 0; k < std::min(kcount, trace.iterations()); ++k)
      for (std::size_t j = 0; j < fs.size(); ++j) {
        if (k < fs[j]->lag) continue;
        TrialRecord r;
        r.seed = cfg.seed;
        r.trial = tasks[i].trial;
        r.n = tasks[i].n;
        r.k = k;
        r.functional = fs[j]->name;
        r.empirical = evaluate_on_trace(*fs[j], trace, inst, k);
        r.prediction = prediction[j][static_cast<std::size_t>(k)];
        r.deviation = std::abs(r.empirical - r.prediction);
        out.push_back(std::move(r));
      }
  });

  std::vector<TrialRecord> records;
  for (auto& s : slots)
    for (auto& r : s) records.push_back(std::move(r));
  log_info(fmt::format("harness: {} records from {} trials", records.size(), tasks.size()));
  return records;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  require(!sorted.empty(), ErrorKind::invalid_parameter, "quantile of empty data");
  double pos = q * static_cast<double>(sorted.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, ErrorKind::invalid_parameter, "slope needs two or more points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  require(sxx > 0.0, ErrorKind::invalid_parameter, "slope needs two distinct x values");
  return sxy / sxx;
}

namespace {

using GroupKey = std::tuple<std::string, int, Eigen::Index>;  // functional, k, N

std::map<GroupKey, std::vector<double>> group_deviations(const std::vector<TrialRecord>& records) {
  std::map<GroupKey, std::vector<double>> groups;
  for (const auto& r : records) groups[{r.functional, r.k, r.n}].push_back(r.deviation);
  for (auto& [key, v] : groups) std::sort(v.begin(), v.end());
  return groups;
}

double tail_frequency(const std::vector<double>& sorted, double eps) {
  auto it = std::lower_bound(sorted.begin(), sorted.end(), eps);
  return static_cast<double>(sorted.end() - it) / static_cast<double>(sorted.size());
}

}  // namespace

DeviationSummary summarize(const std::vector<TrialRecord>& records, const std::vector<double>& epsilons) {
  DeviationSummary sum;
  sum.epsilons = epsilons;
  auto groups = group_deviations(records);
  for (const auto& [key, dev] : groups) {
    DeviationRow row;
    row.functional = std::get<0>(key);
    row.k = std::get<1>(key);
    row.n = std::get<2>(key);
    row.count = dev.size();
    row.median = quantile_sorted(dev, 0.5);
    double total = 0.0;
    for (double d : dev) total += d;
    row.mean = total / static_cast<double>(dev.size());
    row.q10 = quantile_sorted(dev, 0.10);
    row.q25 = quantile_sorted(dev, 0.25);
    row.q75 = quantile_sorted(dev, 0.75);
    row.q90 = quantile_sorted(dev, 0.90);
    for (double e : epsilons) row.tail.push_back(tail_frequency(dev, e));
    sum.rows.push_back(std::move(row));
  }

  // slopes per (functional, k); rows are sorted by N within each group
  for (std::size_t i = 0; i < sum.rows.size();) {
    std::size_t j = i;
    while (j < sum.rows.size() && sum.rows[j].functional == sum.rows[i].functional && sum.rows[j].k == sum.rows[i].k) ++j;
    if (j - i < 2) {
      sum.notices.push_back(fmt::format("{} k={}: single size, slope omitted", sum.rows[i].functional, sum.rows[i].k));
    } else {
      std::vector<double> lx, ly;
      bool positive = true;
      for (std::size_t r = i; r < j; ++r) {
        positive = positive && sum.rows[r].median > 0.0;
        lx.push_back(std::log(static_cast<double>(sum.rows[r].n)));
        ly.push_back(std::log(sum.rows[r].median));
      }
      if (positive) {
        double slope = fit_slope(lx, ly);
        for (std::size_t r = i; r < j; ++r) sum.rows[r].slope = slope;
      } else {
        sum.notices.push_back(fmt::format("{} k={}: zero median deviation, slope omitted", sum.rows[i].functional,
                                          sum.rows[i].k));
      }
    }
    i = j;
  }
  for (const auto& n : sum.notices) log_info(n);
  return sum;
}

std::vector<TailRow> tail_estimate(const std::vector<TrialRecord>& records, double epsilon) {
  std::vector<TailRow> out;
  auto groups = group_deviations(records);
  for (const auto& [key, dev] : groups) {
    TailRow row;
    row.functional = std::get<0>(key);
    row.k = std::get<1>(key);
    row.n = std::get<2>(key);
    row.trials = dev.size();
    row.frequency = tail_frequency(dev, epsilon);
    if (!out.empty() && out.back().functional == row.functional && out.back().k == row.k) {
      const TailRow& prev = out.back();
      double t1 = static_cast<double>(prev.trials), t2 = static_cast<double>(row.trials);
      double pooled = (prev.frequency * t1 + row.frequency * t2) / (t1 + t2);
      double noise = 3.0 * std::sqrt(pooled * (1.0 - pooled) * (1.0 / t1 + 1.0 / t2));
      row.increase_flagged = row.frequency - prev.frequency > noise;
      if (row.increase_flagged)
        log_warn(fmt::format("tail frequency rose from N={} to N={} for {} k={}", prev.n, row.n, row.functional, row.k));
    }
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace mpforge
