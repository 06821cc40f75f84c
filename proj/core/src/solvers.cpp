#include "mpforge/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mpforge/error.hpp"
#include "mpforge/log.hpp"
#include "mpforge/rng.hpp"

namespace mpforge {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

IterationRecord blank_record(int k) {
  return IterationRecord{k, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN};
}

double mean_sq_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).squaredNorm() / static_cast<double>(a.size());
}

// Tracks clipping and divergence warnings for one run.
struct Guard {
  const SolverConfig& cfg;
  SolverTrace& trace;

  double alpha(double raw) {
    if (!(raw > 0.0 && raw < 1.0)) ++trace.alpha_warnings;
    double c = cfg.clip_alpha(raw);
    if (c != raw) ++trace.clip_events;
    return c;
  }
  double gamma(double raw) {
    double c = cfg.clip_gamma(raw);
    if (c != raw) ++trace.clip_events;
    return c;
  }
  double tau(double raw) {
    double c = cfg.clip_tau(raw);
    if (c != raw) ++trace.clip_events;
    return c;
  }
};

void check_one_minus(double a) {
  if (1.0 - a < 1e-12) fail(ErrorKind::internal_error, "divergence within 1e-12 of 1 after clipping");
}

void keep_x(SolverTrace& trace, const SolverConfig& cfg, const Eigen::VectorXd& x) {
  if (cfg.keep_x_hat == KeepPolicy::every) trace.x_hat.push_back(x);
}

bool gamma_stop(const SolverConfig& cfg, double g1, double g2) {
  return (cfg.stop_eps1 > 0.0 && 1.0 / g1 < cfg.stop_eps1) || (cfg.stop_eps2 > 0.0 && 1.0 / g2 < cfg.stop_eps2);
}

bool change_stop(const SolverConfig& cfg, int k, const Eigen::VectorXd& x, const Eigen::VectorXd& x_prev) {
  return cfg.stop_change_eps > 0.0 && k >= 1 && mean_sq_diff(x, x_prev) < cfg.stop_change_eps;
}

void finish(SolverTrace& trace, const SolverConfig& cfg, Eigen::VectorXd x_last) {
  if (cfg.keep_x_hat == KeepPolicy::final_only) trace.x_hat.push_back(x_last);
  trace.final_x_hat = std::move(x_last);
  if (trace.alpha_warnings > 0)
    log_debug(trace.algorithm + ": " + std::to_string(trace.alpha_warnings) + " divergence values outside (0,1)");
}

void require_factored(const ProblemInstance& inst, const char* who) {
  if (!inst.factored()) fail(ErrorKind::unsupported_model, std::string(who) + " needs an SVD-factored design");
}

}  // namespace

std::string_view to_string(InitMode mode) noexcept { return mode == InitMode::error_haar ? "error-haar" : "haar"; }

InitMode init_mode_from_string(std::string_view name) {
  if (name == "error-haar") return InitMode::error_haar;
  if (name == "haar") return InitMode::haar;
  fail(ErrorKind::invalid_config, "unknown init mode '" + std::string(name) + "'", "solver.init");
}

std::string_view to_string(Termination t) noexcept {
  switch (t) {
    case Termination::max_iters: return "max-iters";
    case Termination::gamma_threshold: return "gamma-threshold";
    case Termination::change_threshold: return "change-threshold";
  }
  return "unknown";
}

void SolverConfig::validate() const {
  auto bad = [](const std::string& msg, const char* field) { fail(ErrorKind::invalid_config, msg, field); };
  if (max_iters < 0) bad("max_iters must be >= 0", "iterations");
  if (!(t_min > 0.0 && t_min < t_max && t_max < 1.0)) bad("need 0 < t_min < t_max < 1", "solver.t_min");
  if (!(gamma_min > 0.0 && gamma_min < gamma_max && std::isfinite(gamma_max)))
    bad("need 0 < gamma_min < gamma_max < inf", "solver.gamma_min");
  if (!(tau_min > 0.0 && tau_min < tau_max && std::isfinite(tau_max)))
    bad("need 0 < tau_min < tau_max < inf", "solver.tau_min");
  if (!(stop_eps1 >= 0.0)) bad("stop eps1 must be >= 0", "solver.stop_eps1");
  if (!(stop_eps2 >= 0.0)) bad("stop eps2 must be >= 0", "solver.stop_eps2");
  if (!(stop_change_eps >= 0.0)) bad("stop_change_eps must be >= 0", "solver.stop_change_eps");
  if (!(gamma10 > 0.0 && std::isfinite(gamma10))) bad("gamma10 must be > 0", "solver.gamma10");
  if (!(tau10 > 0.0 && std::isfinite(tau10))) bad("tau10 must be > 0", "solver.tau10");
  if (!(init_variance > 0.0 && std::isfinite(init_variance))) bad("init_variance must be > 0", "solver.init_variance");
}

double SolverConfig::clip_alpha(double a) const {
  if (std::isnan(a)) fail(ErrorKind::numeric_error, "divergence is NaN");
  return std::clamp(a, t_min, t_max);
}

double SolverConfig::clip_gamma(double g) const {
  if (std::isnan(g)) fail(ErrorKind::numeric_error, "precision is NaN");
  return std::clamp(g, gamma_min, gamma_max);
}

double SolverConfig::clip_tau(double t) const {
  if (std::isnan(t)) fail(ErrorKind::numeric_error, "precision is NaN");
  return std::clamp(t, tau_min, tau_max);
}

Eigen::VectorXd initial_r1(const ProblemInstance& inst, const SolverConfig& cfg) {
  Rng rng = Rng::stream(cfg.init_seed, "init/r");
  Eigen::VectorXd r_init = rng.normal_vector(inst.n(), std::sqrt(cfg.init_variance));
  Eigen::VectorXd r = inst.fac.v.apply(r_init);
  if (cfg.init == InitMode::error_haar) r += inst.x0;
  return r;
}

Eigen::VectorXd initial_p1(const ProblemInstance& inst, const SolverConfig& cfg) {
  Rng rng = Rng::stream(cfg.init_seed, "init/p");
  Eigen::VectorXd p_init = rng.normal_vector(inst.m(), std::sqrt(cfg.init_variance));
  Eigen::VectorXd p = inst.fac.u.apply(p_init);
  if (cfg.init == InitMode::error_haar) p += inst.z0;
  return p;
}

SolverTrace run_amp(const ProblemInstance& inst, const PriorSpec& prior, const SolverConfig& cfg) {
  cfg.validate();
  if (inst.channel.kind != ChannelKind::awgn) fail(ErrorKind::unsupported_model, "AMP supports the AWGN channel only");
  SolverTrace trace;
  trace.algorithm = "amp";
  Guard guard{cfg, trace};
  const Eigen::Index n = inst.n(), m = inst.m();
  const double ratio = static_cast<double>(n) / static_cast<double>(m);

  Eigen::VectorXd x_prev, v_prev;
  if (cfg.amp_init == AmpInit::standard) {
    x_prev = Eigen::VectorXd::Zero(n);
    v_prev = inst.y;
  } else {
    x_prev = Eigen::VectorXd::Ones(n);
    v_prev = Eigen::VectorXd::Ones(m);
  }
  Eigen::VectorXd x_last = x_prev;
  for (int k = 0; k <= cfg.max_iters; ++k) {
    Eigen::VectorXd r = x_prev + inst.apply_transpose(v_prev);
    double tau_hat = v_prev.squaredNorm() / static_cast<double>(m);
    double gamma = guard.gamma(tau_hat > 0.0 ? 1.0 / tau_hat : cfg.gamma_max);
    DenoiserOutput g = denoise_prior(r, gamma, prior);
    double alpha = guard.alpha(g.divergence);
    Eigen::VectorXd v = inst.y - inst.apply(g.value) + (ratio * alpha) * v_prev;

    IterationRecord rec = blank_record(k);
    rec.gamma1 = gamma;
    rec.alpha1 = alpha;
    rec.mse_x1 = mean_sq_diff(g.value, inst.x0);
    trace.records.push_back(rec);
    keep_x(trace, cfg, g.value);

    bool stop_change = change_stop(cfg, k, g.value, x_last);
    x_last = g.value;
    if (stop_change) {
      trace.termination = Termination::change_threshold;
      break;
    }
    x_prev = std::move(g.value);
    v_prev = std::move(v);
  }
  finish(trace, cfg, std::move(x_last));
  return trace;
}

SolverTrace run_vamp(const ProblemInstance& inst, const PriorSpec& prior, const SolverConfig& cfg) {
  cfg.validate();
  require_factored(inst, "VAMP");
  if (inst.channel.kind != ChannelKind::awgn) fail(ErrorKind::unsupported_model, "VAMP supports the AWGN channel only");
  SolverTrace trace;
  trace.algorithm = "vamp";
  Guard guard{cfg, trace};
  LmmseDenoiser g2(inst.fac, inst.y, 1.0 / inst.channel.tau_w);

  Eigen::VectorXd r1 = initial_r1(inst, cfg);
  double gamma1 = guard.gamma(cfg.gamma10);
  Eigen::VectorXd x_last;
  for (int k = 0; k <= cfg.max_iters; ++k) {
    DenoiserOutput o1 = denoise_prior(r1, gamma1, prior);
    double a1 = guard.alpha(o1.divergence);
    double eta1 = gamma1 / a1;
    double gamma2 = guard.gamma(eta1 - gamma1);
    Eigen::VectorXd r2 = (eta1 * o1.value - gamma1 * r1) / gamma2;

    DenoiserOutput o2 = g2(r2, gamma2);
    double a2 = guard.alpha(o2.divergence);
    double eta2 = gamma2 / a2;
    double gamma1_next = guard.gamma(eta2 - gamma2);
    Eigen::VectorXd r1_next = (eta2 * o2.value - gamma2 * r2) / gamma1_next;

    IterationRecord rec = blank_record(k);
    rec.gamma1 = gamma1;
    rec.gamma2 = gamma2;
    rec.alpha1 = a1;
    rec.alpha2 = a2;
    rec.eta1 = eta1;
    rec.eta2 = eta2;
    rec.mse_x1 = mean_sq_diff(o1.value, inst.x0);
    rec.mse_x2 = mean_sq_diff(o2.value, inst.x0);
    trace.records.push_back(rec);
    keep_x(trace, cfg, o1.value);
    if (cfg.keep_iterates) trace.iterates.push_back({r1, r2, {}, {}});

    bool stop_change = x_last.size() > 0 && change_stop(cfg, k, o1.value, x_last);
    x_last = std::move(o1.value);
    if (gamma_stop(cfg, gamma1, gamma2)) {
      trace.termination = Termination::gamma_threshold;
      break;
    }
    if (stop_change) {
      trace.termination = Termination::change_threshold;
      break;
    }
    r1 = std::move(r1_next);
    gamma1 = gamma1_next;
  }
  finish(trace, cfg, std::move(x_last));
  return trace;
}

SolverTrace run_gvamp(const ProblemInstance& inst, const PriorSpec& prior, const ChannelSpec& channel,
                      const SolverConfig& cfg) {
  cfg.validate();
  require_factored(inst, "GVAMP");
  if (channel.kind == ChannelKind::probit) {
    for (Eigen::Index i = 0; i < inst.y.size(); ++i)
      if (inst.y(i) != 1.0 && inst.y(i) != -1.0)
        fail(ErrorKind::invalid_observation, "probit observations must be +1 or -1");
  }
  SolverTrace trace;
  trace.algorithm = "gvamp";
  Guard guard{cfg, trace};

  Eigen::VectorXd r1 = initial_r1(inst, cfg);
  Eigen::VectorXd p1 = initial_p1(inst, cfg);
  double gamma1 = guard.gamma(cfg.gamma10);
  double tau1 = guard.tau(cfg.tau10);
  Eigen::VectorXd x_last;
  for (int k = 0; k <= cfg.max_iters; ++k) {
    DenoiserOutput ox = denoise_prior(r1, gamma1, prior);
    double a1 = guard.alpha(ox.divergence);
    check_one_minus(a1);
    Eigen::VectorXd r2 = (ox.value - a1 * r1) / (1.0 - a1);
    double gamma2 = guard.gamma(gamma1 * (1.0 / a1 - 1.0));

    DenoiserOutput oz = denoise_output(p1, tau1, inst.y, channel);
    double b1 = guard.alpha(oz.divergence);
    check_one_minus(b1);
    Eigen::VectorXd p2 = (oz.value - b1 * p1) / (1.0 - b1);
    double tau2 = guard.tau(tau1 * (1.0 / b1 - 1.0));

    JointLmmseOutput j = joint_lmmse_denoise(r2, p2, gamma2, tau2, inst.fac);
    double a2 = guard.alpha(j.alpha2);
    double b2 = guard.alpha(j.beta2);
    check_one_minus(a2);
    check_one_minus(b2);
    Eigen::VectorXd r1_next = (j.x_hat - a2 * r2) / (1.0 - a2);
    double gamma1_next = guard.gamma(gamma2 * (1.0 / a2 - 1.0));
    Eigen::VectorXd p1_next = (j.z_hat - b2 * p2) / (1.0 - b2);
    double tau1_next = guard.tau(tau2 * (1.0 / b2 - 1.0));

    IterationRecord rec = blank_record(k);
    rec.gamma1 = gamma1;
    rec.gamma2 = gamma2;
    rec.tau1 = tau1;
    rec.tau2 = tau2;
    rec.alpha1 = a1;
    rec.alpha2 = a2;
    rec.beta1 = b1;
    rec.beta2 = b2;
    rec.eta1 = gamma1 / a1;
    rec.eta2 = gamma2 / a2;
    rec.mse_x1 = mean_sq_diff(ox.value, inst.x0);
    rec.mse_x2 = mean_sq_diff(j.x_hat, inst.x0);
    rec.mse_z1 = mean_sq_diff(oz.value, inst.z0);
    trace.records.push_back(rec);
    keep_x(trace, cfg, ox.value);
    if (cfg.keep_iterates) trace.iterates.push_back({r1, r2, p1, p2});

    bool stop_change = x_last.size() > 0 && change_stop(cfg, k, ox.value, x_last);
    x_last = std::move(ox.value);
    if (gamma_stop(cfg, gamma1, gamma2)) {
      trace.termination = Termination::gamma_threshold;
      break;
    }
    if (stop_change) {
      trace.termination = Termination::change_threshold;
      break;
    }
    r1 = std::move(r1_next);
    p1 = std::move(p1_next);
    gamma1 = gamma1_next;
    tau1 = tau1_next;
  }
  finish(trace, cfg, std::move(x_last));
  return trace;
}

std::uint64_t trial_init_seed(std::uint64_t seed, std::size_t trial) {
  return Rng::stream(seed, trial_stream_name(trial, "init")).key();
}

}  // namespace mpforge
