#include "mpforge/state_evolution.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "mpforge/error.hpp"
#include "mpforge/log.hpp"
#include "mpforge/quadrature.hpp"
#include "mpforge/special.hpp"

namespace mpforge {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// E[f(X0)] for X0 ~ N(0, var), adaptive over +-12 sd. Used where f has features much
// narrower than sd (denoiser thresholds, the probit step), which fixed Hermite rules miss.
double gaussian_expect_adaptive(const std::function<double(double)>& f, double var) {
  const double sd = std::sqrt(var);
  return integrate([&](double x) { return normal_pdf(x / sd) / sd * f(x); }, -12.0 * sd, 12.0 * sd, 1e-10);
}

// E[f(X0)] under the prior.
double over_prior(const PriorSpec& prior, int nodes, const std::function<double(double)>& f) {
  switch (prior.kind) {
    case PriorKind::gaussian: {
      const GaussHermite& gh = gauss_hermite(nodes);
      const double sd = std::sqrt(prior.tau_x);
      double acc = 0.0;
      for (std::size_t i = 0; i < gh.x.size(); ++i) acc += gh.w[i] * f(sd * gh.x[i]);
      return acc;
    }
    case PriorKind::bernoulli_gaussian: {
      double spike = prior.rho < 1.0 ? (1.0 - prior.rho) * f(0.0) : 0.0;
      return spike + prior.rho * gaussian_expect_adaptive(f, prior.tau_x);
    }
    case PriorKind::grid: {
      double acc = 0.0;
      for (int j = 0; j < PriorSpec::kGridPoints; ++j) {
        double m = prior.grid_mass(j);
        if (m > 0.0) acc += m * f(prior.grid_point(j));
      }
      return acc;
    }
  }
  return kNaN;
}

// R = kappa X0 + sd Z. The cross pass is skipped unless asked for.
ScalarMoments input_moments_quad(double gamma1, double kappa, double noise_var, const PriorSpec& prior, int nodes,
                                 bool want_cross) {
  const GaussHermite& gh = gauss_hermite(nodes);
  const double sd = std::sqrt(noise_var);
  auto inner = [&](double x0, int which) {
    double acc = 0.0;
    for (std::size_t j = 0; j < gh.x.size(); ++j) {
      ScalarPosterior sp = prior_posterior(kappa * x0 + sd * gh.x[j], gamma1, prior);
      double d = sp.mean - x0;
      acc += gh.w[j] * (which == 0 ? sp.deriv : which == 1 ? d * d : d * x0);
    }
    return acc;
  };
  ScalarMoments m;
  if (prior.kind == PriorKind::grid) {
    // One posterior per node serves all three moments; the grid posterior dominates the cost.
    m = {0.0, 0.0, 0.0};
    for (int i = 0; i < PriorSpec::kGridPoints; ++i) {
      double mass = prior.grid_mass(i);
      if (mass <= 0.0) continue;
      double x0 = prior.grid_point(i);
      for (std::size_t j = 0; j < gh.x.size(); ++j) {
        ScalarPosterior sp = prior_posterior(kappa * x0 + sd * gh.x[j], gamma1, prior);
        double d = sp.mean - x0, w = mass * gh.w[j];
        m.sensitivity += w * sp.deriv;
        m.error += w * d * d;
        m.cross += w * d * x0;
      }
    }
    if (!want_cross) m.cross = 0.0;
    return m;
  }
  m.sensitivity = over_prior(prior, nodes, [&](double x0) { return inner(x0, 0); });
  m.error = over_prior(prior, nodes, [&](double x0) { return inner(x0, 1); });
  if (want_cross) m.cross = over_prior(prior, nodes, [&](double x0) { return inner(x0, 2); });
  return m;
}

// P = kappa Z0 + sd N, Z0 ~ N(0, z0_var), y = h(Z0, W) averaged over W in closed form.
ScalarMoments output_moments_quad(double tau1, double kappa, double noise_var, const ChannelSpec& channel,
                                  double z0_var, int nodes, bool want_cross) {
  const GaussHermite& gh = gauss_hermite(nodes);
  const double sd = std::sqrt(noise_var);
  const double sw = std::sqrt(channel.tau_w);
  auto inner = [&](double z0, int which) {
    double p_plus = normal_cdf(z0 / sw);
    double acc = 0.0;
    for (double y : {1.0, -1.0}) {
      double py = y > 0 ? p_plus : 1.0 - p_plus;
      if (py <= 0.0) continue;
      double part = 0.0;
      for (std::size_t j = 0; j < gh.x.size(); ++j) {
        ScalarPosterior sp = channel_posterior(kappa * z0 + sd * gh.x[j], tau1, y, channel);
        double d = sp.mean - z0;
        part += gh.w[j] * (which == 0 ? sp.deriv : which == 1 ? d * d : d * z0);
      }
      acc += py * part;
    }
    return acc;
  };
  ScalarMoments m;
  m.sensitivity = gaussian_expect_adaptive([&](double z0) { return inner(z0, 0); }, z0_var);
  m.error = gaussian_expect_adaptive([&](double z0) { return inner(z0, 1); }, z0_var);
  if (want_cross) m.cross = gaussian_expect_adaptive([&](double z0) { return inner(z0, 2); }, z0_var);
  return m;
}

ScalarMoments input_coupled(double gamma1, double kappa, double noise_var, const PriorSpec& prior, int nodes,
                            bool want_cross) {
  require(gamma1 > 0.0 && noise_var >= 0.0, ErrorKind::invalid_parameter,
          "input_moments: need gamma1 > 0, noise variance >= 0");
  if (prior.kind == PriorKind::gaussian) {
    double c = gamma1 * prior.tau_x / (gamma1 * prior.tau_x + 1.0);
    double bias = c * kappa - 1.0;
    return {c, bias * bias * prior.tau_x + c * c * noise_var, bias * prior.tau_x};
  }
  return input_moments_quad(gamma1, kappa, noise_var, prior, nodes, want_cross);
}

ScalarMoments output_coupled(double tau1, double kappa, double noise_var, const ChannelSpec& channel, double z0_var,
                             int nodes, bool want_cross) {
  require(tau1 > 0.0 && noise_var >= 0.0 && z0_var >= 0.0, ErrorKind::invalid_parameter,
          "output_moments: need tau1 > 0, noise variance >= 0, z0_var >= 0");
  if (channel.kind == ChannelKind::awgn) {
    double gw = 1.0 / channel.tau_w;
    double den = tau1 + gw;
    double lead = (kappa - 1.0) * (kappa - 1.0) * z0_var + noise_var;  // E[(P - Z0)^2]
    return {tau1 / den, (tau1 * tau1 * lead + gw) / (den * den), tau1 * (kappa - 1.0) * z0_var / den};
  }
  return output_moments_quad(tau1, kappa, noise_var, channel, z0_var, nodes, want_cross);
}

double relative_change(const ScalarMoments& a, const ScalarMoments& b) {
  auto rel = [](double x, double y) { return std::abs(x - y) / std::max(std::abs(y), 1e-300); };
  return std::max(rel(a.sensitivity, b.sensitivity), rel(a.error, b.error));
}

// Clipping mirrors SolverConfig and counts events.
struct SeClip {
  const SolverConfig& cfg;
  SETrajectory& traj;

  double alpha(double v) {
    double c = cfg.clip_alpha(v);
    if (c != v) ++traj.clip_events;
    return c;
  }
  double gamma(double v) {
    double c = cfg.clip_gamma(v);
    if (c != v) ++traj.clip_events;
    return c;
  }
  double tau(double v) {
    double c = cfg.clip_tau(v);
    if (c != v) ++traj.clip_events;
    return c;
  }
};

double checked_numerator(double num, double scale, int k, const char* what) {
  if (num < -1e-10 * std::max(scale, 1.0))
    fail(ErrorKind::numeric_error, fmt::format("negative {} at iteration {}: {:.6g}", what, k, num));
  return std::max(num, 0.0);
}

void add_warning(SETrajectory& traj, std::string msg) {
  if (traj.warnings.size() < 20) {
    log_warn(msg);
    traj.warnings.push_back(std::move(msg));
  }
}

// A message about a truth vector t: precision, E[(m - t)^2] and E[(m - t) t].
struct Message {
  double prec, var, corr;
};

// Splits m - t = (corr / t2) t + independent noise; returns (kappa, noise variance).
std::pair<double, double> decompose(const Message& msg, double t2, int k, const char* what) {
  if (t2 <= 0.0) return {1.0, msg.var};
  double lead = msg.corr * msg.corr / t2;
  return {1.0 + msg.corr / t2, checked_numerator(msg.var - lead, std::max(msg.var, lead), k, what)};
}

// Onsager-corrected extrinsic message (g - a m) / (1 - a) given E[(g - t)^2] = e,
// E[(g - t)(m - t)] = g_cross and E[(g - t) t] = f.
Message extrinsic(double prec_out, double a, double e, double g_cross, double f, const Message& in, int k,
                  const char* what) {
  double num = e - 2.0 * a * g_cross + a * a * in.var;
  double var = checked_numerator(num, std::max(std::abs(e), a * a * std::abs(in.var)), k, what) / ((1.0 - a) * (1.0 - a));
  return {prec_out, var, (f - a * in.corr) / (1.0 - a)};
}

ScalarMoments checked_input(double gamma, double kappa, double noise_var, const PriorSpec& prior,
                            const SEOptions& opts, SETrajectory& traj, int k) {
  ScalarMoments m = input_coupled(gamma, kappa, noise_var, prior, opts.nodes, !opts.literal);
  if (opts.check_doubling && prior.kind != PriorKind::gaussian) {
    ScalarMoments m2 = input_coupled(gamma, kappa, noise_var, prior, 2 * opts.nodes, false);
    double change = relative_change(m, m2);
    if (change > 1e-6)
      add_warning(traj, fmt::format("numeric-warning: input quadrature unconverged at iteration {} (relative change {:.2e})",
                                    k, change));
  }
  return m;
}

ScalarMoments checked_output(double tau, double kappa, double noise_var, const ChannelSpec& channel, double z0_var,
                             const SEOptions& opts, SETrajectory& traj, int k) {
  ScalarMoments m = output_coupled(tau, kappa, noise_var, channel, z0_var, opts.nodes, !opts.literal);
  if (opts.check_doubling && channel.kind != ChannelKind::awgn) {
    ScalarMoments m2 = output_coupled(tau, kappa, noise_var, channel, z0_var, 2 * opts.nodes, false);
    double change = relative_change(m, m2);
    if (change > 1e-6)
      add_warning(traj, fmt::format("numeric-warning: output quadrature unconverged at iteration {} (relative change {:.2e})",
                                    k, change));
  }
  return m;
}

// Separable stage: message in, clipped divergence, extrinsic message out.
struct SeparableResult {
  ScalarMoments m;
  double alpha;
  Message out;
};

SeparableResult separable_stage(const Message& in, const ScalarMoments& m, double prec_out, double alpha,
                                double kappa, double noise_var, bool literal, int k, const char* what) {
  double g_cross = literal ? alpha * in.var : (kappa - 1.0) * m.cross + m.sensitivity * noise_var;
  Message out = extrinsic(prec_out, alpha, m.error, g_cross, literal ? 0.0 : m.cross, literal ? Message{in.prec, in.var, 0.0} : in,
                          k, what);
  return {m, alpha, out};
}

// Moments of the joint LMMSE stage in the SVD basis. The x-side error per coordinate is
// e = lead * xi + (tau s b~ + gamma a~) / h with xi = (V^T x0)_i, a = c_a xi + a~, b = c_b s xi + b~.
struct LinearMoments {
  double ax, ex, gx, fx;  // A_x2, E_x2, E[e (r2 - x0)], E[e x0]
  double az, ez, gz, fz;  // A_z2, E_z2 (per M), E[(z2 - z0)(p2 - z0)], E[(z2 - z0) z0]
};

LinearMoments linear_stage(const Message& xm, const Message& zm, double tx, double zv, const ModelSpec& model,
                           bool literal, int k) {
  const double g = xm.prec, t = zm.prec, delta = model.delta;
  double ca = 0.0, cb = 0.0, va = xm.var, vb = zm.var;
  if (!literal) {
    ca = xm.corr / tx;
    va = checked_numerator(xm.var - xm.corr * ca, xm.var, k, "sigma2_2 noise");
    if (zv > 0.0) {
      cb = zm.corr / zv;
      vb = checked_numerator(zm.var - zm.corr * cb, zm.var, k, "rho2_2 noise");
    }
  }
  const auto& law = model.law;
  auto lead = [&](double s) { return (t * s * s * cb + g * ca) / (t * s * s + g); };
  auto err = [&](double s) {
    double h = t * s * s + g;
    return lead(s) * lead(s) * tx + (t * t * s * s * vb + g * g * va) / (h * h);
  };
  LinearMoments lm;
  lm.ax = delta * law.expect([&](double s) { return g / (t * s * s + g); }) + (1.0 - delta);
  lm.ex = delta * law.expect(err) + (1.0 - delta) * xm.var;
  lm.gx = delta * law.expect([&](double s) { return lead(s) * ca * tx + g * va / (t * s * s + g); }) +
          (1.0 - delta) * xm.var;
  lm.fx = delta * law.expect([&](double s) { return lead(s) * tx; }) + (1.0 - delta) * xm.corr;
  lm.az = law.expect([&](double s) { return t * s * s / (t * s * s + g); });
  lm.ez = law.expect([&](double s) { return s * s * err(s); });
  lm.gz = law.expect([&](double s) { return s * s * (lead(s) * cb * tx + t * vb / (t * s * s + g)); });
  lm.fz = law.expect([&](double s) { return s * s * lead(s) * tx; });
  return lm;
}

}  // namespace

SEStep blank_se_step(int k) {
  return SEStep{k,    kNaN, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN,
                kNaN, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN};
}

double output_second_moment(const ModelSpec& model) { return model.prior.second_moment() * model.law.second_moment(); }

SEInit se_init(const ModelSpec& model, const SolverConfig& cfg) {
  SEInit init;
  init.gamma10 = cfg.clip_gamma(cfg.gamma10);
  init.tau10 = cfg.clip_tau(cfg.tau10);
  init.sigma2_10 = cfg.init_variance;
  init.rho2_10 = cfg.init_variance;
  if (cfg.init == InitMode::haar) {
    // r10 and p10 carry no signal, so their errors are minus the truth.
    init.sigma2_10 += model.prior.second_moment();
    init.rho2_10 += output_second_moment(model);
    init.cx10 = -model.prior.second_moment();
    init.cz10 = -output_second_moment(model);
  }
  return init;
}

ScalarMoments input_moments(double gamma1, double sigma1_sq, const PriorSpec& prior, int nodes) {
  return input_coupled(gamma1, 1.0, sigma1_sq, prior, nodes, false);
}

ScalarMoments input_moments_coupled(double gamma1, double kappa, double noise_var, const PriorSpec& prior, int nodes) {
  return input_coupled(gamma1, kappa, noise_var, prior, nodes, true);
}

double sensitivity_input(double gamma1, double sigma1_sq, const PriorSpec& prior) {
  return input_moments(gamma1, sigma1_sq, prior).sensitivity;
}

double error_input(double gamma1, double sigma1_sq, const PriorSpec& prior) {
  return input_moments(gamma1, sigma1_sq, prior).error;
}

ScalarMoments output_moments(double tau1, double rho1_sq, const ChannelSpec& channel, double z0_var, int nodes) {
  return output_coupled(tau1, 1.0, rho1_sq, channel, z0_var, nodes, false);
}

ScalarMoments output_moments_coupled(double tau1, double kappa, double noise_var, const ChannelSpec& channel,
                                     double z0_var, int nodes) {
  return output_coupled(tau1, kappa, noise_var, channel, z0_var, nodes, true);
}

double sensitivity_output(double tau1, double rho1_sq, const ChannelSpec& channel, double z0_var) {
  return output_moments(tau1, rho1_sq, channel, z0_var).sensitivity;
}

double error_output(double tau1, double rho1_sq, const ChannelSpec& channel, double z0_var) {
  return output_moments(tau1, rho1_sq, channel, z0_var).error;
}

double expect_denoised(const PriorSpec& prior, double gamma, double sigma_sq,
                       const std::function<double(double, double)>& phi, int nodes, double cross) {
  const GaussHermite& gh = gauss_hermite(nodes);
  const double lead = cross / prior.second_moment();
  const double sd = std::sqrt(std::max(sigma_sq - lead * cross, 0.0));
  return over_prior(prior, nodes, [&](double x0) {
    double acc = 0.0;
    for (std::size_t j = 0; j < gh.x.size(); ++j)
      acc += gh.w[j] * phi(prior_posterior((1.0 + lead) * x0 + sd * gh.x[j], gamma, prior).mean, x0);
    return acc;
  });
}

std::pair<double, double> trace_limit_sensitivities(double gamma2, double tau2, const SingularValueLaw& law,
                                                    double delta) {
  require(gamma2 > 0.0 && tau2 > 0.0, ErrorKind::invalid_parameter, "trace_limit_sensitivities: need positive precisions");
  double ax = delta * law.expect([&](double s) { return gamma2 / (tau2 * s * s + gamma2); }) + (1.0 - delta);
  double az = law.expect([&](double s) { return tau2 * s * s / (tau2 * s * s + gamma2); });
  return {ax, az};
}

double error_x2(double gamma2, double tau2, double sigma2_2, double rho2_2, const SingularValueLaw& law, double delta) {
  double paired = law.expect([&](double s) {
    double d = 1.0 / (tau2 * s * s + gamma2);
    return d * d * (tau2 * tau2 * s * s * rho2_2 + gamma2 * gamma2 * sigma2_2);
  });
  return delta * paired + (1.0 - delta) * sigma2_2;
}

double error_z2(double gamma2, double tau2, double sigma2_2, double rho2_2, const SingularValueLaw& law) {
  return law.expect([&](double s) {
    double d = 1.0 / (tau2 * s * s + gamma2);
    return s * s * d * d * (tau2 * tau2 * s * s * rho2_2 + gamma2 * gamma2 * sigma2_2);
  });
}

double lmmse_sensitivity(double gamma2, double gamma_w, const SingularValueLaw& law, double delta) {
  return delta * law.expect([&](double s) { return gamma2 / (gamma_w * s * s + gamma2); }) + (1.0 - delta);
}

double lmmse_error(double gamma2, double sigma2_2, double gamma_w, const SingularValueLaw& law, double delta) {
  double paired = law.expect([&](double s) {
    double den = gamma_w * s * s + gamma2;
    return (gamma_w * s * s + gamma2 * gamma2 * sigma2_2) / (den * den);
  });
  return delta * paired + (1.0 - delta) * sigma2_2;
}

namespace {

// One pass through the separable input denoiser: returns its moments and the message sent on.
struct InputStage {
  ScalarMoments m;
  double alpha;
  Message next;
};

InputStage input_stage(const Message& r1, const PriorSpec& prior, SeClip& clip, const SEOptions& opts,
                       SETrajectory& traj, int k) {
  const double tx = prior.second_moment();
  auto [kappa, noise] = opts.literal ? std::pair{1.0, r1.var} : decompose(r1, tx, k, "sigma2_1 noise");
  ScalarMoments m = checked_input(r1.prec, kappa, noise, prior, opts, traj, k);
  double a = clip.alpha(m.sensitivity);
  double prec = clip.gamma(r1.prec * (1.0 / a - 1.0));
  return {m, a, separable_stage(r1, m, prec, a, kappa, noise, opts.literal, k, "sigma2_2").out};
}

InputStage output_stage(const Message& p1, const ChannelSpec& channel, double zv, SeClip& clip, const SEOptions& opts,
                        SETrajectory& traj, int k) {
  auto [kappa, noise] = opts.literal ? std::pair{1.0, p1.var} : decompose(p1, zv, k, "rho2_1 noise");
  ScalarMoments m = checked_output(p1.prec, kappa, noise, channel, zv, opts, traj, k);
  double b = clip.alpha(m.sensitivity);
  double prec = clip.tau(p1.prec * (1.0 / b - 1.0));
  return {m, b, separable_stage(p1, m, prec, b, kappa, noise, opts.literal, k, "rho2_2").out};
}

}  // namespace

SETrajectory run_se_vamp(const ModelSpec& model, const SEInit& init, int iterations, const SolverConfig& clips,
                         const SEOptions& opts) {
  model.validate();
  clips.validate();
  if (model.channel.kind != ChannelKind::awgn) fail(ErrorKind::unsupported_model, "VAMP SE needs the AWGN channel");
  SETrajectory traj;
  traj.engine = "vamp";
  SeClip clip{clips, traj};
  const double tx = model.prior.second_moment();
  // y plays the role of p2: error w, uncorrelated with z0.
  const Message yw{1.0 / model.channel.tau_w, model.channel.tau_w, 0.0};

  Message r1{clip.gamma(init.gamma10), init.sigma2_10, opts.literal ? 0.0 : init.cx10};
  for (int k = 0; k <= iterations; ++k) {
    InputStage in = input_stage(r1, model.prior, clip, opts, traj, k);
    const Message& r2 = in.next;

    LinearMoments lm = linear_stage(r2, yw, tx, 0.0, model, opts.literal, k);
    double a2 = clip.alpha(lm.ax);
    double gx = opts.literal ? a2 * r2.var : lm.gx;
    Message r1_next = extrinsic(clip.gamma(r2.prec * (1.0 / a2 - 1.0)), a2, lm.ex, gx, lm.fx, r2, k, "sigma2_1");

    SEStep st = blank_se_step(k);
    st.alpha1 = in.alpha;
    st.alpha2 = a2;
    st.gamma1 = r1.prec;
    st.gamma2 = r2.prec;
    st.sigma2_1 = r1.var;
    st.sigma2_2 = r2.var;
    st.cx1 = r1.corr;
    st.cx2 = r2.corr;
    st.mse_pred = in.m.error;
    st.mse_x2 = lm.ex;
    traj.steps.push_back(st);

    r1 = r1_next;
  }
  return traj;
}

SETrajectory run_se_gvamp(const ModelSpec& model, const SEInit& init, int iterations, const SolverConfig& clips,
                          const SEOptions& opts) {
  model.validate();
  clips.validate();
  SETrajectory traj;
  traj.engine = "gvamp";
  SeClip clip{clips, traj};
  const double tx = model.prior.second_moment();
  const double zv = output_second_moment(model);

  Message r1{clip.gamma(init.gamma10), init.sigma2_10, opts.literal ? 0.0 : init.cx10};
  Message p1{clip.tau(init.tau10), init.rho2_10, opts.literal ? 0.0 : init.cz10};
  for (int k = 0; k <= iterations; ++k) {
    InputStage in = input_stage(r1, model.prior, clip, opts, traj, k);
    InputStage out = output_stage(p1, model.channel, zv, clip, opts, traj, k);
    const Message& r2 = in.next;
    const Message& p2 = out.next;

    LinearMoments lm = linear_stage(r2, p2, tx, zv, model, opts.literal, k);
    double a2 = clip.alpha(lm.ax);
    double b2 = clip.alpha(lm.az);
    double gx = opts.literal ? a2 * r2.var : lm.gx;
    double gz = opts.literal ? b2 * p2.var : lm.gz;
    Message r1_next = extrinsic(clip.gamma(r2.prec * (1.0 / a2 - 1.0)), a2, lm.ex, gx, lm.fx, r2, k, "sigma2_1");
    Message p1_next = extrinsic(clip.tau(p2.prec * (1.0 / b2 - 1.0)), b2, lm.ez, gz, lm.fz, p2, k, "rho2_1");

    SEStep st = blank_se_step(k);
    st.alpha1 = in.alpha;
    st.alpha2 = a2;
    st.beta1 = out.alpha;
    st.beta2 = b2;
    st.gamma1 = r1.prec;
    st.gamma2 = r2.prec;
    st.tau1 = p1.prec;
    st.tau2 = p2.prec;
    st.sigma2_1 = r1.var;
    st.sigma2_2 = r2.var;
    st.rho2_1 = p1.var;
    st.rho2_2 = p2.var;
    st.cx1 = r1.corr;
    st.cx2 = r2.corr;
    st.cz1 = p1.corr;
    st.cz2 = p2.corr;
    st.mse_pred = in.m.error;
    st.mse_x2 = lm.ex;
    st.mse_z1 = out.m.error;
    traj.steps.push_back(st);

    r1 = r1_next;
    p1 = p1_next;
  }
  return traj;
}

SETrajectory run_se_amp(const ModelSpec& model, int iterations, const SolverConfig& clips, const SEOptions& opts) {
  model.validate();
  clips.validate();
  if (model.channel.kind != ChannelKind::awgn) fail(ErrorKind::unsupported_model, "AMP SE needs the AWGN channel");
  SETrajectory traj;
  traj.engine = "amp";
  SeClip clip{clips, traj};
  SEOptions plain = opts;
  plain.literal = true;
  double t2 = model.channel.tau_w + model.prior.second_moment() / model.delta;
  for (int k = 0; k <= iterations; ++k) {
    double gamma = clip.gamma(1.0 / t2);
    ScalarMoments m = checked_input(gamma, 1.0, t2, model.prior, plain, traj, k);
    SEStep st = blank_se_step(k);
    st.gamma1 = gamma;
    st.alpha1 = clip.alpha(m.sensitivity);
    st.sigma2_1 = t2;
    st.mse_pred = m.error;
    traj.steps.push_back(st);
    t2 = model.channel.tau_w + m.error / model.delta;
  }
  return traj;
}

}  // namespace mpforge
