#include "mpforge/general_se.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>
#include <fmt/format.h>

#include "mpforge/error.hpp"

namespace mpforge {

namespace {

double extrinsic(double second, double alpha, double var_in, int k) {
  double num = second - alpha * alpha * var_in;
  if (num < -1e-10 * std::max({std::abs(second), alpha * alpha * var_in, 1.0}))
    fail(ErrorKind::numeric_error, fmt::format("negative variance at iteration {}: {:.6g}", k, num));
  return std::max(num, 0.0) / ((1.0 - alpha) * (1.0 - alpha));
}

std::size_t per_replicate(const GeneralSeOptions& opts) {
  require(opts.replicates >= 2, ErrorKind::invalid_parameter, "general SE: need at least 2 replicates");
  std::size_t n = opts.mc_samples / static_cast<std::size_t>(opts.replicates);
  require(n >= 100, ErrorKind::invalid_parameter, "general SE: fewer than 100 samples per replicate");
  return n;
}

std::size_t paired_rows(const GeneralSeModel& gm, std::size_t n) {
  auto np = static_cast<std::size_t>(std::llround(gm.model.delta * static_cast<double>(n)));
  return std::clamp<std::size_t>(np, 1, n);
}

constexpr std::array<double SEStep::*, 19> kFields = {
    &SEStep::alpha1, &SEStep::alpha2,   &SEStep::beta1,    &SEStep::beta2,   &SEStep::gamma1,
    &SEStep::gamma2, &SEStep::tau1,     &SEStep::tau2,     &SEStep::sigma2_1, &SEStep::sigma2_2,
    &SEStep::rho2_1, &SEStep::rho2_2,   &SEStep::mse_pred, &SEStep::mse_x2,  &SEStep::mse_z1,
    &SEStep::cx1,    &SEStep::cx2,      &SEStep::cz1,      &SEStep::cz2};

struct Clipper {
  const SolverConfig& cfg;
  int events = 0;
  double alpha(double v) { return count(cfg.clip_alpha(v), v); }
  double gamma(double v) { return count(cfg.clip_gamma(v), v); }
  double tau(double v) { return count(cfg.clip_tau(v), v); }
  double count(double c, double v) {
    if (c != v) ++events;
    return c;
  }
};

double gram(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a.dot(b) / static_cast<double>(a.size()); }

/// Draws the next Gaussian-process member given earlier members `prev` (same samples) and the
/// sample moments of the functional sequence `src` (U for P, V for Q). Collinear earlier members
/// (a linear denoiser can return exactly minus the truth) are handled by a rank-revealing solve.
Eigen::VectorXd next_member(const std::vector<Eigen::VectorXd>& prev, const std::vector<Eigen::VectorXd>& src, int k,
                            Rng& rng) {
  const Eigen::Index n = src[static_cast<std::size_t>(k)].size();
  Eigen::MatrixXd sigma(k + 1, k + 1);
  for (int i = 0; i <= k; ++i)
    for (int j = 0; j <= i; ++j) sigma(i, j) = sigma(j, i) = gram(src[i], src[j]);
  Eigen::VectorXd out = rng.normal_vector(n);
  if (k == 0) return std::sqrt(sigma(0, 0)) * out;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(sigma.topLeftCorner(k, k));
  cod.setThreshold(1e-10);
  Eigen::VectorXd b = sigma.block(0, k, k, 1);
  Eigen::VectorXd beta = cod.solve(b);
  double rho = sigma(k, k) - b.dot(beta);
  out *= std::sqrt(std::max(rho, 0.0));
  for (int r = 0; r < k; ++r) out += beta(r) * prev[static_cast<std::size_t>(r)];
  return out;
}

// Gram matrix of v[first], ..., v[first + count - 1].
Eigen::MatrixXd gram_matrix(const std::vector<Eigen::VectorXd>& v, int first, int count) {
  Eigen::MatrixXd g(count, count);
  for (int i = 0; i < count; ++i)
    for (int j = 0; j <= i; ++j) g(i, j) = g(j, i) = gram(v[first + i], v[first + j]);
  return g;
}

void fill_regressions(GaussianProcessSide& side, int iterations) {
  side.beta_p.assign(1, Eigen::VectorXd());
  side.beta_q.assign(1, Eigen::VectorXd());
  side.rho_p.assign(1, side.sigma_u(0, 0));
  side.rho_q.assign(1, side.sigma_v(0, 0));
  for (int k = 1; k <= iterations; ++k) {
    Eigen::VectorXd b;
    double rho = 0.0;
    regress_last(side.sigma_u, k, b, rho);
    side.beta_p.push_back(b);
    side.rho_p.push_back(rho);
    regress_last(side.sigma_v, k, b, rho);
    side.beta_q.push_back(b);
    side.rho_q.push_back(rho);
  }
}

void mean_and_stderr(const std::vector<std::vector<double>>& reps, std::vector<double>& mean, std::vector<double>& se) {
  const std::size_t r = reps.size(), len = reps.front().size();
  mean.assign(len, 0.0);
  se.assign(len, 0.0);
  for (std::size_t k = 0; k < len; ++k) {
    double m = 0.0;
    for (const auto& v : reps) m += v[k];
    m /= static_cast<double>(r);
    double ss = 0.0;
    for (const auto& v : reps) ss += (v[k] - m) * (v[k] - m);
    mean[k] = m;
    se[k] = std::sqrt(ss / static_cast<double>(r - 1) / static_cast<double>(r));
  }
}

}  // namespace

GeneralSeModel GeneralSeModel::from(const ModelSpec& model, GeneralKind kind) {
  model.validate();
  if (kind == GeneralKind::vamp && model.channel.kind != ChannelKind::awgn)
    fail(ErrorKind::unsupported_model, "the VAMP general recursion needs the AWGN channel");
  GeneralSeModel gm;
  gm.kind = kind;
  gm.model = model;
  gm.z0_var = output_second_moment(model);
  return gm;
}

GeneralSeModel::PDraw GeneralSeModel::draw_p(Rng& rng) const {
  PDraw d;
  d.x0 = model.prior.sample(rng);
  d.z0 = std::sqrt(z0_var) * rng.normal();
  d.y = model.channel.observe(d.z0, std::sqrt(model.channel.tau_w) * rng.normal());
  return d;
}

GeneralSeModel::QDraw GeneralSeModel::draw_q(Rng& rng) const {
  QDraw d;
  d.s = model.law.sample(rng);
  d.w = std::sqrt(model.channel.tau_w) * rng.normal();
  return d;
}

ScalarPosterior GeneralSeModel::f_p_in(double p, const PDraw& d, double gamma) const {
  ScalarPosterior sp = prior_posterior(d.x0 + p, gamma, model.prior);
  return {sp.mean - d.x0, sp.deriv};
}

ScalarPosterior GeneralSeModel::f_p_out(double p, const PDraw& d, double tau) const {
  ScalarPosterior sp = channel_posterior(d.z0 + p, tau, d.y, model.channel);
  return {sp.mean - d.z0, sp.deriv};
}

ScalarPosterior GeneralSeModel::f_q_in(double q_in, double q_out, const QDraw& d, double gamma, double tau) const {
  if (kind == GeneralKind::vamp) {
    double gw = 1.0 / model.channel.tau_w;
    double den = gw * d.s * d.s + gamma;
    return {(gw * d.s * d.w + gamma * q_in) / den, gamma / den};
  }
  double den = tau * d.s * d.s + gamma;
  return {(tau * d.s * q_out + gamma * q_in) / den, gamma / den};
}

ScalarPosterior GeneralSeModel::f_q_out(double q_in, double q_out, const QDraw& d, double gamma, double tau) const {
  double den = tau * d.s * d.s + gamma;
  return {d.s * (tau * d.s * q_out + gamma * q_in) / den, tau * d.s * d.s / den};
}

void regress_last(const Eigen::MatrixXd& sigma, int k, Eigen::VectorXd& beta, double& rho) {
  require(k >= 1 && k < sigma.rows(), ErrorKind::invalid_parameter, "regress_last: k out of range");
  Eigen::MatrixXd block = sigma.topLeftCorner(k, k);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(block, Eigen::EigenvaluesOnly);
  double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e12)
    fail(ErrorKind::numeric_error, fmt::format("singular covariance block at iteration {} (cond {:.3g})", k,
                                               lo > 0.0 ? hi / lo : INFINITY));
  Eigen::VectorXd b = sigma.block(0, k, k, 1);
  beta = block.ldlt().solve(b);
  rho = sigma(k, k) - b.dot(beta);
}

namespace {

// Running sums for one separable map: divergence, f^2, f * (input error), f * truth.
struct Sums {
  double d = 0.0, ff = 0.0, fe = 0.0, ft = 0.0;
  void add(const ScalarPosterior& f, double e, double t) {
    d += f.deriv;
    ff += f.mean * f.mean;
    fe += f.mean * e;
    ft += f.mean * t;
  }
};

struct Side {
  double prec, var, corr;  // message precision, E[E^2], E[E * truth]
};

// Extrinsic message from sample averages. Literal mode drops the truth terms and uses Stein
// for the input cross term, matching the uncoupled quadrature recursion.
Side onsager(const Sums& s, double count, double alpha, double prec_out, const Side& in, bool literal, int k) {
  double second = s.ff / count;
  if (literal) return {prec_out, extrinsic(second, alpha, in.var, k), 0.0};
  double num = second - 2.0 * alpha * s.fe / count + alpha * alpha * in.var;
  if (num < -1e-10 * std::max({second, alpha * alpha * in.var, 1.0}))
    fail(ErrorKind::numeric_error, fmt::format("negative variance at iteration {}: {:.6g}", k, num));
  double var = std::max(num, 0.0) / ((1.0 - alpha) * (1.0 - alpha));
  return {prec_out, var, (s.ft / count - alpha * in.corr) / (1.0 - alpha)};
}

// Error = (corr / t2) truth + independent noise.
std::pair<double, double> split(const Side& m, double t2, bool literal) {
  if (literal || t2 <= 0.0) return {0.0, std::sqrt(m.var)};
  double lead = m.corr / t2;
  return {lead, std::sqrt(std::max(m.var - lead * m.corr, 0.0))};
}

}  // namespace

SETrajectory run_se_general(const GeneralSeModel& gm, const SEInit& init, int iterations, const SolverConfig& clips,
                            const GeneralSeOptions& opts) {
  clips.validate();
  require(iterations >= 0, ErrorKind::invalid_parameter, "run_se_general: iterations must be >= 0");
  const bool gvamp = gm.kind == GeneralKind::gvamp;
  const bool literal = opts.literal;
  const double tx = gm.model.prior.second_moment();

  SETrajectory traj;
  traj.engine = gvamp ? "general-gvamp" : "general-vamp";
  // One trajectory on n samples. Sample averages enter the recursion nonlinearly, so each run
  // carries an O(1/n) bias.
  auto trajectory = [&](const std::string& label, std::size_t n) {
    const std::size_t np = paired_rows(gm, n);
    const double delta_n = static_cast<double>(np) / static_cast<double>(n);
    const double dn = static_cast<double>(n), dp = static_cast<double>(np);
    Rng rng = Rng::stream(opts.seed, label);
    Clipper clip{clips};
    std::vector<SEStep> steps;
    Side p_in{clip.gamma(init.gamma10), init.sigma2_10, literal ? 0.0 : init.cx10};
    Side p_out{clip.tau(init.tau10), init.rho2_10, literal ? 0.0 : init.cz10};
    for (int k = 0; k <= iterations; ++k) {
      SEStep st = blank_se_step(k);
      st.gamma1 = p_in.prec;
      st.sigma2_1 = p_in.var;
      st.cx1 = p_in.corr;

      auto [lead, sd] = split(p_in, tx, literal);
      Sums s;
      for (std::size_t i = 0; i < n; ++i) {
        auto pd = gm.draw_p(rng);
        double e = lead * pd.x0 + sd * rng.normal();
        s.add(gm.f_p_in(e, pd, p_in.prec), e, pd.x0);
      }
      double a_pin = clip.alpha(s.d / dn);
      st.alpha1 = a_pin;
      st.mse_pred = s.ff / dn;
      Side q_in = onsager(s, dn, a_pin, clip.gamma(p_in.prec * (1.0 - a_pin) / a_pin), p_in, literal, k);
      st.gamma2 = q_in.prec;
      st.sigma2_2 = q_in.var;
      st.cx2 = q_in.corr;

      Side q_out{1.0, 0.0, 0.0};
      if (gvamp) {
        st.tau1 = p_out.prec;
        st.rho2_1 = p_out.var;
        st.cz1 = p_out.corr;
        auto [lo, so] = split(p_out, gm.z0_var, literal);
        Sums t;
        for (std::size_t i = 0; i < np; ++i) {
          auto pd = gm.draw_p(rng);
          double e = lo * pd.z0 + so * rng.normal();
          t.add(gm.f_p_out(e, pd, p_out.prec), e, pd.z0);
        }
        double a_pout = clip.alpha(t.d / dp);
        st.beta1 = a_pout;
        st.mse_z1 = t.ff / dp;
        q_out = onsager(t, dp, a_pout, clip.tau(p_out.prec * (1.0 - a_pout) / a_pout), p_out, literal, k);
        st.tau2 = q_out.prec;
        st.rho2_2 = q_out.var;
        st.cz2 = q_out.corr;
      }

      // q side in the SVD basis: xi = V^T x0 ~ N(0, tau_x), paired rows see U^T z0 = s xi.
      auto [la, sa] = split(q_in, tx, literal);
      auto [lb, sb] = split(q_out, gm.z0_var, literal);
      Sums pin, un, out;
      for (std::size_t i = 0; i < n; ++i) {
        double xi = std::sqrt(tx) * rng.normal();
        double a = la * xi + sa * rng.normal();
        if (i >= np) {
          un.add({a, 1.0}, a, xi);
          continue;
        }
        auto qd = gm.draw_q(rng);
        double b = gvamp ? lb * qd.s * xi + sb * rng.normal() : 0.0;
        pin.add(gm.f_q_in(a, b, qd, q_in.prec, q_out.prec), a, xi);
        if (gvamp) out.add(gm.f_q_out(a, b, qd, q_in.prec, q_out.prec), b, qd.s * xi);
      }
      const double du = static_cast<double>(n - np);
      Sums in;  // pooled per-coordinate averages, scaled back to sums over n
      auto pool = [&](double Sums::*f) {
        return dn * (delta_n * pin.*f / dp + (n > np ? (1.0 - delta_n) * un.*f / du : 0.0));
      };
      in.ff = pool(&Sums::ff);
      in.fe = pool(&Sums::fe);
      in.ft = pool(&Sums::ft);
      double a_qin = clip.alpha(delta_n * (pin.d / dp) + (1.0 - delta_n));
      st.alpha2 = a_qin;
      st.mse_x2 = in.ff / dn;
      Side p_in_next = onsager(in, dn, a_qin, clip.gamma(q_in.prec * (1.0 - a_qin) / a_qin), q_in, literal, k);

      if (gvamp) {
        double a_qout = clip.alpha(out.d / dp);
        st.beta2 = a_qout;
        p_out = onsager(out, dp, a_qout, clip.tau(q_out.prec * (1.0 - a_qout) / a_qout), q_out, literal, k);
      }
      p_in = p_in_next;
      steps.push_back(st);
    }
    return std::pair{std::move(steps), clip.events};
  };

  // The estimate uses every sample in one run. Replicates on 1/R of the samples each vary
  // R times as much, so their spread over sqrt(R) is the error of the full run.
  const std::size_t n = per_replicate(opts);
  auto [full, events] = trajectory("general-se/full", n * static_cast<std::size_t>(opts.replicates));
  traj.clip_events = events;
  std::vector<std::vector<SEStep>> reps;
  for (int r = 0; r < opts.replicates; ++r) reps.push_back(trajectory(fmt::format("general-se/{}", r), n).first);

  const double R = static_cast<double>(opts.replicates);
  for (int k = 0; k <= iterations; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    SEStep se = blank_se_step(k);
    for (auto field : kFields) {
      double m = 0.0;
      for (const auto& rep : reps) m += rep[kk].*field;
      m /= R;
      double ss = 0.0;
      for (const auto& rep : reps) ss += (rep[kk].*field - m) * (rep[kk].*field - m);
      se.*field = std::sqrt(ss / (R - 1.0) / R);
    }
    traj.steps.push_back(full[kk]);
    traj.stderr_steps.push_back(se);
  }
  return traj;
}

GaussianProcessModel track_gaussian_process(const GeneralSeModel& gm, const SETrajectory& se, int iterations,
                                            const GeneralSeOptions& opts) {
  require(iterations >= 0 && se.iterations() >= iterations + 1, ErrorKind::invalid_parameter,
          "track_gaussian_process: SE trajectory shorter than requested iterations");
  const std::size_t n = per_replicate(opts);
  const std::size_t np = paired_rows(gm, n);
  const bool gvamp = gm.kind == GeneralKind::gvamp;
  const int K = iterations;

  GaussianProcessModel out;
  out.iterations = K;
  out.has_out = gvamp;
  std::vector<std::vector<double>> pin2, qin2, pout2, qout2;
  Eigen::MatrixXd su_in = Eigen::MatrixXd::Zero(K + 1, K + 1), sv_in = su_in, su_out = su_in, sv_out = su_in;

  const double tx = gm.model.prior.second_moment();
  auto or_zero = [](double v) { return std::isfinite(v) ? v : 0.0; };
  const auto nn = static_cast<Eigen::Index>(n), mm = static_cast<Eigen::Index>(np);

  // Member 0 of every list is the truth: x0 (P, V) and xi = V^T x0 (Q, U) on the input side,
  // z0 (P, V) and U^T z0 = s xi (Q, U) on the output side. Members 1..K+1 are iterations 0..K.
  for (int r = 0; r < opts.replicates; ++r) {
    Rng rng = Rng::stream(opts.seed, fmt::format("gaussian-process/{}", r));
    std::vector<GeneralSeModel::PDraw> pd_in(n), pd_out(np);
    std::vector<GeneralSeModel::QDraw> qd(np);
    for (auto& d : pd_in) d = gm.draw_p(rng);
    for (auto& d : qd) d = gm.draw_q(rng);

    std::vector<Eigen::VectorXd> U_in, P_in, V_in, Q_in, U_out, P_out, V_out, Q_out;
    Eigen::VectorXd x0(nn);
    for (std::size_t i = 0; i < n; ++i) x0(static_cast<Eigen::Index>(i)) = pd_in[i].x0;
    P_in.push_back(x0);
    V_in.push_back(x0);
    Q_in.push_back(next_member(Q_in, V_in, 0, rng));
    U_in.push_back(Q_in[0]);
    const SEStep& s0 = se.steps[0];
    double lead = or_zero(s0.cx1) / tx;
    U_in.push_back(lead * Q_in[0] +
                   rng.normal_vector(nn, std::sqrt(std::max(s0.sigma2_1 - lead * or_zero(s0.cx1), 0.0))));
    if (gvamp) {
      Eigen::VectorXd sxi(mm);
      for (std::size_t i = 0; i < np; ++i) sxi(static_cast<Eigen::Index>(i)) = qd[i].s * Q_in[0](static_cast<Eigen::Index>(i));
      U_out.push_back(sxi);
      Q_out.push_back(sxi);
      P_out.push_back(next_member(P_out, U_out, 0, rng));
      V_out.push_back(P_out[0]);
      for (std::size_t i = 0; i < np; ++i) {
        auto& d = pd_out[i];
        d.z0 = P_out[0](static_cast<Eigen::Index>(i));
        d.y = gm.model.channel.observe(d.z0, std::sqrt(gm.model.channel.tau_w) * rng.normal());
      }
      double lo = gm.z0_var > 0.0 ? or_zero(s0.cz1) / gm.z0_var : 0.0;
      U_out.push_back(lo * sxi +
                      rng.normal_vector(mm, std::sqrt(std::max(s0.rho2_1 - lo * or_zero(s0.cz1), 0.0))));
    }
    std::vector<double> rp_in, rq_in, rp_out, rq_out;

    for (int k = 0; k <= K; ++k) {
      const int m = k + 1;
      const SEStep& st = se.steps[static_cast<std::size_t>(k)];
      P_in.push_back(next_member(P_in, U_in, m, rng));
      Eigen::VectorXd v(nn);
      for (std::size_t i = 0; i < n; ++i) {
        double p = P_in[m](static_cast<Eigen::Index>(i));
        v(static_cast<Eigen::Index>(i)) = (gm.f_p_in(p, pd_in[i], st.gamma1).mean - st.alpha1 * p) / (1.0 - st.alpha1);
      }
      V_in.push_back(std::move(v));
      rp_in.push_back(gram(P_in[m], P_in[m]));
      if (gvamp) {
        P_out.push_back(next_member(P_out, U_out, m, rng));
        Eigen::VectorXd vo(mm);
        for (std::size_t i = 0; i < np; ++i) {
          double p = P_out[m](static_cast<Eigen::Index>(i));
          vo(static_cast<Eigen::Index>(i)) = (gm.f_p_out(p, pd_out[i], st.tau1).mean - st.beta1 * p) / (1.0 - st.beta1);
        }
        V_out.push_back(std::move(vo));
        rp_out.push_back(gram(P_out[m], P_out[m]));
      }

      Q_in.push_back(next_member(Q_in, V_in, m, rng));
      rq_in.push_back(gram(Q_in[m], Q_in[m]));
      if (gvamp) {
        Q_out.push_back(next_member(Q_out, V_out, m, rng));
        rq_out.push_back(gram(Q_out[m], Q_out[m]));
      }
      if (k == K) break;

      Eigen::VectorXd u(nn);
      Eigen::VectorXd uo(gvamp ? mm : 0);
      for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        double q_in = Q_in[m](ii);
        double f = q_in;
        if (i < np) {
          double q_out = gvamp ? Q_out[m](ii) : 0.0;
          f = gm.f_q_in(q_in, q_out, qd[i], st.gamma2, st.tau2).mean;
          if (gvamp)
            uo(ii) = (gm.f_q_out(q_in, q_out, qd[i], st.gamma2, st.tau2).mean - st.beta2 * q_out) / (1.0 - st.beta2);
        }
        u(ii) = (f - st.alpha2 * q_in) / (1.0 - st.alpha2);
      }
      U_in.push_back(std::move(u));
      if (gvamp) U_out.push_back(std::move(uo));
    }

    su_in += gram_matrix(U_in, 1, K + 1);
    sv_in += gram_matrix(V_in, 1, K + 1);
    pin2.push_back(rp_in);
    qin2.push_back(rq_in);
    if (gvamp) {
      su_out += gram_matrix(U_out, 1, K + 1);
      sv_out += gram_matrix(V_out, 1, K + 1);
      pout2.push_back(rp_out);
      qout2.push_back(rq_out);
    }
  }

  const double R = static_cast<double>(opts.replicates);
  out.in.sigma_u = su_in / R;
  out.in.sigma_v = sv_in / R;
  mean_and_stderr(pin2, out.in.p_second, out.in.p_second_stderr);
  mean_and_stderr(qin2, out.in.q_second, out.in.q_second_stderr);
  fill_regressions(out.in, K);
  if (gvamp) {
    out.out.sigma_u = su_out / R;
    out.out.sigma_v = sv_out / R;
    mean_and_stderr(pout2, out.out.p_second, out.out.p_second_stderr);
    mean_and_stderr(qout2, out.out.q_second, out.out.q_second_stderr);
    fill_regressions(out.out, K);
  }
  return out;
}

}  // namespace mpforge
