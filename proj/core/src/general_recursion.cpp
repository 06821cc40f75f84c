#include "mpforge/general_recursion.hpp"

#include <algorithm>
#include <cmath>
#include <future>

#include "mpforge/error.hpp"

namespace mpforge {

namespace {

Vec2 row_of(const Eigen::MatrixXd& a, Eigen::Index i) {
  Vec2 r{0.0, 0.0};
  if (i < a.rows())
    for (Eigen::Index j = 0; j < std::min<Eigen::Index>(a.cols(), 2); ++j) r[static_cast<std::size_t>(j)] = a(i, j);
  return r;
}

struct MapResult {
  Eigen::MatrixXd value;  // rows x d
  Vec2 alpha{0.0, 0.0};
};

MapResult apply_map(const RowMap& f, Eigen::Index rows, int d, const Eigen::MatrixXd& a_in, const Eigen::MatrixXd& a_out,
                    const Eigen::MatrixXd& w, const Vec2& g_out, const Vec2& g_in) {
  MapResult res;
  res.value.resize(rows, d);
  Vec2 acc{0.0, 0.0};
  for (Eigen::Index i = 0; i < rows; ++i) {
    RowEval e = f(row_of(a_in, i), row_of(a_out, i), row_of(w, i), g_out, g_in);
    for (int j = 0; j < d; ++j) {
      res.value(i, j) = e.value[static_cast<std::size_t>(j)];
      acc[static_cast<std::size_t>(j)] += e.deriv[static_cast<std::size_t>(j)];
    }
  }
  for (int j = 0; j < d; ++j) res.alpha[static_cast<std::size_t>(j)] = acc[static_cast<std::size_t>(j)] / static_cast<double>(rows);
  return res;
}

void clip_first(Vec2& alpha, const GeneralInputs& in) {
  if (in.clip_alpha) alpha[0] = in.clip_alpha(alpha[0]);
}

// (f - alpha p) / (1 - alpha), column-wise.
Eigen::MatrixXd onsager(const Eigen::MatrixXd& f, const Vec2& alpha, const Eigen::MatrixXd& p, int d) {
  Eigen::MatrixXd out(f.rows(), d);
  for (int j = 0; j < d; ++j) {
    double a = alpha[static_cast<std::size_t>(j)];
    if (1.0 - a < 1e-12) fail(ErrorKind::internal_error, "general recursion: divergence within 1e-12 of 1");
    out.col(j) = (f.col(j) - a * p.col(j)) / (1.0 - a);
  }
  return out;
}

void check_inputs(const GeneralInputs& in, bool with_output) {
  require(in.d == 1 || in.d == 2, ErrorKind::invalid_parameter, "general recursion: d must be 1 or 2");
  require(in.v != nullptr, ErrorKind::invalid_parameter, "general recursion: V missing");
  const Eigen::Index n = in.v->size();
  require(in.u0_in.rows() == n && in.u0_in.cols() == in.d, ErrorKind::invalid_dimension, "u0_in must be N x d");
  require(in.w_p_in.rows() == n && in.w_q_in.rows() == n, ErrorKind::invalid_dimension, "input disturbances need N rows");
  require(static_cast<bool>(in.f_p_in) && static_cast<bool>(in.f_q_in) && static_cast<bool>(in.gamma_q_in) &&
              static_cast<bool>(in.gamma_p_in),
          ErrorKind::invalid_parameter, "general recursion: input maps missing");
  if (!with_output) return;
  require(in.u != nullptr, ErrorKind::invalid_parameter, "general recursion: U missing");
  const Eigen::Index m = in.u->size();
  require(m <= n, ErrorKind::invalid_dimension, "general recursion: need M <= N");
  require(in.u0_out.rows() == m && in.u0_out.cols() == in.d, ErrorKind::invalid_dimension, "u0_out must be M x d");
  require(in.w_p_out.rows() == m && in.w_q_out.rows() == m, ErrorKind::invalid_dimension,
          "output disturbances need M rows");
  require(static_cast<bool>(in.f_p_out) && static_cast<bool>(in.f_q_out) && static_cast<bool>(in.gamma_q_out) &&
              static_cast<bool>(in.gamma_p_out),
          ErrorKind::invalid_parameter, "general recursion: output maps missing");
}

// Families that cancel to rounding noise (r2 under a Gaussian prior) are measured against
// the signal scale instead of their own size.
double rel_inf(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& signal) {
  double scale = std::max({b.lpNorm<Eigen::Infinity>(), signal.lpNorm<Eigen::Infinity>(), 1e-300});
  return (a.col(0) - b).lpNorm<Eigen::Infinity>() / scale;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

std::vector<GeneralState> run_general_gvamp(const GeneralInputs& in, int iterations) {
  check_inputs(in, true);
  const Eigen::Index n = in.v->size(), m = in.u->size();
  const int d = in.d;
  std::vector<GeneralState> out;
  Eigen::MatrixXd u_in = in.u0_in, u_out = in.u0_out;
  Vec2 gp_in = in.gamma_p0_in, gp_out = in.gamma_p0_out;
  for (int k = 0; k <= iterations; ++k) {
    GeneralState st;
    st.k = k;
    st.u_in = u_in;
    st.u_out = u_out;
    st.gamma_p_in = gp_in;
    st.gamma_p_out = gp_out;
    st.p_in = in.v->apply(u_in);
    st.p_out = in.u->apply(u_out);

    MapResult fpi = apply_map(in.f_p_in, n, d, st.p_in, st.p_out, in.w_p_in, gp_out, gp_in);
    MapResult fpo = apply_map(in.f_p_out, m, d, st.p_in, st.p_out, in.w_p_out, gp_out, gp_in);
    clip_first(fpi.alpha, in);
    clip_first(fpo.alpha, in);
    st.alpha_p_in = fpi.alpha;
    st.alpha_p_out = fpo.alpha;
    st.v_in = onsager(fpi.value, fpi.alpha, st.p_in, d);
    st.v_out = onsager(fpo.value, fpo.alpha, st.p_out, d);

    st.gamma_q_in = in.gamma_q_in(gp_in, st.alpha_p_in);
    st.gamma_q_out = in.gamma_q_out(gp_out, st.alpha_p_out);
    st.q_in = in.v->apply_transpose(st.v_in);
    st.q_out = in.u->apply_transpose(st.v_out);

    MapResult fqi = apply_map(in.f_q_in, n, d, st.q_in, st.q_out, in.w_q_in, st.gamma_q_out, st.gamma_q_in);
    MapResult fqo = apply_map(in.f_q_out, m, d, st.q_in, st.q_out, in.w_q_out, st.gamma_q_out, st.gamma_q_in);
    clip_first(fqi.alpha, in);
    clip_first(fqo.alpha, in);
    st.alpha_q_in = fqi.alpha;
    st.alpha_q_out = fqo.alpha;
    u_in = onsager(fqi.value, fqi.alpha, st.q_in, d);
    u_out = onsager(fqo.value, fqo.alpha, st.q_out, d);
    gp_in = in.gamma_p_in(st.gamma_q_in, st.alpha_q_in);
    gp_out = in.gamma_p_out(st.gamma_q_out, st.alpha_q_out);
    out.push_back(std::move(st));
  }
  return out;
}

std::vector<GeneralState> run_general_vamp(const GeneralInputs& in, int iterations) {
  check_inputs(in, false);
  const Eigen::Index n = in.v->size();
  const int d = in.d;
  const Eigen::MatrixXd none;
  const Vec2 unit{1.0, 1.0};
  std::vector<GeneralState> out;
  Eigen::MatrixXd u = in.u0_in;
  Vec2 gp = in.gamma_p0_in;
  for (int k = 0; k <= iterations; ++k) {
    GeneralState st;
    st.k = k;
    st.u_in = u;
    st.gamma_p_in = gp;
    st.p_in = in.v->apply(u);
    MapResult fp = apply_map(in.f_p_in, n, d, st.p_in, none, in.w_p_in, unit, gp);
    clip_first(fp.alpha, in);
    st.alpha_p_in = fp.alpha;
    st.v_in = onsager(fp.value, fp.alpha, st.p_in, d);
    st.gamma_q_in = in.gamma_q_in(gp, st.alpha_p_in);
    st.q_in = in.v->apply_transpose(st.v_in);
    MapResult fq = apply_map(in.f_q_in, n, d, st.q_in, none, in.w_q_in, unit, st.gamma_q_in);
    clip_first(fq.alpha, in);
    st.alpha_q_in = fq.alpha;
    u = onsager(fq.value, fq.alpha, st.q_in, d);
    gp = in.gamma_p_in(st.gamma_q_in, st.alpha_q_in);
    out.push_back(std::move(st));
  }
  return out;
}

Vec2 translated_gamma_update(const Vec2& gamma, const Vec2& alpha, const SolverConfig& cfg) {
  return {cfg.clip_gamma(gamma[0] * (1.0 - alpha[0]) / alpha[0]), 1.0};
}

GeneralInputs translate_gvamp(const ProblemInstance& inst, const PriorSpec& prior, const ChannelSpec& channel,
                              const SolverConfig& cfg) {
  if (!inst.factored()) fail(ErrorKind::unsupported_model, "translation needs an SVD-factored design");
  channel.validate();
  const Eigen::Index n = inst.n(), m = inst.m();
  GeneralInputs g;
  g.d = 2;
  g.v = std::make_shared<const OrthogonalMatrix>(inst.fac.v);
  g.u = std::make_shared<const OrthogonalMatrix>(inst.fac.u);

  g.u0_in = Eigen::MatrixXd::Zero(n, 2);
  g.u0_in.col(0) = inst.fac.v.apply_transpose(initial_r1(inst, cfg));
  g.u0_out.resize(m, 2);
  g.u0_out.col(0) = inst.fac.u.apply_transpose(initial_p1(inst, cfg));
  g.u0_out.col(1) = inst.fac.u.apply_transpose(inst.z0);
  g.gamma_p0_in = {cfg.clip_gamma(cfg.gamma10), 1.0};
  g.gamma_p0_out = {cfg.clip_tau(cfg.tau10), 1.0};

  g.w_p_in = inst.x0;
  g.w_p_out = inst.w;
  g.w_q_in.resize(n, 2);
  g.w_q_in.col(0) = inst.fac.s_padded();
  g.w_q_in.col(1) = g.u0_in.col(0);
  g.w_q_out.resize(m, 2);
  g.w_q_out.col(0) = inst.fac.s;
  g.w_q_out.col(1) = g.u0_out.col(0);

  g.f_p_in = [prior](const Vec2& p_in, const Vec2&, const Vec2& w, const Vec2&, const Vec2& gamma) {
    ScalarPosterior sp = prior_posterior(p_in[0], gamma[0], prior);
    return RowEval{{sp.mean, w[0]}, {sp.deriv, 0.0}};
  };
  g.f_p_out = [channel](const Vec2&, const Vec2& p_out, const Vec2& w, const Vec2& tau, const Vec2&) {
    double y = channel.observe(p_out[1], w[0]);
    ScalarPosterior sp = channel_posterior(p_out[0], tau[0], y, channel);
    return RowEval{{sp.mean, 0.0}, {sp.deriv, 0.0}};
  };
  g.f_q_in = [](const Vec2& q_in, const Vec2& q_out, const Vec2& w, const Vec2& tau, const Vec2& gamma) {
    double den = tau[0] * w[0] * w[0] + gamma[0];
    return RowEval{{(tau[0] * w[0] * q_out[0] + gamma[0] * q_in[0]) / den, 0.0}, {gamma[0] / den, 0.0}};
  };
  // second column regenerates U^T z0 = S V^T x0 from q_in column 2
  g.f_q_out = [](const Vec2& q_in, const Vec2& q_out, const Vec2& w, const Vec2& tau, const Vec2& gamma) {
    double den = tau[0] * w[0] * w[0] + gamma[0];
    return RowEval{{w[0] * (tau[0] * w[0] * q_out[0] + gamma[0] * q_in[0]) / den, w[0] * q_in[1]},
                   {tau[0] * w[0] * w[0] / den, 0.0}};
  };
  ParamUpdate gamma_update = [cfg](const Vec2& gamma, const Vec2& alpha) {
    return translated_gamma_update(gamma, alpha, cfg);
  };
  ParamUpdate tau_update = [cfg](const Vec2& tau, const Vec2& alpha) {
    return Vec2{cfg.clip_tau(tau[0] * (1.0 - alpha[0]) / alpha[0]), 1.0};
  };
  g.gamma_q_in = g.gamma_p_in = gamma_update;
  g.gamma_q_out = g.gamma_p_out = tau_update;
  g.clip_alpha = [cfg](double a) { return cfg.clip_alpha(a); };
  return g;
}

GeneralInputs translate_vamp(const ProblemInstance& inst, const PriorSpec& prior, const SolverConfig& cfg) {
  if (!inst.factored()) fail(ErrorKind::unsupported_model, "translation needs an SVD-factored design");
  if (inst.channel.kind != ChannelKind::awgn) fail(ErrorKind::unsupported_model, "VAMP translation needs AWGN");
  const Eigen::Index n = inst.n(), m = inst.m();
  const double gw = 1.0 / inst.channel.tau_w;
  GeneralInputs g;
  g.d = 1;
  g.v = std::make_shared<const OrthogonalMatrix>(inst.fac.v);
  g.u0_in = inst.fac.v.apply_transpose(Eigen::VectorXd(initial_r1(inst, cfg) - inst.x0));
  g.gamma_p0_in = {cfg.clip_gamma(cfg.gamma10), 1.0};
  g.w_p_in = inst.x0;
  g.w_q_in = Eigen::MatrixXd::Zero(n, 2);
  g.w_q_in.col(0) = inst.fac.s_padded();
  g.w_q_in.col(1).head(m) = inst.fac.u.apply_transpose(Eigen::VectorXd(inst.w));

  g.f_p_in = [prior](const Vec2& p, const Vec2&, const Vec2& w, const Vec2&, const Vec2& gamma) {
    ScalarPosterior sp = prior_posterior(w[0] + p[0], gamma[0], prior);
    return RowEval{{sp.mean - w[0], 0.0}, {sp.deriv, 0.0}};
  };
  g.f_q_in = [gw](const Vec2& q, const Vec2&, const Vec2& w, const Vec2&, const Vec2& gamma) {
    double den = gw * w[0] * w[0] + gamma[0];
    return RowEval{{(gw * w[0] * w[1] + gamma[0] * q[0]) / den, 0.0}, {gamma[0] / den, 0.0}};
  };
  g.gamma_q_in = g.gamma_p_in = [cfg](const Vec2& gamma, const Vec2& alpha) {
    return translated_gamma_update(gamma, alpha, cfg);
  };
  g.clip_alpha = [cfg](double a) { return cfg.clip_alpha(a); };
  return g;
}

TranslationReport check_translation_equivalence(const ProblemInstance& inst, const PriorSpec& prior,
                                                const ChannelSpec& channel, const SolverConfig& cfg, int iterations) {
  SolverConfig run_cfg = cfg;
  run_cfg.max_iters = iterations;
  run_cfg.stop_eps1 = run_cfg.stop_eps2 = run_cfg.stop_change_eps = 0.0;
  run_cfg.keep_iterates = true;
  run_cfg.keep_x_hat = KeepPolicy::none;

  auto direct = std::async(std::launch::async, [&] { return run_gvamp(inst, prior, channel, run_cfg); });
  GeneralInputs g = translate_gvamp(inst, prior, channel, run_cfg);
  std::vector<GeneralState> states = run_general_gvamp(g, iterations);
  SolverTrace trace = direct.get();

  TranslationReport rep;
  rep.algorithm = "gvamp";
  rep.iterations = iterations;
  const std::size_t count = std::min(states.size(), trace.iterates.size());
  for (std::size_t k = 0; k < count; ++k) {
    const GeneralState& st = states[k];
    const IterateSnapshot& it = trace.iterates[k];
    const IterationRecord& rec = trace.records[k];
    DiscrepancyRow row;
    row.k = static_cast<int>(k);
    row.r1 = rel_inf(st.p_in, it.r1, inst.x0);
    row.r2 = rel_inf(st.v_in, it.r2, inst.x0);
    row.p1 = rel_inf(st.p_out, it.p1, inst.z0);
    row.p2 = rel_inf(st.v_out, it.p2, inst.z0);
    row.scalars = std::max({rel(st.alpha_p_in[0], rec.alpha1), rel(st.alpha_p_out[0], rec.beta1),
                            rel(st.alpha_q_in[0], rec.alpha2), rel(st.alpha_q_out[0], rec.beta2),
                            rel(st.gamma_p_in[0], rec.gamma1), rel(st.gamma_p_out[0], rec.tau1),
                            rel(st.gamma_q_in[0], rec.gamma2), rel(st.gamma_q_out[0], rec.tau2)});
    rep.max_discrepancy = std::max({rep.max_discrepancy, row.r1, row.r2, row.p1, row.p2, row.scalars});
    rep.column2_error = std::max({rep.column2_error, (st.v_in.col(1) - inst.x0).lpNorm<Eigen::Infinity>(),
                                  (st.p_out.col(1) - inst.z0).lpNorm<Eigen::Infinity>()});
    rep.rows.push_back(row);
  }
  rep.pass = count == static_cast<std::size_t>(iterations) + 1 && rep.max_discrepancy < rep.tolerance &&
             std::isfinite(rep.max_discrepancy);
  return rep;
}

TranslationReport check_translation_equivalence_vamp(const ProblemInstance& inst, const PriorSpec& prior,
                                                     const SolverConfig& cfg, int iterations) {
  SolverConfig run_cfg = cfg;
  run_cfg.max_iters = iterations;
  run_cfg.stop_eps1 = run_cfg.stop_eps2 = run_cfg.stop_change_eps = 0.0;
  run_cfg.keep_iterates = true;
  run_cfg.keep_x_hat = KeepPolicy::none;

  auto direct = std::async(std::launch::async, [&] { return run_vamp(inst, prior, run_cfg); });
  GeneralInputs g = translate_vamp(inst, prior, run_cfg);
  std::vector<GeneralState> states = run_general_vamp(g, iterations);
  SolverTrace trace = direct.get();

  TranslationReport rep;
  rep.algorithm = "vamp";
  rep.iterations = iterations;
  const std::size_t count = std::min(states.size(), trace.iterates.size());
  for (std::size_t k = 0; k < count; ++k) {
    const GeneralState& st = states[k];
    const IterateSnapshot& it = trace.iterates[k];
    const IterationRecord& rec = trace.records[k];
    DiscrepancyRow row;
    row.k = static_cast<int>(k);
    row.r1 = rel_inf(st.p_in.col(0) + inst.x0, it.r1, inst.x0);
    row.r2 = rel_inf(st.v_in.col(0) + inst.x0, it.r2, inst.x0);
    row.scalars = std::max({rel(st.alpha_p_in[0], rec.alpha1), rel(st.alpha_q_in[0], rec.alpha2),
                            rel(st.gamma_p_in[0], rec.gamma1), rel(st.gamma_q_in[0], rec.gamma2)});
    rep.max_discrepancy = std::max({rep.max_discrepancy, row.r1, row.r2, row.scalars});
    rep.rows.push_back(row);
  }
  rep.pass = count == static_cast<std::size_t>(iterations) + 1 && rep.max_discrepancy < rep.tolerance &&
             std::isfinite(rep.max_discrepancy);
  return rep;
}

}  // namespace mpforge
