#include "mpforge/denoisers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "mpforge/error.hpp"
#include "mpforge/special.hpp"

namespace mpforge {

std::string_view to_string(PriorKind kind) noexcept {
  switch (kind) {
    case PriorKind::gaussian: return "gaussian";
    case PriorKind::bernoulli_gaussian: return "bernoulli-gaussian";
    case PriorKind::grid: return "grid";
  }
  return "unknown";
}

PriorKind prior_kind_from_string(std::string_view name) {
  if (name == "gaussian") return PriorKind::gaussian;
  if (name == "bernoulli-gaussian") return PriorKind::bernoulli_gaussian;
  if (name == "grid") return PriorKind::grid;
  fail(ErrorKind::invalid_config, "unknown prior kind '" + std::string(name) + "'", "model.prior.kind");
}

PriorSpec PriorSpec::gaussian(double tau_x) {
  PriorSpec p;
  p.kind = PriorKind::gaussian;
  p.tau_x = tau_x;
  p.validate();
  return p;
}

PriorSpec PriorSpec::bernoulli_gaussian(double rho, double tau_x) {
  PriorSpec p;
  p.kind = PriorKind::bernoulli_gaussian;
  p.rho = rho;
  p.tau_x = tau_x;
  p.validate();
  return p;
}

PriorSpec PriorSpec::grid(double tau_x, std::vector<double> density) {
  PriorSpec p;
  p.kind = PriorKind::grid;
  p.tau_x = tau_x;
  p.density = std::move(density);
  p.validate();
  return p;
}

PriorSpec PriorSpec::grid_from_function(double tau_x, const std::function<double(double)>& f) {
  require(tau_x > 0.0 && std::isfinite(tau_x), ErrorKind::invalid_parameter, "grid prior: tau_x must be > 0");
  PriorSpec p;
  p.kind = PriorKind::grid;
  p.tau_x = tau_x;
  p.density.resize(kGridPoints);
  for (int j = 0; j < kGridPoints; ++j) p.density[j] = f(p.grid_point(j));
  double total = 0.0;
  for (int j = 0; j < kGridPoints; ++j) total += p.grid_mass(j);
  require(total > 0.0 && std::isfinite(total), ErrorKind::invalid_parameter, "grid prior: density has no mass");
  for (double& d : p.density) d /= total;
  p.validate();
  return p;
}

double PriorSpec::grid_step() const { return 20.0 * std::sqrt(tau_x) / (kGridPoints - 1); }

double PriorSpec::grid_point(int j) const { return -10.0 * std::sqrt(tau_x) + grid_step() * j; }

double PriorSpec::grid_mass(int j) const {
  double w = (j == 0 || j == kGridPoints - 1) ? 0.5 : 1.0;
  return w * grid_step() * density[static_cast<std::size_t>(j)];
}

void PriorSpec::validate() const {
  if (!(tau_x > 0.0 && std::isfinite(tau_x)))
    fail(ErrorKind::invalid_parameter, "prior: tau_x must be positive and finite", "model.prior.tau_x");
  if (kind == PriorKind::bernoulli_gaussian && !(rho > 0.0 && rho <= 1.0))
    fail(ErrorKind::invalid_parameter, "prior: sparsity rho must lie in (0, 1]", "model.prior.rho");
  if (kind == PriorKind::grid) {
    if (density.size() != static_cast<std::size_t>(kGridPoints))
      fail(ErrorKind::invalid_parameter, "grid prior: density must have 2001 values", "model.prior.density");
    double total = 0.0;
    for (int j = 0; j < kGridPoints; ++j) {
      if (!(density[static_cast<std::size_t>(j)] >= 0.0))
        fail(ErrorKind::invalid_parameter, "grid prior: density must be non-negative", "model.prior.density");
      total += grid_mass(j);
    }
    if (std::abs(total - 1.0) > 1e-8)
      fail(ErrorKind::invalid_parameter, "grid prior: density must integrate to 1", "model.prior.density");
  }
}

double PriorSpec::second_moment() const {
  switch (kind) {
    case PriorKind::gaussian: return tau_x;
    case PriorKind::bernoulli_gaussian: return rho * tau_x;
    case PriorKind::grid: {
      double m2 = 0.0;
      for (int j = 0; j < kGridPoints; ++j) m2 += grid_mass(j) * grid_point(j) * grid_point(j);
      return m2;
    }
  }
  return 0.0;
}

double PriorSpec::sample(Rng& rng) const {
  switch (kind) {
    case PriorKind::gaussian: return std::sqrt(tau_x) * rng.normal();
    case PriorKind::bernoulli_gaussian: {
      double u = rng.uniform();
      double z = rng.normal();
      return u < rho ? std::sqrt(tau_x) * z : 0.0;
    }
    case PriorKind::grid: {
      // Piecewise-linear density between grid points; pick a cell, then invert its CDF.
      double u = rng.uniform();
      double h = grid_step();
      double acc = 0.0;
      int cell = kGridPoints - 2;
      for (int j = 0; j < kGridPoints - 1; ++j) {
        double mass = 0.5 * h * (density[j] + density[j + 1]);
        if (u < acc + mass || j == kGridPoints - 2) {
          cell = j;
          u = mass > 0.0 ? (u - acc) / mass : 0.5;
          break;
        }
        acc += mass;
      }
      double a = density[cell], b = density[cell + 1];
      double t;
      if (std::abs(b - a) < 1e-14 * std::max(a, b) || a + b == 0.0) {
        t = u;
      } else {
        // Solve a t + (b - a) t^2 / 2 = u (a + b) / 2 for t in [0, 1].
        double disc = a * a + u * (b * b - a * a);
        t = (std::sqrt(std::max(disc, 0.0)) - a) / (b - a);
      }
      return grid_point(cell) + std::clamp(t, 0.0, 1.0) * h;
    }
  }
  return 0.0;
}

std::string_view to_string(ChannelKind kind) noexcept { return kind == ChannelKind::awgn ? "awgn" : "probit"; }

ChannelKind channel_kind_from_string(std::string_view name) {
  if (name == "awgn") return ChannelKind::awgn;
  if (name == "probit") return ChannelKind::probit;
  fail(ErrorKind::invalid_config, "unknown channel kind '" + std::string(name) + "'", "model.channel.kind");
}

ChannelSpec ChannelSpec::awgn(double tau_w) {
  ChannelSpec c;
  c.kind = ChannelKind::awgn;
  c.tau_w = tau_w;
  c.validate();
  return c;
}

ChannelSpec ChannelSpec::probit(double tau_w) {
  ChannelSpec c;
  c.kind = ChannelKind::probit;
  c.tau_w = tau_w;
  c.validate();
  return c;
}

void ChannelSpec::validate() const {
  if (!(tau_w > 0.0 && std::isfinite(tau_w)))
    fail(ErrorKind::invalid_parameter, "channel: tau_w must be positive and finite", "model.channel.tau_w");
}

double ChannelSpec::observe(double z, double w) const {
  if (kind == ChannelKind::awgn) return z + w;
  return (z + w) >= 0.0 ? 1.0 : -1.0;
}

// ---------------------------------------------------------------------------

namespace {

ScalarPosterior bg_posterior(double r, double gamma, double rho, double tau_x) {
  double v = 1.0 / gamma;
  double s1 = tau_x + v;
  double m1 = r * tau_x / s1;
  double v1 = tau_x * v / s1;
  if (rho >= 1.0) return {m1, v1 * gamma};
  // log-odds of the slab against the spike given r
  double logit = std::log(rho / (1.0 - rho)) + 0.5 * std::log(v / s1) + 0.5 * r * r * (1.0 / v - 1.0 / s1);
  double pi = logit >= 0.0 ? 1.0 / (1.0 + std::exp(-logit)) : std::exp(logit) / (1.0 + std::exp(logit));
  double mean = pi * m1;
  double var = pi * (v1 + m1 * m1) - mean * mean;
  return {mean, std::max(var, 0.0) * gamma};
}

// Walks outward from the atom nearest r and stops once even the heaviest atom could not
// contribute at the e^-50 level. Weights are rescaled online so one exp per atom suffices.
ScalarPosterior grid_posterior(double r, double gamma, const PriorSpec& prior) {
  const int n = PriorSpec::kGridPoints;
  double top = 0.0;
  for (int j = 0; j < n; ++j) top = std::max(top, prior.density[j]);
  const double log_top = std::log(top * prior.grid_step());
  double max_log = -std::numeric_limits<double>::infinity();
  double z = 0.0, m = 0.0, m2 = 0.0;
  auto visit = [&](int j) {
    double x = prior.grid_point(j);
    double d = r - x;
    double quad = 0.5 * gamma * d * d;
    if (log_top - quad < max_log - 50.0) return false;
    if (prior.density[j] <= 0.0) return true;
    double lw = std::log(prior.grid_mass(j)) - quad;
    if (lw > max_log) {
      double scale = std::exp(max_log - lw);
      z *= scale;
      m *= scale;
      m2 *= scale;
      max_log = lw;
    }
    double w = std::exp(lw - max_log);
    z += w;
    m += w * x;
    m2 += w * x * x;
    return true;
  };
  int j0 = static_cast<int>(std::lround((r - prior.grid_point(0)) / prior.grid_step()));
  j0 = std::clamp(j0, 0, n - 1);
  for (int j = j0; j < n && visit(j); ++j) {
  }
  for (int j = j0 - 1; j >= 0 && visit(j); --j) {
  }
  double mean = m / z;
  double var = std::max(m2 / z - mean * mean, 0.0);
  return {mean, gamma * var};
}

void check_precision(double g, const char* name) {
  if (!(g > 0.0) || !std::isfinite(g))
    fail(ErrorKind::invalid_parameter, std::string(name) + " must be positive and finite");
}

}  // namespace

ScalarPosterior prior_posterior(double r, double gamma, const PriorSpec& prior) {
  switch (prior.kind) {
    case PriorKind::gaussian: {
      double c = gamma * prior.tau_x / (gamma * prior.tau_x + 1.0);
      return {c * r, c};
    }
    case PriorKind::bernoulli_gaussian: return bg_posterior(r, gamma, prior.rho, prior.tau_x);
    case PriorKind::grid: return grid_posterior(r, gamma, prior);
  }
  return {0.0, 0.0};
}

ScalarPosterior channel_posterior(double p, double tau1, double y, const ChannelSpec& channel) {
  double gw = 1.0 / channel.tau_w;
  if (channel.kind == ChannelKind::awgn) {
    double denom = tau1 + gw;
    return {(tau1 * p + gw * y) / denom, tau1 / denom};
  }
  double v = 1.0 / tau1;
  double sd = std::sqrt(v + channel.tau_w);
  double c = y * p / sd;
  double lam = inv_mills(c);
  double mean = p + y * v * lam / sd;
  double deriv = 1.0 - (v / (v + channel.tau_w)) * lam * (c + lam);
  return {mean, deriv};
}

DenoiserOutput denoise_prior(const Eigen::VectorXd& r, double gamma1, const PriorSpec& prior) {
  check_precision(gamma1, "gamma1");
  DenoiserOutput out;
  out.value.resize(r.size());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    ScalarPosterior sp = prior_posterior(r(i), gamma1, prior);
    out.value(i) = sp.mean;
    acc += sp.deriv;
  }
  out.divergence = r.size() ? acc / static_cast<double>(r.size()) : 0.0;
  return out;
}

DenoiserOutput denoise_output(const Eigen::VectorXd& p, double tau1, const Eigen::VectorXd& y,
                              const ChannelSpec& channel) {
  check_precision(tau1, "tau1");
  require(p.size() == y.size(), ErrorKind::invalid_dimension, "denoise_output: p and y lengths differ");
  DenoiserOutput out;
  out.value.resize(p.size());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    ScalarPosterior sp = channel_posterior(p(i), tau1, y(i), channel);
    out.value(i) = sp.mean;
    acc += sp.deriv;
  }
  out.divergence = p.size() ? acc / static_cast<double>(p.size()) : 0.0;
  return out;
}

LmmseDenoiser::LmmseDenoiser(const MatrixFactorization& fac, const Eigen::VectorXd& y, double gamma_w)
    : fac_(&fac), gamma_w_(gamma_w) {
  require(y.size() == fac.m, ErrorKind::invalid_dimension, "lmmse: y must have length M");
  check_precision(gamma_w, "gamma_w");
  Eigen::VectorXd uty = fac.u.apply_transpose(y);
  sy_ = Eigen::VectorXd::Zero(fac.n);
  sy_.head(fac.m) = gamma_w * fac.s.cwiseProduct(uty);
  s2_ = fac.s_padded().array().square();
}

DenoiserOutput LmmseDenoiser::operator()(const Eigen::VectorXd& r2, double gamma2) const {
  require(r2.size() == fac_->n, ErrorKind::invalid_dimension, "lmmse: r2 must have length N");
  check_precision(gamma2, "gamma2");
  Eigen::ArrayXd d = (gamma_w_ * s2_.array() + gamma2).inverse();
  Eigen::VectorXd t = fac_->v.apply_transpose(r2);
  Eigen::VectorXd rhs = (d * (sy_.array() + gamma2 * t.array())).matrix();
  DenoiserOutput out;
  out.value = fac_->v.apply(rhs);
  out.divergence = gamma2 * d.sum() / static_cast<double>(fac_->n);
  return out;
}

DenoiserOutput lmmse_denoise(const Eigen::VectorXd& r2, double gamma2, const MatrixFactorization& fac,
                             const Eigen::VectorXd& y, double gamma_w) {
  return LmmseDenoiser(fac, y, gamma_w)(r2, gamma2);
}

JointLmmseOutput joint_lmmse_denoise(const Eigen::VectorXd& r2, const Eigen::VectorXd& p2, double gamma2, double tau2,
                                     const MatrixFactorization& fac) {
  require(r2.size() == fac.n && p2.size() == fac.m, ErrorKind::invalid_dimension,
          "joint_lmmse: r2 must have length N and p2 length M");
  check_precision(gamma2, "gamma2");
  check_precision(tau2, "tau2");
  const Eigen::Index m = fac.m, n = fac.n;
  Eigen::ArrayXd s2 = fac.s_padded().array().square();
  Eigen::ArrayXd d = (tau2 * s2 + gamma2).inverse();
  Eigen::VectorXd utp = fac.u.apply_transpose(p2);
  Eigen::VectorXd b = gamma2 * fac.v.apply_transpose(r2);
  b.head(m).array() += tau2 * fac.s.array() * utp.array();
  Eigen::VectorXd db = (d * b.array()).matrix();
  JointLmmseOutput out;
  out.x_hat = fac.v.apply(db);
  out.z_hat = fac.u.apply(Eigen::VectorXd(fac.s.cwiseProduct(db.head(m))));
  out.alpha2 = (gamma2 * d).sum() / static_cast<double>(n);
  out.beta2 = (tau2 * s2.head(m) * d.head(m)).sum() / static_cast<double>(m);
  return out;
}

double finite_difference_divergence(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                    const Eigen::VectorXd& x, double h) {
  require(h > 0.0, ErrorKind::invalid_parameter, "finite_difference_divergence: h must be > 0");
  if (x.size() == 0) return 0.0;
  double acc = 0.0;
  Eigen::VectorXd xp = x, xm = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp(i) = x(i) + h;
    xm(i) = x(i) - h;
    acc += (f(xp)(i) - f(xm)(i)) / (2.0 * h);
    xp(i) = x(i);
    xm(i) = x(i);
  }
  return acc / static_cast<double>(x.size());
}

}  // namespace mpforge
