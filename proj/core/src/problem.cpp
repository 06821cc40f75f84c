#include "mpforge/problem.hpp"

#include <cmath>

#include "mpforge/error.hpp"
#include "mpforge/rng.hpp"

namespace mpforge {

void ModelSpec::validate() const {
  prior.validate();
  channel.validate();
  law.validate();
  if (!(delta > 0.0 && delta <= 1.0))
    fail(ErrorKind::invalid_config, "delta must lie in (0, 1]", "model.delta");
}

Eigen::Index ModelSpec::rows_for(Eigen::Index n) const {
  auto m = static_cast<Eigen::Index>(std::llround(delta * static_cast<double>(n)));
  return std::max<Eigen::Index>(1, std::min(m, n));
}

Eigen::VectorXd ProblemInstance::apply(const Eigen::VectorXd& x) const {
  if (dense) return (*dense) * x;
  return mpforge::apply(fac, x);
}

Eigen::VectorXd ProblemInstance::apply_transpose(const Eigen::VectorXd& yv) const {
  if (dense) return dense->transpose() * yv;
  return mpforge::apply_transpose(fac, yv);
}

namespace {

Eigen::VectorXd observe(const ChannelSpec& channel, const Eigen::VectorXd& z0, const Eigen::VectorXd& w) {
  Eigen::VectorXd y(z0.size());
  for (Eigen::Index i = 0; i < z0.size(); ++i) y(i) = channel.observe(z0(i), w(i));
  return y;
}

Eigen::VectorXd sample_signal(const PriorSpec& prior, Eigen::Index n, Rng& rng) {
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = prior.sample(rng);
  return x;
}

}  // namespace

ProblemInstance make_instance(MatrixFactorization fac, Eigen::VectorXd x0, Eigen::VectorXd w,
                              const ChannelSpec& channel) {
  require(x0.size() == fac.n && w.size() == fac.m, ErrorKind::invalid_dimension,
          "make_instance: x0 must have length N and w length M");
  ProblemInstance inst;
  inst.z0 = mpforge::apply(fac, x0);
  inst.y = observe(channel, inst.z0, w);
  inst.fac = std::move(fac);
  inst.x0 = std::move(x0);
  inst.w = std::move(w);
  inst.channel = channel;
  return inst;
}

ProblemInstance sample_instance(const ModelSpec& model, Eigen::Index n, std::uint64_t seed, std::size_t trial) {
  model.validate();
  Eigen::Index m = model.rows_for(n);
  Rng rm = Rng::stream(seed, trial_stream_name(trial, "matrix"));
  Rng rx = Rng::stream(seed, trial_stream_name(trial, "signal"));
  Rng rw = Rng::stream(seed, trial_stream_name(trial, "noise"));
  MatrixFactorization fac = sample_rri_matrix(m, n, model.law, model.mode, rm);
  Eigen::VectorXd x0 = sample_signal(model.prior, n, rx);
  Eigen::VectorXd w = rw.normal_vector(m, std::sqrt(model.channel.tau_w));
  return make_instance(std::move(fac), std::move(x0), std::move(w), model.channel);
}

ProblemInstance sample_iid_gaussian_instance(const ModelSpec& model, Eigen::Index n, std::uint64_t seed,
                                             std::size_t trial) {
  model.validate();
  Eigen::Index m = model.rows_for(n);
  Rng rm = Rng::stream(seed, trial_stream_name(trial, "matrix"));
  Rng rx = Rng::stream(seed, trial_stream_name(trial, "signal"));
  Rng rw = Rng::stream(seed, trial_stream_name(trial, "noise"));
  Eigen::MatrixXd a(m, n);
  rm.fill_normal(a.data(), static_cast<std::size_t>(a.size()), 1.0 / std::sqrt(static_cast<double>(m)));
  ProblemInstance inst;
  inst.x0 = sample_signal(model.prior, n, rx);
  inst.w = rw.normal_vector(m, std::sqrt(model.channel.tau_w));
  inst.z0 = a * inst.x0;
  inst.y = observe(model.channel, inst.z0, inst.w);
  inst.dense = std::move(a);
  inst.channel = model.channel;
  return inst;
}

}  // namespace mpforge
