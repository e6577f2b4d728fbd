#include "lsmcmc/diagnostics.hpp"

#include <cmath>
#include <stdexcept>

#include "lsmcmc/kernels.hpp"

namespace lsmcmc {

// ---------------------------------------------------------------------------
// RunningStats
// ---------------------------------------------------------------------------

void RunningStats::update(const ImageGrid& x) {
  if (count == 0) {
    mean = ImageGrid(x.rows, x.cols, 0.0);
    m2 = ImageGrid(x.rows, x.cols, 0.0);
  } else if (!mean.same_shape(x)) {
    throw std::invalid_argument("RunningStats: shape mismatch");
  }
  ++count;
  const double inv = 1.0 / static_cast<double>(count);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x.data[i] - mean.data[i];
    mean.data[i] += d * inv;
    m2.data[i] += d * (x.data[i] - mean.data[i]);
  }
}

void RunningStats::merge(const RunningStats& other) {
  if (other.count == 0) return;
  if (count == 0) {
    *this = other;
    return;
  }
  if (!mean.same_shape(other.mean))
    throw std::invalid_argument("RunningStats::merge: shape mismatch");
  const double na = static_cast<double>(count);
  const double nb = static_cast<double>(other.count);
  const double n = na + nb;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double d = other.mean.data[i] - mean.data[i];
    mean.data[i] += d * nb / n;
    m2.data[i] += other.m2.data[i] + d * d * na * nb / n;
  }
  count += other.count;
}

ImageGrid RunningStats::variance() const {
  if (count < 2) throw std::logic_error("RunningStats: need count >= 2");
  ImageGrid v(mean.rows, mean.cols);
  const double inv = 1.0 / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < v.size(); ++i) v.data[i] = m2.data[i] * inv;
  return v;
}

ImageGrid RunningStats::stddev() const {
  ImageGrid v = variance();
  for (double& x : v.data) x = std::sqrt(x);
  return v;
}

// ---------------------------------------------------------------------------
// scalar diagnostics
// ---------------------------------------------------------------------------

double mse(const ImageGrid& estimate, const ImageGrid& truth) {
  if (!estimate.same_shape(truth))
    throw std::invalid_argument("mse: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    const double d = estimate.data[i] - truth.data[i];
    s += d * d;
  }
  return s / static_cast<double>(estimate.size());
}

namespace {

double series_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// lag-k autocovariance about the mean, biased normalisation 1/N
double autocov(const std::vector<double>& v, double m, std::size_t k) {
  double s = 0.0;
  for (std::size_t t = 0; t + k < v.size(); ++t)
    s += (v[t] - m) * (v[t + k] - m);
  return s / static_cast<double>(v.size());
}

}  // namespace

std::vector<double> acf(const ScalarSeries& series, std::size_t max_lag) {
  const auto& v = series.values;
  if (v.size() <= max_lag)
    throw std::invalid_argument("acf: series shorter than max_lag");
  const double m = series_mean(v);
  const double c0 = autocov(v, m, 0);
  if (!(c0 > 0.0)) throw std::invalid_argument("acf: zero-variance series");
  std::vector<double> rho(max_lag + 1);
  rho[0] = 1.0;
  for (std::size_t k = 1; k <= max_lag; ++k) rho[k] = autocov(v, m, k) / c0;
  return rho;
}

double ess(const ScalarSeries& series) {
  const auto& v = series.values;
  if (v.size() < 2) throw std::invalid_argument("ess: series too short");
  const double m = series_mean(v);
  const double c0 = autocov(v, m, 0);
  if (!(c0 > 0.0)) throw std::invalid_argument("ess: zero-variance series");
  // truncate at the first lag whose autocorrelation falls below 0.05
  double acc = 0.0;
  for (std::size_t k = 1; k < v.size(); ++k) {
    const double rho = autocov(v, m, k) / c0;
    if (rho < 0.05) break;
    acc += rho;
  }
  return static_cast<double>(v.size()) / (1.0 + 2.0 * acc);
}

SlowestComponent slowest_component(const std::vector<ImageGrid>& samples) {
  if (samples.size() < 2)
    throw std::invalid_argument("slowest_component: need at least 2 samples");
  const std::size_t n = samples.size();
  const std::size_t d = samples[0].size();

  ImageGrid mean_g(samples[0].rows, samples[0].cols, 0.0);
  for (const auto& s : samples)
    for (std::size_t i = 0; i < d; ++i) mean_g.data[i] += s.data[i];
  for (double& x : mean_g.data) x /= static_cast<double>(n);

  std::vector<ImageGrid> centered;
  centered.reserve(n);
  for (const auto& s : samples) {
    ImageGrid c(s.rows, s.cols);
    kernels::lincomb2(c.span(), 1.0, s.span(), -1.0, mean_g.span());
    centered.push_back(std::move(c));
  }

  // deterministic start: first centered sample, else the constant vector
  ImageGrid v = centered[0];
  double nrm = std::sqrt(kernels::sum_squares(v.span()));
  if (!(nrm > 0.0)) {
    v = ImageGrid(v.rows, v.cols, 1.0);
    nrm = std::sqrt(kernels::sum_squares(v.span()));
  }
  for (double& x : v.data) x /= nrm;

  // covariance-vector products via centered dot products
  const double inv_n1 = 1.0 / static_cast<double>(n - 1);
  ImageGrid cv(v.rows, v.cols);
  double eig = 0.0;
  for (int it = 0; it < 50; ++it) {
    for (double& x : cv.data) x = 0.0;
    for (const auto& c : centered) {
      const double proj = kernels::dot(c.span(), v.span());
      for (std::size_t i = 0; i < d; ++i) cv.data[i] += proj * c.data[i];
    }
    for (double& x : cv.data) x *= inv_n1;
    const double new_eig = kernels::dot(v.span(), cv.span());
    const double cvn = std::sqrt(kernels::sum_squares(cv.span()));
    if (!(cvn > 0.0))
      throw std::invalid_argument("slowest_component: degenerate sample set");
    for (std::size_t i = 0; i < d; ++i) v.data[i] = cv.data[i] / cvn;
    if (it > 0 && std::abs(new_eig - eig) <= 1e-8 * std::abs(new_eig)) {
      eig = new_eig;
      break;
    }
    eig = new_eig;
  }

  SlowestComponent out;
  out.eigenvector = v;
  out.projections.name = "slowest_component";
  out.projections.values.reserve(n);
  for (const auto& c : centered)
    out.projections.values.push_back(kernels::dot(c.span(), v.span()));
  // Rayleigh identity: the projection variance is the quotient at v
  double var = 0.0;
  for (double p : out.projections.values) var += p * p;
  out.eigenvalue = var * inv_n1;
  return out;
}

double log_posterior(const ImageGrid& x, const Observation& obs,
                     const LinearForwardOperator& op, double theta) {
  return -likelihood_value(x, obs, op) - theta * tv(x);
}

MapResult map_estimate(const Observation& obs, const LinearForwardOperator& op,
                       double theta, int iters, double tol) {
  if (iters < 1) throw std::invalid_argument("map_estimate: iters >= 1");
  const double lf = likelihood_lipschitz(obs, op);
  MapResult res;
  res.x = op.apply_adjoint(obs.y);

  auto objective = [&](const ImageGrid& x) {
    return likelihood_value(x, obs, op) + theta * tv(x);
  };
  double obj = objective(res.x);
  res.objective.push_back(obj);

  ImageGrid step(res.x.rows, res.x.cols);
  for (int it = 0; it < iters; ++it) {
    ImageGrid g = likelihood_grad(res.x, obs, op);
    kernels::lincomb2(step.span(), 1.0, res.x.span(), -1.0 / lf, g.span());
    res.x = theta > 0.0 ? prox_tv(step, theta / lf) : step;
    const double next = objective(res.x);
    res.objective.push_back(next);
    res.iterations = it + 1;
    if (next > obj + 1e-10 * (1.0 + std::abs(obj)))
      throw std::runtime_error("map_estimate: objective increased");
    const double rel = std::abs(next - obj) / (1.0 + std::abs(obj));
    obj = next;
    if (rel < tol) break;
  }
  return res;
}

// ---------------------------------------------------------------------------
// observers
// ---------------------------------------------------------------------------

PosteriorMeanObserver::PosteriorMeanObserver(const Observation& obs,
                                             const LinearForwardOperator& op,
                                             double rho2, bool rao_blackwell)
    : obs_(obs), op_(op), rho2_(rho2), rb_(rao_blackwell) {}

void PosteriorMeanObserver::operator()(const SampleEvent& ev) {
  const bool latent = ev.kernel && ev.kernel->latent();
  ImageGrid contrib;
  if (latent && rb_) {
    contrib = conditional_mean(*ev.state, obs_, op_, rho2_);
  } else if (latent) {
    contrib = *ev.x_grad;  // SGS draw / recorded conditional mean
  } else {
    contrib = *ev.state;
  }
  if (count_ == 0) mean_ = ImageGrid(contrib.rows, contrib.cols, 0.0);
  ++count_;
  const double w = 1.0 / static_cast<double>(count_);
  kernels::lincomb2(mean_.span(), 1.0 - w, mean_.span(), w, contrib.span());
}

MultiscaleStdObserver::MultiscaleStdObserver(const Observation& obs,
                                             const LinearForwardOperator& op,
                                             double rho2, NoiseSource noise,
                                             std::vector<std::size_t> factors)
    : obs_(obs),
      op_(op),
      rho2_(rho2),
      noise_(noise),
      factors_(std::move(factors)),
      stats_(factors_.size()) {}

void MultiscaleStdObserver::operator()(const SampleEvent& ev) {
  const bool latent = ev.kernel && ev.kernel->latent();
  ImageGrid x;
  if (latent) {
    // exact x | y, Z_i draw so the maps quantify x-space uncertainty
    x = conditional_sample(*ev.state, obs_, op_, rho2_, noise_);
  } else {
    x = *ev.state;
  }
  for (std::size_t i = 0; i < factors_.size(); ++i)
    stats_[i].update(downsample_by_averaging(x, factors_[i]));
}

ImageGrid MultiscaleStdObserver::std_map(std::size_t factor) const {
  for (std::size_t i = 0; i < factors_.size(); ++i)
    if (factors_[i] == factor) return stats_[i].stddev();
  throw std::invalid_argument("std_map: factor not tracked");
}

ScalarTraceObserver::ScalarTraceObserver(
    std::string name, double grad_evals_per_entry,
    std::function<double(const SampleEvent&)> fn)
    : fn_(std::move(fn)) {
  series_.name = std::move(name);
  series_.grad_evals_per_entry = grad_evals_per_entry;
}

void ScalarTraceObserver::operator()(const SampleEvent& ev) {
  series_.values.push_back(fn_(ev));
}

SampleWindowObserver::SampleWindowObserver(std::size_t capacity)
    : capacity_(capacity) {}

void SampleWindowObserver::operator()(const SampleEvent& ev) {
  const bool latent = ev.kernel && ev.kernel->latent();
  const ImageGrid& x = latent ? *ev.x_grad : *ev.state;
  if (samples_.size() == capacity_ && capacity_ > 0)
    samples_.erase(samples_.begin());
  samples_.push_back(x);
}

}  // namespace lsmcmc
