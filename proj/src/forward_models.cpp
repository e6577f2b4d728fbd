#include "lsmcmc/forward_models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "lsmcmc/kernels.hpp"

namespace lsmcmc {

// ---------------------------------------------------------------------------
// construction
// ---------------------------------------------------------------------------

LinearForwardOperator LinearForwardOperator::uniform_blur(std::size_t size,
                                                          std::size_t rows,
                                                          std::size_t cols) {
  if (size % 2 == 0)
    throw std::invalid_argument("uniform_blur: kernel size must be odd");
  if (size > std::min(rows, cols))
    throw std::invalid_argument("uniform_blur: kernel larger than image");

  // centered kernel with periodic wraparound; entries sum to 1 so the DC
  // eigenvalue is exactly 1
  ImageGrid kernel(rows, cols, 0.0);
  const double w = 1.0 / static_cast<double>(size * size);
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(size / 2);
  for (std::ptrdiff_t dr = -half; dr <= half; ++dr)
    for (std::ptrdiff_t dc = -half; dc <= half; ++dc) {
      const std::size_t r = static_cast<std::size_t>(
          (dr + static_cast<std::ptrdiff_t>(rows)) %
          static_cast<std::ptrdiff_t>(rows));
      const std::size_t c = static_cast<std::size_t>(
          (dc + static_cast<std::ptrdiff_t>(cols)) %
          static_cast<std::ptrdiff_t>(cols));
      kernel.at(r, c) = w;
    }

  LinearForwardOperator op;
  op.kind_ = Kind::CirculantBlur;
  op.rows_ = rows;
  op.cols_ = cols;
  op.spectrum_ = fft2(kernel);
  op.observed_ = rows * cols;
  return op;
}

LinearForwardOperator LinearForwardOperator::inpainting(
    double fraction_observed, std::size_t rows, std::size_t cols,
    NoiseSource& noise) {
  if (!(fraction_observed > 0.0) || fraction_observed > 1.0)
    throw std::invalid_argument("inpainting: fraction must be in (0,1]");
  const std::size_t d = rows * cols;
  const std::size_t m = static_cast<std::size_t>(
      std::llround(fraction_observed * static_cast<double>(d)));

  // uniform subset without replacement: partial Fisher-Yates
  std::vector<std::size_t> idx(d);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j =
        i + static_cast<std::size_t>(noise.uniform_below(d - i));
    std::swap(idx[i], idx[j]);
  }
  std::vector<std::uint8_t> mask(d, 0);
  for (std::size_t i = 0; i < m; ++i) mask[idx[i]] = 1;
  return inpainting_from_mask(std::move(mask), rows, cols);
}

LinearForwardOperator LinearForwardOperator::inpainting_from_mask(
    std::vector<std::uint8_t> mask, std::size_t rows, std::size_t cols) {
  if (mask.size() != rows * cols)
    throw std::invalid_argument("inpainting: mask size mismatch");
  LinearForwardOperator op;
  op.kind_ = Kind::Inpainting;
  op.rows_ = rows;
  op.cols_ = cols;
  op.mask_ = std::move(mask);
  op.observed_ = static_cast<std::size_t>(
      std::count(op.mask_.begin(), op.mask_.end(), std::uint8_t{1}));
  return op;
}

LinearForwardOperator make_uniform_blur(std::size_t size, std::size_t rows,
                                        std::size_t cols) {
  return LinearForwardOperator::uniform_blur(size, rows, cols);
}

LinearForwardOperator make_inpainting(double fraction_observed,
                                      std::size_t rows, std::size_t cols,
                                      NoiseSource& noise) {
  return LinearForwardOperator::inpainting(fraction_observed, rows, cols,
                                           noise);
}

// ---------------------------------------------------------------------------
// application
// ---------------------------------------------------------------------------

const ComplexSpectrum& LinearForwardOperator::spectrum() const {
  if (kind_ != Kind::CirculantBlur)
    throw std::logic_error("spectrum(): not a circulant operator");
  return spectrum_;
}

const std::vector<std::uint8_t>& LinearForwardOperator::mask() const {
  if (kind_ != Kind::Inpainting)
    throw std::logic_error("mask(): not an inpainting operator");
  return mask_;
}

std::size_t LinearForwardOperator::observed_count() const { return observed_; }

double LinearForwardOperator::operator_norm() const {
  if (kind_ == Kind::Inpainting) return 1.0;
  double m = 0.0;
  for (std::size_t i = 0; i < spectrum_.size(); ++i)
    m = std::max(m, spectrum_.re[i] * spectrum_.re[i] +
                        spectrum_.im[i] * spectrum_.im[i]);
  return std::sqrt(m);
}

namespace {

ImageGrid apply_spectrum(const ImageGrid& x, const ComplexSpectrum& h,
                         bool conjugate) {
  ComplexSpectrum xs = fft2(x);
  ComplexSpectrum prod(x.rows, x.cols);
  kernels::complex_hadamard({xs.re.data(), xs.re.size()},
                            {xs.im.data(), xs.im.size()},
                            {h.re.data(), h.re.size()},
                            {h.im.data(), h.im.size()},
                            {prod.re.data(), prod.re.size()},
                            {prod.im.data(), prod.im.size()}, conjugate);
  return ifft2(prod);
}

ImageGrid apply_mask(const ImageGrid& x, const std::vector<std::uint8_t>& m) {
  ImageGrid out(x.rows, x.cols, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i)
    if (m[i]) out.data[i] = x.data[i];
  return out;
}

}  // namespace

ImageGrid LinearForwardOperator::apply(const ImageGrid& x) const {
  if (x.rows != rows_ || x.cols != cols_)
    throw std::invalid_argument("operator apply: shape mismatch");
  if (kind_ == Kind::CirculantBlur) return apply_spectrum(x, spectrum_, false);
  return apply_mask(x, mask_);
}

ImageGrid LinearForwardOperator::apply_adjoint(const ImageGrid& y) const {
  if (y.rows != rows_ || y.cols != cols_)
    throw std::invalid_argument("operator adjoint: shape mismatch");
  if (kind_ == Kind::CirculantBlur) return apply_spectrum(y, spectrum_, true);
  return apply_mask(y, mask_);
}

// ---------------------------------------------------------------------------
// observation simulation and likelihood terms
// ---------------------------------------------------------------------------

Observation simulate_observation(const ImageGrid& x,
                                 const LinearForwardOperator& op,
                                 double snr_db, NoiseSource& noise) {
  ensure_finite(x, "simulate_observation input");
  if (!std::isfinite(snr_db))
    throw std::invalid_argument("simulate_observation: snr_db must be finite");

  ImageGrid ax = op.apply(x);

  // empirical variance of the noiseless observation over observed pixels
  double s = 0.0, ss = 0.0;
  std::size_t m = 0;
  for (std::size_t i = 0; i < ax.size(); ++i) {
    if (!op.is_observed(i)) continue;
    s += ax.data[i];
    ss += ax.data[i] * ax.data[i];
    ++m;
  }
  const double var =
      ss / static_cast<double>(m) - (s / static_cast<double>(m)) *
                                        (s / static_cast<double>(m));
  if (!(var > 0.0))
    throw std::invalid_argument(
        "simulate_observation: constant observation, SNR undefined");

  Observation obs;
  obs.snr_db = snr_db;
  obs.sigma2 = var / std::pow(10.0, snr_db / 10.0);
  const double sigma = std::sqrt(obs.sigma2);

  ImageGrid eps = noise.normal_field(x.rows, x.cols);
  obs.y = ImageGrid(x.rows, x.cols, 0.0);
  for (std::size_t i = 0; i < ax.size(); ++i)
    if (op.is_observed(i)) obs.y.data[i] = ax.data[i] + sigma * eps.data[i];
  return obs;
}

double likelihood_value(const ImageGrid& x, const Observation& obs,
                        const LinearForwardOperator& op) {
  if (!(obs.sigma2 > 0.0))
    throw std::invalid_argument("likelihood: sigma2 must be > 0");
  ImageGrid ax = op.apply(x);
  double s = 0.0;
  for (std::size_t i = 0; i < ax.size(); ++i) {
    if (!op.is_observed(i)) continue;
    const double r = obs.y.data[i] - ax.data[i];
    s += r * r;
  }
  return s / (2.0 * obs.sigma2);
}

ImageGrid likelihood_grad(const ImageGrid& x, const Observation& obs,
                          const LinearForwardOperator& op) {
  if (!(obs.sigma2 > 0.0))
    throw std::invalid_argument("likelihood: sigma2 must be > 0");
  ImageGrid ax = op.apply(x);
  ImageGrid resid(x.rows, x.cols, 0.0);
  for (std::size_t i = 0; i < ax.size(); ++i)
    if (op.is_observed(i)) resid.data[i] = ax.data[i] - obs.y.data[i];
  ImageGrid g = op.apply_adjoint(resid);
  const double inv = 1.0 / obs.sigma2;
  for (double& v : g.data) v *= inv;
  return g;
}

double likelihood_lipschitz(const Observation& obs,
                            const LinearForwardOperator& op) {
  const double nrm = op.operator_norm();
  return nrm * nrm / obs.sigma2;
}

// ---------------------------------------------------------------------------
// exact Gaussian conditional x | y, z, rho^2
// ---------------------------------------------------------------------------

ImageGrid conditional_mean(const ImageGrid& z, const Observation& obs,
                           const LinearForwardOperator& op, double rho2) {
  if (!(rho2 > 0.0))
    throw std::invalid_argument("conditional_mean: rho2 must be > 0");
  const double inv_s2 = 1.0 / obs.sigma2;
  const double inv_r2 = 1.0 / rho2;

  if (op.kind() == LinearForwardOperator::Kind::Inpainting) {
    const auto& m = op.mask();
    ImageGrid mu(z.rows, z.cols);
    const double denom = inv_s2 + inv_r2;
    for (std::size_t i = 0; i < z.size(); ++i)
      mu.data[i] = m[i]
                       ? (obs.y.data[i] * inv_s2 + z.data[i] * inv_r2) / denom
                       : z.data[i];
    return mu;
  }

  const ComplexSpectrum& h = op.spectrum();
  ComplexSpectrum yhat = fft2(obs.y);
  ComplexSpectrum zhat = fft2(z);
  ComplexSpectrum mhat(z.rows, z.cols);
  kernels::spectral_conditional_solve(
      {h.re.data(), h.re.size()}, {h.im.data(), h.im.size()},
      {yhat.re.data(), yhat.re.size()}, {yhat.im.data(), yhat.im.size()},
      {zhat.re.data(), zhat.re.size()}, {zhat.im.data(), zhat.im.size()},
      inv_s2, inv_r2, {mhat.re.data(), mhat.re.size()},
      {mhat.im.data(), mhat.im.size()});
  return ifft2(mhat);
}

ImageGrid conditional_sample_with_fields(const ImageGrid& z,
                                         const Observation& obs,
                                         const LinearForwardOperator& op,
                                         double rho2, const ImageGrid& eps_y,
                                         const ImageGrid& eps_z) {
  // perturbation-optimization: the conditional mean of the perturbed data is
  // an exact draw from N(mu, Q^{-1})
  const double sigma = std::sqrt(obs.sigma2);
  const double rho = std::sqrt(rho2);
  Observation perturbed;
  perturbed.sigma2 = obs.sigma2;
  perturbed.snr_db = obs.snr_db;
  perturbed.y = ImageGrid(z.rows, z.cols, 0.0);
  for (std::size_t i = 0; i < z.size(); ++i)
    if (op.is_observed(i))
      perturbed.y.data[i] = obs.y.data[i] + sigma * eps_y.data[i];
  ImageGrid zt(z.rows, z.cols);
  kernels::lincomb2(zt.span(), 1.0, z.span(), rho, eps_z.span());
  return conditional_mean(zt, perturbed, op, rho2);
}

ImageGrid conditional_sample(const ImageGrid& z, const Observation& obs,
                             const LinearForwardOperator& op, double rho2,
                             NoiseSource& noise) {
  if (!(rho2 > 0.0))
    throw std::invalid_argument("conditional_sample: rho2 must be > 0");
  ImageGrid eps_y = noise.normal_field(z.rows, z.cols);
  ImageGrid eps_z = noise.normal_field(z.rows, z.cols);
  return conditional_sample_with_fields(z, obs, op, rho2, eps_y, eps_z);
}

double conditional_trace_cov(const Observation& obs,
                             const LinearForwardOperator& op, double rho2) {
  if (!(rho2 > 0.0))
    throw std::invalid_argument("conditional_trace_cov: rho2 must be > 0");
  const double inv_s2 = 1.0 / obs.sigma2;
  const double inv_r2 = 1.0 / rho2;
  if (op.kind() == LinearForwardOperator::Kind::Inpainting) {
    const double d = static_cast<double>(op.pixel_count());
    const double m = static_cast<double>(op.observed_count());
    return m / (inv_s2 + inv_r2) + (d - m) * rho2;
  }
  const ComplexSpectrum& h = op.spectrum();
  double tr = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double mag2 = h.re[i] * h.re[i] + h.im[i] * h.im[i];
    tr += 1.0 / (mag2 * inv_s2 + inv_r2);
  }
  return tr;
}

}  // namespace lsmcmc
