#include "lsmcmc/samplers.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "lsmcmc/kernels.hpp"

namespace lsmcmc {

// ---------------------------------------------------------------------------
// Chebyshev machinery
// ---------------------------------------------------------------------------

ChebyshevCoeffs chebyshev_coeffs(int s, double eta) {
  if (s < 2) throw std::invalid_argument("chebyshev_coeffs: s must be >= 2");
  ChebyshevCoeffs c;
  c.s = s;
  c.eta = eta;
  c.l_s = (s - 0.5) * (s - 0.5) * (2.0 - 4.0 * eta / 3.0) - 1.5;
  c.omega0 = 1.0 + eta / (static_cast<double>(s) * s);

  // T_j(omega0) and T_j'(omega0) by the three-term recursions
  std::vector<double> T(static_cast<std::size_t>(s) + 1);
  std::vector<double> Td(static_cast<std::size_t>(s) + 1);
  T[0] = 1.0;
  T[1] = c.omega0;
  Td[0] = 0.0;
  Td[1] = 1.0;
  for (int j = 2; j <= s; ++j) {
    T[j] = 2.0 * c.omega0 * T[j - 1] - T[j - 2];
    Td[j] = 2.0 * T[j - 1] + 2.0 * c.omega0 * Td[j - 1] - Td[j - 2];
  }
  c.omega1 = T[s] / Td[s];

  c.mu1 = c.omega1 / c.omega0;
  c.nu1 = s * c.omega1 / 2.0;
  c.k1 = s * c.omega1 / c.omega0;
  for (int j = 2; j <= s; ++j) {
    c.mu.push_back(2.0 * c.omega1 * T[j - 1] / T[j]);
    c.nu.push_back(2.0 * c.omega0 * T[j - 1] / T[j]);
    c.k.push_back(1.0 - c.nu.back());
  }
  return c;
}

LipschitzInfo lipschitz_info(double L_f, double lambda, double rho2) {
  LipschitzInfo info;
  info.L_f = L_f;
  info.L = 1.0 / lambda + L_f;
  info.L_a = 1.0 / lambda + 1.0 / (rho2 + 1.0 / L_f);
  return info;
}

double stepsize_myula(double L) {
  if (!(L > 0.0)) throw std::invalid_argument("stepsize_myula: L must be > 0");
  return 1.0 / L;
}

double stepsize_skrock(const ChebyshevCoeffs& coeffs, double lipschitz,
                       double frac) {
  if (!(lipschitz > 0.0))
    throw std::invalid_argument("stepsize_skrock: Lipschitz must be > 0");
  if (!(frac > 0.0) || frac > 1.0)
    throw std::invalid_argument("stepsize_skrock: frac must be in (0,1]");
  return frac * coeffs.l_s / lipschitz;
}

// ---------------------------------------------------------------------------
// single steps
// ---------------------------------------------------------------------------

ImageGrid myula_step(const ImageGrid& x, const GradLogPi& grad_logpi,
                     double delta, NoiseSource& noise) {
  if (!(delta > 0.0)) throw std::invalid_argument("myula_step: delta <= 0");
  ImageGrid g = grad_logpi(x);
  ensure_finite(g, "myula_step gradient");
  ImageGrid zeta = noise.normal_field(x.rows, x.cols);
  ImageGrid out(x.rows, x.cols);
  kernels::lincomb3(out.span(), 1.0, x.span(), delta, g.span(),
                    std::sqrt(2.0 * delta), zeta.span());
  return out;
}

namespace {

// Shared SK-ROCK recursion; first_noise_coeff is k1 except when reproducing
// the literal latent-space variant.
ImageGrid skrock_core(const ImageGrid& x, const GradLogPi& grad_logpi,
                      const ChebyshevCoeffs& c, double delta,
                      NoiseSource& noise, double first_noise_coeff) {
  ImageGrid xi = noise.normal_field(x.rows, x.cols);
  const double xi_scale = std::sqrt(2.0 * delta);  // xi ~ N(0, 2 delta I)
  for (double& v : xi.data) v *= xi_scale;

  // stage 1 at the extrapolated point x + nu1 * xi
  ImageGrid extrap(x.rows, x.cols);
  kernels::lincomb2(extrap.span(), 1.0, x.span(), c.nu1, xi.span());
  ImageGrid g = grad_logpi(extrap);
  ensure_finite(g, "skrock stage gradient");
  ImageGrid prev = x;  // X_{j-2}
  ImageGrid cur(x.rows, x.cols);
  kernels::lincomb3(cur.span(), 1.0, x.span(), c.mu1 * delta, g.span(),
                    first_noise_coeff, xi.span());

  ImageGrid next(x.rows, x.cols);
  for (int j = 2; j <= c.s; ++j) {
    const std::size_t i = static_cast<std::size_t>(j - 2);
    g = grad_logpi(cur);
    ensure_finite(g, "skrock stage gradient");
    kernels::lincomb3(next.span(), c.mu[i] * delta, g.span(), c.nu[i],
                      cur.span(), c.k[i], prev.span());
    std::swap(prev, cur);
    std::swap(cur, next);
  }
  return cur;
}

}  // namespace

ImageGrid skrock_step(const ImageGrid& x, const GradLogPi& grad_logpi,
                      const ChebyshevCoeffs& coeffs, double delta,
                      NoiseSource& noise) {
  if (!(delta > 0.0)) throw std::invalid_argument("skrock_step: delta <= 0");
  return skrock_core(x, grad_logpi, coeffs, delta, noise, coeffs.k1);
}

namespace {

// Latent drift Lambda(z) = envelope_grad(z) + (z - E[x|y,z]) / rho2, with the
// conditional mean recorded for the caller.
ImageGrid latent_drift(const ImageGrid& z, const Observation& obs,
                       const LinearForwardOperator& op, const Prior& prior,
                       const ModelParams& params, ImageGrid* x_grad_out) {
  ImageGrid mu = conditional_mean(z, obs, op, params.rho2);
  ImageGrid env = envelope_grad(prior, z, params.prior_descriptor());
  ImageGrid drift(z.rows, z.cols);
  const double inv_r2 = 1.0 / params.rho2;
  kernels::lincomb3(drift.span(), 1.0, env.span(), inv_r2, z.span(), -inv_r2,
                    mu.span());
  if (x_grad_out) *x_grad_out = std::move(mu);
  return drift;
}

void latent_langevin_update(ImageGrid& z, const ImageGrid& drift, double delta,
                            NoiseSource& langevin) {
  ImageGrid zeta = langevin.normal_field(z.rows, z.cols);
  ImageGrid out(z.rows, z.cols);
  kernels::lincomb3(out.span(), 1.0, z.span(), -delta, drift.span(),
                    std::sqrt(2.0 * delta), zeta.span());
  z = std::move(out);
}

}  // namespace

void sgs_step(ChainState& state, const Observation& obs,
              const LinearForwardOperator& op, const Prior& prior,
              const ModelParams& params, double delta, NoiseSource& langevin,
              NoiseSource& conditional, bool pin_conditional_noise) {
  if (!(params.rho2 > 0.0)) throw std::invalid_argument("sgs_step: rho2 <= 0");
  ImageGrid x =
      pin_conditional_noise
          ? conditional_mean(state.z, obs, op, params.rho2)
          : conditional_sample(state.z, obs, op, params.rho2, conditional);
  ImageGrid env = envelope_grad(prior, state.z, params.prior_descriptor());
  ImageGrid drift(state.z.rows, state.z.cols);
  const double inv_r2 = 1.0 / params.rho2;
  kernels::lincomb3(drift.span(), 1.0, env.span(), inv_r2, state.z.span(),
                    -inv_r2, x.span());
  latent_langevin_update(state.z, drift, delta, langevin);
  ensure_finite(state.z, "sgs_step iterate");
  state.x_grad = std::move(x);  // the draw doubles as the x-space sample
  ++state.iter;
}

void ls_myula_step(ChainState& state, const Observation& obs,
                   const LinearForwardOperator& op, const Prior& prior,
                   const ModelParams& params, double delta,
                   NoiseSource& langevin) {
  if (!(params.rho2 > 0.0))
    throw std::invalid_argument("ls_myula_step: rho2 <= 0");
  ImageGrid drift =
      latent_drift(state.z, obs, op, prior, params, &state.x_grad);
  latent_langevin_update(state.z, drift, delta, langevin);
  ensure_finite(state.z, "ls_myula_step iterate");
  ++state.iter;
}

void ls_skrock_step(ChainState& state, const Observation& obs,
                    const LinearForwardOperator& op, const Prior& prior,
                    const ModelParams& params, const ChebyshevCoeffs& coeffs,
                    double delta, NoiseSource& langevin,
                    bool literal_first_stage_noise) {
  if (!(params.rho2 > 0.0))
    throw std::invalid_argument("ls_skrock_step: rho2 <= 0");
  ImageGrid last_mean;
  GradLogPi neg_drift = [&](const ImageGrid& z) {
    ImageGrid drift = latent_drift(z, obs, op, prior, params, &last_mean);
    for (double& v : drift.data) v = -v;
    return drift;
  };
  const double first_coeff =
      literal_first_stage_noise ? coeffs.k1 * coeffs.k1 : coeffs.k1;
  state.z = skrock_core(state.z, neg_drift, coeffs, delta, langevin,
                        first_coeff);
  ensure_finite(state.z, "ls_skrock_step iterate");
  state.x_grad = std::move(last_mean);
  ++state.iter;
}

// ---------------------------------------------------------------------------
// kernels and driver
// ---------------------------------------------------------------------------

MyulaKernel::MyulaKernel(ImageGrid init, GradLogPi grad, double delta,
                         NoiseSource noise)
    : x_(std::move(init)),
      grad_(std::move(grad)),
      delta_(delta),
      noise_(noise) {}

void MyulaKernel::step() {
  x_ = myula_step(x_, grad_, delta_, noise_);
  ++evals_;
}

SkrockKernel::SkrockKernel(ImageGrid init, GradLogPi grad,
                           ChebyshevCoeffs coeffs, double delta,
                           NoiseSource noise)
    : x_(std::move(init)),
      grad_(std::move(grad)),
      coeffs_(std::move(coeffs)),
      delta_(delta),
      noise_(noise) {}

void SkrockKernel::step() {
  x_ = skrock_step(x_, grad_, coeffs_, delta_, noise_);
  evals_ += coeffs_.s;
}

SgsKernel::SgsKernel(ImageGrid init, const Observation& obs,
                     const LinearForwardOperator& op, const Prior& prior,
                     ModelParams params, double delta, NoiseSource langevin,
                     NoiseSource conditional, bool pin_conditional_noise)
    : state_{init, init, 0},
      obs_(obs),
      op_(op),
      prior_(prior),
      params_(params),
      delta_(delta),
      langevin_(langevin),
      conditional_(conditional),
      pin_(pin_conditional_noise) {}

void SgsKernel::step() {
  sgs_step(state_, obs_, op_, prior_, params_, delta_, langevin_, conditional_,
           pin_);
  ++evals_;
}

LsMyulaKernel::LsMyulaKernel(ImageGrid init, const Observation& obs,
                             const LinearForwardOperator& op,
                             const Prior& prior, ModelParams params,
                             double delta, NoiseSource langevin)
    : state_{init, init, 0},
      obs_(obs),
      op_(op),
      prior_(prior),
      params_(params),
      delta_(delta),
      langevin_(langevin) {}

void LsMyulaKernel::step() {
  ls_myula_step(state_, obs_, op_, prior_, params_, delta_, langevin_);
  ++evals_;
}

LsSkrockKernel::LsSkrockKernel(ImageGrid init, const Observation& obs,
                               const LinearForwardOperator& op,
                               const Prior& prior, ModelParams params,
                               ChebyshevCoeffs coeffs, double delta,
                               NoiseSource langevin,
                               bool literal_first_stage_noise)
    : state_{init, init, 0},
      obs_(obs),
      op_(op),
      prior_(prior),
      params_(params),
      coeffs_(std::move(coeffs)),
      delta_(delta),
      langevin_(langevin),
      literal_(literal_first_stage_noise) {}

void LsSkrockKernel::step() {
  ls_skrock_step(state_, obs_, op_, prior_, params_, coeffs_, delta_,
                 langevin_, literal_);
  evals_ += coeffs_.s;
}

ChainRunResult run_chain(SamplerKernel& kernel, long n_iters, long burn_in,
                         long thinning,
                         const std::vector<ChainObserver>& observers) {
  if (burn_in < 0 || n_iters <= burn_in)
    throw std::invalid_argument("run_chain: need n_iters > burn_in >= 0");
  if (thinning < 1) throw std::invalid_argument("run_chain: thinning >= 1");

  ChainRunResult result;
  for (long iter = 1; iter <= n_iters; ++iter) {
    kernel.step();
    result.iterations = iter;
    if (iter <= burn_in || (iter - burn_in - 1) % thinning != 0) continue;
    ++result.retained;
    SampleEvent ev;
    ev.iter = iter;
    ev.kernel = &kernel;
    ev.state = &kernel.state();
    ev.x_grad = kernel.x_grad();
    for (std::size_t i = 0; i < observers.size(); ++i) {
      try {
        observers[i](ev);
      } catch (const std::exception& e) {
        throw std::runtime_error("run_chain: observer " + std::to_string(i) +
                                 " failed at iteration " +
                                 std::to_string(iter) + ": " + e.what());
      }
    }
  }
  result.grad_evals = kernel.grad_evals();
  return result;
}

}  // namespace lsmcmc
