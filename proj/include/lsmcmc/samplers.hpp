#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lsmcmc/forward_models.hpp"
#include "lsmcmc/grid.hpp"
#include "lsmcmc/priors.hpp"

namespace lsmcmc {

/// Stage coefficients of the stochastic Runge-Kutta-Chebyshev integrator.
/// T is the first-kind Chebyshev polynomial, evaluated by the three-term
/// recursion; derivatives by the derivative recursion.
struct ChebyshevCoeffs {
  int s = 0;
  double eta = 0.05;
  double l_s = 0.0;
  double omega0 = 0.0;
  double omega1 = 0.0;
  double mu1 = 0.0, nu1 = 0.0, k1 = 0.0;
  // stage j in 2..s lives at index j-2
  std::vector<double> mu, nu, k;
};

ChebyshevCoeffs chebyshev_coeffs(int s, double eta = 0.05);

/// Gradient Lipschitz constants of the smoothed targets:
/// canonical L = 1/lambda + L_f, latent L_a = 1/lambda + 1/(rho2 + 1/L_f).
struct LipschitzInfo {
  double L_f = 0.0;
  double L = 0.0;
  double L_a = 0.0;
};

LipschitzInfo lipschitz_info(double L_f, double lambda, double rho2);

/// Model hyperparameters shared by the samplers and the calibration loop.
struct ModelParams {
  double theta = 0.0;
  double rho2 = 0.0;
  double lambda = 0.0;
  double sigma2 = 0.0;
  double L_f = 0.0;

  double L() const { return 1.0 / lambda + L_f; }
  double L_a() const { return 1.0 / lambda + 1.0 / (rho2 + 1.0 / L_f); }
  PriorDescriptor prior_descriptor() const { return {theta, 1.0, lambda}; }
};

double stepsize_myula(double L);
double stepsize_skrock(const ChebyshevCoeffs& coeffs, double lipschitz,
                       double frac = 1.0);

using GradLogPi = std::function<ImageGrid(const ImageGrid&)>;

/// One Euler-Maruyama step x + delta * grad_logpi(x) + sqrt(2 delta) * noise.
ImageGrid myula_step(const ImageGrid& x, const GradLogPi& grad_logpi,
                     double delta, NoiseSource& noise);

/// One SK-ROCK step: s chained gradient evaluations, first stage at the
/// extrapolated point x + nu1 * xi with noise injection k1 * xi.
ImageGrid skrock_step(const ImageGrid& x, const GradLogPi& grad_logpi,
                      const ChebyshevCoeffs& coeffs, double delta,
                      NoiseSource& noise);

/// Latent chain state: z iterate plus the last conditional mean for the
/// latent-space kernels.
struct ChainState {
  ImageGrid z;
  ImageGrid x_grad;
  long iter = 0;
};

/// SGS: exact conditional draw of x followed by a Langevin step of z.
/// pin_conditional_noise substitutes the conditional mean for the draw,
/// which reduces the kernel to ls-MYULA at matched streams.
void sgs_step(ChainState& state, const Observation& obs,
              const LinearForwardOperator& op, const Prior& prior,
              const ModelParams& params, double delta, NoiseSource& langevin,
              NoiseSource& conditional, bool pin_conditional_noise = false);

/// ls-MYULA: Langevin step of z against the exact latent drift
/// envelope_grad(z) + (z - E[x|y,z]) / rho2.
void ls_myula_step(ChainState& state, const Observation& obs,
                   const LinearForwardOperator& op, const Prior& prior,
                   const ModelParams& params, double delta,
                   NoiseSource& langevin);

/// ls-SK-ROCK: SK-ROCK recursion on the latent drift; a conditional mean is
/// computed at every stage and the last one is kept as x_grad.
/// literal_first_stage_noise reproduces the k1^2 coefficient printed in the
/// source recursion instead of the k1 used by the canonical scheme.
void ls_skrock_step(ChainState& state, const Observation& obs,
                    const LinearForwardOperator& op, const Prior& prior,
                    const ModelParams& params, const ChebyshevCoeffs& coeffs,
                    double delta, NoiseSource& langevin,
                    bool literal_first_stage_noise = false);

// ---------------------------------------------------------------------------
// chain driver
// ---------------------------------------------------------------------------

/// A sampling kernel that owns its state and noise streams.
class SamplerKernel {
 public:
  virtual ~SamplerKernel() = default;
  virtual void step() = 0;
  virtual const ImageGrid& state() const = 0;       // canonical x or latent z
  virtual const ImageGrid* x_grad() const { return nullptr; }
  virtual bool latent() const { return false; }
  virtual long grad_evals() const = 0;
  virtual std::string name() const = 0;
};

struct SampleEvent {
  long iter = 0;  // 1-based iterate index
  const SamplerKernel* kernel = nullptr;
  const ImageGrid* state = nullptr;
  const ImageGrid* x_grad = nullptr;  // latent kernels only
};

using ChainObserver = std::function<void(const SampleEvent&)>;

struct ChainRunResult {
  long iterations = 0;
  long retained = 0;
  long grad_evals = 0;
};

/// Drives a kernel for n_iters steps, streaming post-burn-in iterates
/// (1-in-thinning) to the observers. Aborts with context if an iterate goes
/// non-finite or an observer throws.
ChainRunResult run_chain(SamplerKernel& kernel, long n_iters, long burn_in,
                         long thinning,
                         const std::vector<ChainObserver>& observers);

// Concrete kernels wired to the model terms used in the experiments.

class MyulaKernel final : public SamplerKernel {
 public:
  MyulaKernel(ImageGrid init, GradLogPi grad, double delta, NoiseSource noise);
  void step() override;
  const ImageGrid& state() const override { return x_; }
  long grad_evals() const override { return evals_; }
  std::string name() const override { return "myula"; }

 private:
  ImageGrid x_;
  GradLogPi grad_;
  double delta_;
  NoiseSource noise_;
  long evals_ = 0;
};

class SkrockKernel final : public SamplerKernel {
 public:
  SkrockKernel(ImageGrid init, GradLogPi grad, ChebyshevCoeffs coeffs,
               double delta, NoiseSource noise);
  void step() override;
  const ImageGrid& state() const override { return x_; }
  long grad_evals() const override { return evals_; }
  std::string name() const override { return "skrock"; }

 private:
  ImageGrid x_;
  GradLogPi grad_;
  ChebyshevCoeffs coeffs_;
  double delta_;
  NoiseSource noise_;
  long evals_ = 0;
};

class SgsKernel final : public SamplerKernel {
 public:
  SgsKernel(ImageGrid init, const Observation& obs,
            const LinearForwardOperator& op, const Prior& prior,
            ModelParams params, double delta, NoiseSource langevin,
            NoiseSource conditional, bool pin_conditional_noise = false);
  void step() override;
  const ImageGrid& state() const override { return state_.z; }
  const ImageGrid* x_grad() const override { return &state_.x_grad; }
  bool latent() const override { return true; }
  long grad_evals() const override { return evals_; }
  std::string name() const override { return "sgs"; }

 private:
  ChainState state_;
  const Observation& obs_;
  const LinearForwardOperator& op_;
  const Prior& prior_;
  ModelParams params_;
  double delta_;
  NoiseSource langevin_;
  NoiseSource conditional_;
  bool pin_;
  long evals_ = 0;
};

class LsMyulaKernel final : public SamplerKernel {
 public:
  LsMyulaKernel(ImageGrid init, const Observation& obs,
                const LinearForwardOperator& op, const Prior& prior,
                ModelParams params, double delta, NoiseSource langevin);
  void step() override;
  const ImageGrid& state() const override { return state_.z; }
  const ImageGrid* x_grad() const override { return &state_.x_grad; }
  bool latent() const override { return true; }
  long grad_evals() const override { return evals_; }
  std::string name() const override { return "ls-myula"; }

 private:
  ChainState state_;
  const Observation& obs_;
  const LinearForwardOperator& op_;
  const Prior& prior_;
  ModelParams params_;
  double delta_;
  NoiseSource langevin_;
  long evals_ = 0;
};

class LsSkrockKernel final : public SamplerKernel {
 public:
  LsSkrockKernel(ImageGrid init, const Observation& obs,
                 const LinearForwardOperator& op, const Prior& prior,
                 ModelParams params, ChebyshevCoeffs coeffs, double delta,
                 NoiseSource langevin, bool literal_first_stage_noise = false);
  void step() override;
  const ImageGrid& state() const override { return state_.z; }
  const ImageGrid* x_grad() const override { return &state_.x_grad; }
  bool latent() const override { return true; }
  long grad_evals() const override { return evals_; }
  std::string name() const override { return "ls-skrock"; }

 private:
  ChainState state_;
  const Observation& obs_;
  const LinearForwardOperator& op_;
  const Prior& prior_;
  ModelParams params_;
  ChebyshevCoeffs coeffs_;
  double delta_;
  NoiseSource langevin_;
  bool literal_;
  long evals_ = 0;
};

}  // namespace lsmcmc
