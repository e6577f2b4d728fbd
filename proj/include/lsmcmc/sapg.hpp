#pragma once

#include <span>
#include <vector>

#include "lsmcmc/forward_models.hpp"
#include "lsmcmc/grid.hpp"
#include "lsmcmc/priors.hpp"

namespace lsmcmc {

/// Stochastic-approximation setup for the joint (theta, rho^2) maximum
/// marginal likelihood estimate.
struct SapgConfig {
  double theta0 = 0.0;
  double rho2_0 = 0.0;
  double theta_min = 1e-4, theta_max = 1.0;  // projection set Theta
  double rho2_min = 0.0, rho2_max = 0.0;     // projection set Omega
  double c0_theta = 0.0;                     // gamma_i   = c0_theta * i^-p
  double c0_rho2 = 0.0;                      // gamma_i'  = c0_rho2  * i^-p
  double exponent_p = 0.8;                   // p in [0.6, 0.9]
  int inner_samples = 1;                     // chain steps per outer iteration
  long max_iters = 1500;
  long n0 = 0, n1 = 0;  // averaging phase bounds (defaulted from max_iters)
  double beta = 1e-4;   // stopping tolerance on the averaged estimates
  double lambda = 0.0;  // Moreau-Yosida smoothing of the inner kernel
  double delta_frac = 1.0;  // MCMC step = delta_frac / L_a(rho2_i)
  bool rao_blackwell_rho = false;
  std::uint64_t seed = 1;
};

struct SapgTrace {
  std::vector<double> theta, rho2;          // per-iteration iterates
  std::vector<double> theta_bar, rho2_bar;  // running weighted averages
  std::vector<double> rel_change_theta, rel_change_rho2;
  double theta_final = 0.0;
  double rho2_final = 0.0;
  long stopped_at = 0;  // iterations actually run
  bool converged = false;
};

/// c0 * i^-p, strictly decreasing in i.
double gamma_schedule(long i, double c0, double p);

/// 0 before the averaging phase, 1 inside it, gamma_n in the refinement
/// phase.
double sapg_weight(long n, long n0, long n1, double gamma_n);

/// Projected ascent on theta via the homogeneity identity
/// d / (alpha * theta) - mean g(Z), evaluated on the original prior.
double theta_update(double theta, std::span<const double> g_values,
                    double dimension, double gamma, double alpha,
                    double theta_min, double theta_max);

/// Projected ascent on rho^2 with mean ||X - Z||^2 / (2 rho^4) - d/(2 rho^2).
double rho2_update(double rho2, std::span<const double> sq_distances,
                   double dimension, double gamma, double rho2_min,
                   double rho2_max);

/// Full calibration loop: warm-started ls-MYULA latent chain, exact
/// conditional draws for the rho^2 gradient (or the Rao-Blackwellised
/// surrogate), step size refreshed from the current rho2_i, early stop when
/// both averaged estimates move less than beta in relative terms.
SapgTrace sapg_run(const SapgConfig& config, const Observation& obs,
                   const LinearForwardOperator& op, const Prior& prior);

}  // namespace lsmcmc
