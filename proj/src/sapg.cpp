#include "lsmcmc/sapg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lsmcmc/kernels.hpp"
#include "lsmcmc/samplers.hpp"

namespace lsmcmc {

double gamma_schedule(long i, double c0, double p) {
  if (i < 1) throw std::invalid_argument("gamma_schedule: i >= 1");
  if (!(c0 > 0.0)) throw std::invalid_argument("gamma_schedule: c0 > 0");
  return c0 * std::pow(static_cast<double>(i), -p);
}

double sapg_weight(long n, long n0, long n1, double gamma_n) {
  if (n < n0) return 0.0;
  if (n <= n1) return 1.0;
  return gamma_n;
}

double theta_update(double theta, std::span<const double> g_values,
                    double dimension, double gamma, double alpha,
                    double theta_min, double theta_max) {
  if (g_values.empty())
    throw std::invalid_argument("theta_update: empty sample list");
  double acc = 0.0;
  for (double g : g_values) acc += dimension / (alpha * theta) - g;
  const double step = gamma * acc / static_cast<double>(g_values.size());
  return std::clamp(theta + step, theta_min, theta_max);
}

double rho2_update(double rho2, std::span<const double> sq_distances,
                   double dimension, double gamma, double rho2_min,
                   double rho2_max) {
  if (sq_distances.empty())
    throw std::invalid_argument("rho2_update: empty sample list");
  double acc = 0.0;
  for (double sq : sq_distances)
    acc += sq / (2.0 * rho2 * rho2) - dimension / (2.0 * rho2);
  const double step = gamma * acc / static_cast<double>(sq_distances.size());
  return std::clamp(rho2 + step, rho2_min, rho2_max);
}

SapgTrace sapg_run(const SapgConfig& cfg, const Observation& obs,
                   const LinearForwardOperator& op, const Prior& prior) {
  if (!(cfg.theta0 >= cfg.theta_min && cfg.theta0 <= cfg.theta_max))
    throw std::invalid_argument("sapg_run: theta0 outside Theta");
  if (!(cfg.rho2_0 >= cfg.rho2_min && cfg.rho2_0 <= cfg.rho2_max))
    throw std::invalid_argument("sapg_run: rho2_0 outside Omega");
  if (cfg.inner_samples < 1 || cfg.max_iters < 1)
    throw std::invalid_argument("sapg_run: bad iteration counts");

  const double d = static_cast<double>(op.pixel_count());
  const double L_f = likelihood_lipschitz(obs, op);
  const double alpha = prior.homogeneity();

  NoiseSource langevin(cfg.seed, 1);
  NoiseSource conditional(cfg.seed, 2);

  ChainState state;
  state.z = op.apply_adjoint(obs.y);
  state.x_grad = state.z;

  SapgTrace trace;
  double theta = cfg.theta0;
  double rho2 = cfg.rho2_0;
  double wsum = 0.0, theta_wsum = 0.0, rho2_wsum = 0.0;
  double prev_theta_bar = 0.0, prev_rho2_bar = 0.0;
  bool have_prev_bar = false;

  std::vector<double> g_values(static_cast<std::size_t>(cfg.inner_samples));
  std::vector<double> sq_dist(static_cast<std::size_t>(cfg.inner_samples));
  ImageGrid diff;

  for (long i = 1; i <= cfg.max_iters; ++i) {
    ModelParams params{theta, rho2, cfg.lambda, obs.sigma2, L_f};
    // the admissible step depends on rho2_i, so refresh it every iteration
    const double delta = cfg.delta_frac / params.L_a();

    for (int j = 0; j < cfg.inner_samples; ++j) {
      ls_myula_step(state, obs, op, prior, params, delta, langevin);
      g_values[static_cast<std::size_t>(j)] = prior.value(state.z);

      if (cfg.rao_blackwell_rho) {
        // E||x - z||^2 | z = ||mu(z) - z||^2 + tr(Q^{-1})
        ImageGrid mu = conditional_mean(state.z, obs, op, rho2);
        diff = ImageGrid(mu.rows, mu.cols);
        kernels::lincomb2(diff.span(), 1.0, mu.span(), -1.0, state.z.span());
        sq_dist[static_cast<std::size_t>(j)] =
            kernels::sum_squares(diff.span()) +
            conditional_trace_cov(obs, op, rho2);
      } else {
        ImageGrid x = conditional_sample(state.z, obs, op, rho2, conditional);
        diff = ImageGrid(x.rows, x.cols);
        kernels::lincomb2(diff.span(), 1.0, x.span(), -1.0, state.z.span());
        sq_dist[static_cast<std::size_t>(j)] =
            kernels::sum_squares(diff.span());
      }
    }

    const double gamma_t = gamma_schedule(i, cfg.c0_theta, cfg.exponent_p);
    const double gamma_r = gamma_schedule(i, cfg.c0_rho2, cfg.exponent_p);
    theta = theta_update(theta, g_values, d, gamma_t, alpha, cfg.theta_min,
                         cfg.theta_max);
    rho2 = rho2_update(rho2, sq_dist, d, gamma_r, cfg.rho2_min, cfg.rho2_max);
    if (!std::isfinite(theta) || !std::isfinite(rho2))
      throw std::runtime_error("sapg_run: non-finite iterate at iteration " +
                               std::to_string(i));

    trace.theta.push_back(theta);
    trace.rho2.push_back(rho2);
    trace.stopped_at = i;

    const double w =
        sapg_weight(i, cfg.n0, cfg.n1, gamma_schedule(i, 1.0, cfg.exponent_p));
    wsum += w;
    theta_wsum += w * theta;
    rho2_wsum += w * rho2;
    const double theta_bar = wsum > 0.0 ? theta_wsum / wsum : theta;
    const double rho2_bar = wsum > 0.0 ? rho2_wsum / wsum : rho2;
    trace.theta_bar.push_back(theta_bar);
    trace.rho2_bar.push_back(rho2_bar);

    if (have_prev_bar && wsum > 0.0) {
      const double rt = std::abs(theta_bar - prev_theta_bar) / prev_theta_bar;
      const double rr = std::abs(rho2_bar - prev_rho2_bar) / prev_rho2_bar;
      trace.rel_change_theta.push_back(rt);
      trace.rel_change_rho2.push_back(rr);
      if (rt < cfg.beta && rr < cfg.beta) {
        trace.converged = true;
        trace.theta_final = theta_bar;
        trace.rho2_final = rho2_bar;
        return trace;
      }
    } else {
      trace.rel_change_theta.push_back(std::nan(""));
      trace.rel_change_rho2.push_back(std::nan(""));
    }
    if (wsum > 0.0) {
      prev_theta_bar = theta_bar;
      prev_rho2_bar = rho2_bar;
      have_prev_bar = true;
    }
  }

  trace.theta_final = trace.theta_bar.back();
  trace.rho2_final = trace.rho2_bar.back();
  return trace;
}

}  // namespace lsmcmc
