#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lsmcmc/forward_models.hpp"
#include "lsmcmc/grid.hpp"
#include "lsmcmc/priors.hpp"
#include "lsmcmc/samplers.hpp"

namespace lsmcmc {

/// Streaming first/second moments (Welford). Merging two accumulators is
/// equivalent to processing the concatenated stream.
struct RunningStats {
  long count = 0;
  ImageGrid mean;
  ImageGrid m2;  // sum of squared deviations

  void update(const ImageGrid& x);
  void merge(const RunningStats& other);
  ImageGrid variance() const;  // M2 / (count - 1)
  ImageGrid stddev() const;
};

/// A scalar trace with enough metadata to align different samplers on a
/// gradient-evaluation axis.
struct ScalarSeries {
  std::string name;
  long thinning = 1;
  double grad_evals_per_entry = 1.0;
  std::vector<double> values;
};

double mse(const ImageGrid& estimate, const ImageGrid& truth);

/// Biased-normalised autocorrelation about the series mean; rho_0 = 1.
std::vector<double> acf(const ScalarSeries& series, std::size_t max_lag);

/// N / (1 + 2 sum_{k<K} rho_k) where K is the first lag with rho_K < 0.05.
double ess(const ScalarSeries& series);

struct SlowestComponent {
  ScalarSeries projections;
  double eigenvalue = 0.0;
  ImageGrid eigenvector;
};

/// Matrix-free power iteration on the empirical sample covariance
/// (50 iterations or 1e-8 relative eigenvalue change); the projection series
/// of the samples onto the leading eigenvector is the chain's slowest
/// component.
SlowestComponent slowest_component(const std::vector<ImageGrid>& samples);

/// Unnormalised log-posterior -f_y(x) - theta * TV(x) with the original
/// (non-smoothed) TV.
double log_posterior(const ImageGrid& x, const Observation& obs,
                     const LinearForwardOperator& op, double theta);

struct MapResult {
  ImageGrid x;
  std::vector<double> objective;
  int iterations = 0;
};

/// Proximal-gradient MAP baseline: x <- prox_tv(x - grad f / L_f, theta/L_f)
/// until the relative objective change drops below tol. The objective is
/// monotone; an increase beyond slack aborts.
MapResult map_estimate(const Observation& obs, const LinearForwardOperator& op,
                       double theta, int iters, double tol);

// ---------------------------------------------------------------------------
// chain observers
// ---------------------------------------------------------------------------

/// Posterior-mean accumulator. In Rao-Blackwell mode every retained latent
/// iterate contributes E[x | y, Z_i]; otherwise the canonical state (or the
/// SGS draw) is averaged directly.
class PosteriorMeanObserver {
 public:
  PosteriorMeanObserver(const Observation& obs,
                        const LinearForwardOperator& op, double rho2,
                        bool rao_blackwell);
  void operator()(const SampleEvent& ev);
  const ImageGrid& mean() const { return mean_; }
  long count() const { return count_; }

 private:
  const Observation& obs_;
  const LinearForwardOperator& op_;
  double rho2_;
  bool rb_;
  ImageGrid mean_;
  long count_ = 0;
};

/// Pixel-wise standard deviation maps of the x-space sample stream at
/// downsampling factors {1,2,4,8}: each sample is block-averaged first, the
/// moments accumulate at the reduced scale. Latent chains contribute exact
/// conditional draws made with a dedicated noise stream.
class MultiscaleStdObserver {
 public:
  MultiscaleStdObserver(const Observation& obs,
                        const LinearForwardOperator& op, double rho2,
                        NoiseSource noise,
                        std::vector<std::size_t> factors = {1, 2, 4, 8});
  void operator()(const SampleEvent& ev);
  const std::vector<std::size_t>& factors() const { return factors_; }
  ImageGrid std_map(std::size_t factor) const;

 private:
  const Observation& obs_;
  const LinearForwardOperator& op_;
  double rho2_;
  NoiseSource noise_;
  std::vector<std::size_t> factors_;
  std::vector<RunningStats> stats_;
};

/// Scalar trace of a function of the iterate (log-posterior, MSE, ...).
class ScalarTraceObserver {
 public:
  ScalarTraceObserver(std::string name, double grad_evals_per_entry,
                      std::function<double(const SampleEvent&)> fn);
  void operator()(const SampleEvent& ev);
  const ScalarSeries& series() const { return series_; }

 private:
  std::function<double(const SampleEvent&)> fn_;
  ScalarSeries series_;
};

/// Keeps a thinned window of x-space samples for covariance analyses.
class SampleWindowObserver {
 public:
  explicit SampleWindowObserver(std::size_t capacity);
  void operator()(const SampleEvent& ev);
  const std::vector<ImageGrid>& samples() const { return samples_; }

 private:
  std::size_t capacity_;
  std::vector<ImageGrid> samples_;
};

}  // namespace lsmcmc
