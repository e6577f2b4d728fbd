#pragma once

#include <cstdint>
#include <vector>

#include "lsmcmc/grid.hpp"

namespace lsmcmc {

/// Gaussian observation: y = A x + noise on observed components. For
/// inpainting, unobserved entries of y are stored as 0 and masked out of
/// every likelihood term.
struct Observation {
  ImageGrid y;
  double sigma2 = 0.0;
  double snr_db = 0.0;
};

/// Linear forward operator: either a circulant blur diagonalised by the
/// 2D FFT, or an inpainting mask (a row-subset of the identity).
/// Immutable after construction and safe to share across threads.
class LinearForwardOperator {
 public:
  enum class Kind { CirculantBlur, Inpainting };

  static LinearForwardOperator uniform_blur(std::size_t size,
                                            std::size_t rows,
                                            std::size_t cols);
  static LinearForwardOperator inpainting(double fraction_observed,
                                          std::size_t rows, std::size_t cols,
                                          NoiseSource& noise);
  /// Inpainting operator from an explicit mask (used when reloading runs).
  static LinearForwardOperator inpainting_from_mask(
      std::vector<std::uint8_t> mask, std::size_t rows, std::size_t cols);

  Kind kind() const { return kind_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t pixel_count() const { return rows_ * cols_; }

  ImageGrid apply(const ImageGrid& x) const;
  ImageGrid apply_adjoint(const ImageGrid& y) const;

  /// Circulant eigenvalues (blur only).
  const ComplexSpectrum& spectrum() const;
  /// Observation mask (inpainting only); 1 = observed.
  const std::vector<std::uint8_t>& mask() const;
  std::size_t observed_count() const;

  /// max |eigenvalue| (blur) or 1 (inpainting).
  double operator_norm() const;

  bool is_observed(std::size_t i) const {
    return kind_ == Kind::CirculantBlur || mask_[i] != 0;
  }

 private:
  LinearForwardOperator() = default;
  Kind kind_ = Kind::CirculantBlur;
  std::size_t rows_ = 0, cols_ = 0;
  ComplexSpectrum spectrum_;           // blur
  std::vector<std::uint8_t> mask_;     // inpainting
  std::size_t observed_ = 0;
};

LinearForwardOperator make_uniform_blur(std::size_t size, std::size_t rows,
                                        std::size_t cols);
LinearForwardOperator make_inpainting(double fraction_observed,
                                      std::size_t rows, std::size_t cols,
                                      NoiseSource& noise);

/// y = A x + eps with sigma^2 = Var(Ax over observed pixels) / 10^(snr/10).
Observation simulate_observation(const ImageGrid& x,
                                 const LinearForwardOperator& op,
                                 double snr_db, NoiseSource& noise);

/// ||y - A x||^2 / (2 sigma^2) over observed components.
double likelihood_value(const ImageGrid& x, const Observation& obs,
                        const LinearForwardOperator& op);
/// A^T (A x - y) / sigma^2.
ImageGrid likelihood_grad(const ImageGrid& x, const Observation& obs,
                          const LinearForwardOperator& op);
/// Gradient Lipschitz constant (max eigenvalue magnitude)^2 / sigma^2.
double likelihood_lipschitz(const Observation& obs,
                            const LinearForwardOperator& op);

// x | y, z, rho^2 is N(mu, Q^{-1}) with Q = A^T A / sigma^2 + I / rho^2.

/// mu = Q^{-1} (A^T y / sigma^2 + z / rho^2); diagonal Fourier solve for
/// blur, per-pixel solve for inpainting.
ImageGrid conditional_mean(const ImageGrid& z, const Observation& obs,
                           const LinearForwardOperator& op, double rho2);

/// Exact draw from N(mu, Q^{-1}) by perturbation-optimization: perturb y and
/// z with the matching noise scales and return the conditional mean of the
/// perturbed problem. Draws eps_y first, then eps_z.
ImageGrid conditional_sample(const ImageGrid& z, const Observation& obs,
                             const LinearForwardOperator& op, double rho2,
                             NoiseSource& noise);

/// Same with the two standard-normal fields supplied by the caller; zero
/// fields reduce to conditional_mean.
ImageGrid conditional_sample_with_fields(const ImageGrid& z,
                                         const Observation& obs,
                                         const LinearForwardOperator& op,
                                         double rho2, const ImageGrid& eps_y,
                                         const ImageGrid& eps_z);

/// tr(Q^{-1}) from the eigenvalue spectrum (blur) or pixel counts
/// (inpainting).
double conditional_trace_cov(const Observation& obs,
                             const LinearForwardOperator& op, double rho2);

}  // namespace lsmcmc
