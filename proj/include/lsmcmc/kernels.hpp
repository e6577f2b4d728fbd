#pragma once

#include <cstddef>
#include <span>

// Pixel-level primitives shared by the samplers, the TV prox and the
// Fourier-domain solves. Every primitive exists twice: a plain serial
// reference in kernels::serial and an OpenMP version in kernels::par.
// The unqualified entry points dispatch at runtime; small arrays always
// take the serial path because the fork/join overhead dominates there.
//
// Reductions are blocked into a fixed number of chunks combined in chunk
// order, so the result does not depend on the number of threads.

namespace lsmcmc::kernels {

bool parallel_enabled();
void set_parallel(bool on);

// out = a*x + b*y
void lincomb2(std::span<double> out, double a, std::span<const double> x,
              double b, std::span<const double> y);

// out = a*x + b*y + c*z
void lincomb3(std::span<double> out, double a, std::span<const double> x,
              double b, std::span<const double> y, double c,
              std::span<const double> z);

// Forward differences with Neumann boundary: dh(r,c) = x(r,c+1)-x(r,c)
// (0 in the last column), dv(r,c) = x(r+1,c)-x(r,c) (0 in the last row).
void forward_diff(std::span<const double> x, std::size_t rows,
                  std::size_t cols, std::span<double> dh,
                  std::span<double> dv);

// Negative adjoint of forward_diff: <forward_diff(x), (ph,pv)> = -<x, divergence(ph,pv)>.
void divergence(std::span<const double> ph, std::span<const double> pv,
                std::size_t rows, std::size_t cols, std::span<double> out);

// One dual gradient-projection sweep of the TV prox: given the gradient
// field (gh,gv) of the current dual objective, q = p + tau*g followed by
// the pixel-wise projection q / max(1, |q|) with |q| the 2-norm of the
// (h,v) pair. Returns sum of squared dual updates for the stopping rule.
double dual_project_step(std::span<double> ph, std::span<double> pv,
                         std::span<const double> gh,
                         std::span<const double> gv, double tau);

// Sum over pixels of sqrt(dh^2 + dv^2).
double isotropic_norm_sum(std::span<const double> dh,
                          std::span<const double> dv);

double dot(std::span<const double> a, std::span<const double> b);
double sum(std::span<const double> a);
double sum_squares(std::span<const double> a);
double max_abs(std::span<const double> a);

// Element-wise complex product (cr + i*ci) = (ar + i*ai) * (br + i*bi);
// conjugate_b multiplies by the conjugate of b instead.
void complex_hadamard(std::span<const double> ar, std::span<const double> ai,
                      std::span<const double> br, std::span<const double> bi,
                      std::span<double> cr, std::span<double> ci,
                      bool conjugate_b);

// Per-bin Fourier solve of (|h|^2/s2 + 1/r2) m = conj(h) yhat / s2 + zhat / r2,
// the Gaussian conditional mean for a circulant operator.
void spectral_conditional_solve(std::span<const double> hr,
                                std::span<const double> hi,
                                std::span<const double> yr,
                                std::span<const double> yi,
                                std::span<const double> zr,
                                std::span<const double> zi, double inv_s2,
                                double inv_r2, std::span<double> mr,
                                std::span<double> mi);

namespace serial {
void lincomb2(std::span<double> out, double a, std::span<const double> x,
              double b, std::span<const double> y);
void lincomb3(std::span<double> out, double a, std::span<const double> x,
              double b, std::span<const double> y, double c,
              std::span<const double> z);
void forward_diff(std::span<const double> x, std::size_t rows,
                  std::size_t cols, std::span<double> dh,
                  std::span<double> dv);
void divergence(std::span<const double> ph, std::span<const double> pv,
                std::size_t rows, std::size_t cols, std::span<double> out);
double dual_project_step(std::span<double> ph, std::span<double> pv,
                         std::span<const double> gh,
                         std::span<const double> gv, double tau);
double isotropic_norm_sum(std::span<const double> dh,
                          std::span<const double> dv);
double dot(std::span<const double> a, std::span<const double> b);
double sum(std::span<const double> a);
double sum_squares(std::span<const double> a);
double max_abs(std::span<const double> a);
void complex_hadamard(std::span<const double> ar, std::span<const double> ai,
                      std::span<const double> br, std::span<const double> bi,
                      std::span<double> cr, std::span<double> ci,
                      bool conjugate_b);
void spectral_conditional_solve(std::span<const double> hr,
                                std::span<const double> hi,
                                std::span<const double> yr,
                                std::span<const double> yi,
                                std::span<const double> zr,
                                std::span<const double> zi, double inv_s2,
                                double inv_r2, std::span<double> mr,
                                std::span<double> mi);
}  // namespace serial

namespace par {
void lincomb2(std::span<double> out, double a, std::span<const double> x,
              double b, std::span<const double> y);
void lincomb3(std::span<double> out, double a, std::span<const double> x,
              double b, std::span<const double> y, double c,
              std::span<const double> z);
void forward_diff(std::span<const double> x, std::size_t rows,
                  std::size_t cols, std::span<double> dh,
                  std::span<double> dv);
void divergence(std::span<const double> ph, std::span<const double> pv,
                std::size_t rows, std::size_t cols, std::span<double> out);
double dual_project_step(std::span<double> ph, std::span<double> pv,
                         std::span<const double> gh,
                         std::span<const double> gv, double tau);
double isotropic_norm_sum(std::span<const double> dh,
                          std::span<const double> dv);
double dot(std::span<const double> a, std::span<const double> b);
double sum(std::span<const double> a);
double sum_squares(std::span<const double> a);
double max_abs(std::span<const double> a);
void complex_hadamard(std::span<const double> ar, std::span<const double> ai,
                      std::span<const double> br, std::span<const double> bi,
                      std::span<double> cr, std::span<double> ci,
                      bool conjugate_b);
void spectral_conditional_solve(std::span<const double> hr,
                                std::span<const double> hi,
                                std::span<const double> yr,
                                std::span<const double> yi,
                                std::span<const double> zr,
                                std::span<const double> zi, double inv_s2,
                                double inv_r2, std::span<double> mr,
                                std::span<double> mi);
}  // namespace par

}  // namespace lsmcmc::kernels
