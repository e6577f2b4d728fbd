#include "lsmcmc/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>

#ifdef LSMCMC_HAVE_OPENMP
#include <omp.h>
#endif

namespace lsmcmc::kernels {

namespace {

std::atomic<bool> g_parallel{true};

// Arrays below this size always run serial; the parallel region costs more
// than the loop.
constexpr std::size_t kParallelCutoff = 16384;

// Reductions accumulate per-block partials combined in block order, so the
// value is independent of the thread count.
constexpr std::size_t kReductionBlocks = 64;

bool go_parallel(std::size_t n) {
#ifdef LSMCMC_HAVE_OPENMP
  return g_parallel.load(std::memory_order_relaxed) && n >= kParallelCutoff;
#else
  (void)n;
  return false;
#endif
}

}  // namespace

bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }
void set_parallel(bool on) { g_parallel.store(on, std::memory_order_relaxed); }

// ---------------------------------------------------------------------------
// serial reference implementations
// ---------------------------------------------------------------------------

namespace serial {

void lincomb2(std::span<double> out, double a, std::span<const double> x,
              double b, std::span<const double> y) {
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

void lincomb3(std::span<double> out, double a, std::span<const double> x,
              double b, std::span<const double> y, double c,
              std::span<const double> z) {
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i)
    out[i] = a * x[i] + b * y[i] + c * z[i];
}

void forward_diff(std::span<const double> x, std::size_t rows,
                  std::size_t cols, std::span<double> dh,
                  std::span<double> dv) {
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t off = r * cols;
    for (std::size_t c = 0; c + 1 < cols; ++c)
      dh[off + c] = x[off + c + 1] - x[off + c];
    dh[off + cols - 1] = 0.0;
    if (r + 1 < rows) {
      for (std::size_t c = 0; c < cols; ++c)
        dv[off + c] = x[off + cols + c] - x[off + c];
    } else {
      for (std::size_t c = 0; c < cols; ++c) dv[off + c] = 0.0;
    }
  }
}

void divergence(std::span<const double> ph, std::span<const double> pv,
                std::size_t rows, std::size_t cols, std::span<double> out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t off = r * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      double d = 0.0;
      // adjoint of the Neumann forward difference: last column/row carry no
      // outgoing difference
      if (c + 1 < cols) d += ph[off + c];
      if (c > 0) d -= ph[off + c - 1];
      if (r + 1 < rows) d += pv[off + c];
      if (r > 0) d -= pv[off + c - cols];
      out[off + c] = d;
    }
  }
}

double dual_project_step(std::span<double> ph, std::span<double> pv,
                         std::span<const double> gh,
                         std::span<const double> gv, double tau) {
  const std::size_t n = ph.size();
  double change = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double qh = ph[i] + tau * gh[i];
    const double qv = pv[i] + tau * gv[i];
    const double mag = std::sqrt(qh * qh + qv * qv);
    const double scale = mag > 1.0 ? 1.0 / mag : 1.0;
    const double nh = qh * scale;
    const double nv = qv * scale;
    const double dh = nh - ph[i];
    const double dv = nv - pv[i];
    change += dh * dh + dv * dv;
    ph[i] = nh;
    pv[i] = nv;
  }
  return change;
}

double isotropic_norm_sum(std::span<const double> dh,
                          std::span<const double> dv) {
  const std::size_t n = dh.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    s += std::sqrt(dh[i] * dh[i] + dv[i] * dv[i]);
  return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v;
  return s;
}

double sum_squares(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return s;
}

double max_abs(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

void complex_hadamard(std::span<const double> ar, std::span<const double> ai,
                      std::span<const double> br, std::span<const double> bi,
                      std::span<double> cr, std::span<double> ci,
                      bool conjugate_b) {
  const std::size_t n = ar.size();
  const double sgn = conjugate_b ? -1.0 : 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double re = ar[i] * br[i] - sgn * ai[i] * bi[i];
    const double im = sgn * ar[i] * bi[i] + ai[i] * br[i];
    cr[i] = re;
    ci[i] = im;
  }
}

void spectral_conditional_solve(std::span<const double> hr,
                                std::span<const double> hi,
                                std::span<const double> yr,
                                std::span<const double> yi,
                                std::span<const double> zr,
                                std::span<const double> zi, double inv_s2,
                                double inv_r2, std::span<double> mr,
                                std::span<double> mi) {
  const std::size_t n = hr.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double q = (hr[i] * hr[i] + hi[i] * hi[i]) * inv_s2 + inv_r2;
    // conj(h) * yhat
    const double br = (hr[i] * yr[i] + hi[i] * yi[i]) * inv_s2 + zr[i] * inv_r2;
    const double bi = (hr[i] * yi[i] - hi[i] * yr[i]) * inv_s2 + zi[i] * inv_r2;
    mr[i] = br / q;
    mi[i] = bi / q;
  }
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP implementations
// ---------------------------------------------------------------------------

namespace par {

void lincomb2(std::span<double> out, double a, std::span<const double> x,
              double b, std::span<const double> y) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

void lincomb3(std::span<double> out, double a, std::span<const double> x,
              double b, std::span<const double> y, double c,
              std::span<const double> z) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    out[i] = a * x[i] + b * y[i] + c * z[i];
}

void forward_diff(std::span<const double> x, std::size_t rows,
                  std::size_t cols, std::span<double> dh,
                  std::span<double> dv) {
  const std::ptrdiff_t nr = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < nr; ++r) {
    const std::size_t off = static_cast<std::size_t>(r) * cols;
    for (std::size_t c = 0; c + 1 < cols; ++c)
      dh[off + c] = x[off + c + 1] - x[off + c];
    dh[off + cols - 1] = 0.0;
    if (static_cast<std::size_t>(r) + 1 < rows) {
      for (std::size_t c = 0; c < cols; ++c)
        dv[off + c] = x[off + cols + c] - x[off + c];
    } else {
      for (std::size_t c = 0; c < cols; ++c) dv[off + c] = 0.0;
    }
  }
}

void divergence(std::span<const double> ph, std::span<const double> pv,
                std::size_t rows, std::size_t cols, std::span<double> out) {
  const std::ptrdiff_t nr = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < nr; ++r) {
    const std::size_t off = static_cast<std::size_t>(r) * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      double d = 0.0;
      if (c + 1 < cols) d += ph[off + c];
      if (c > 0) d -= ph[off + c - 1];
      if (static_cast<std::size_t>(r) + 1 < rows) d += pv[off + c];
      if (r > 0) d -= pv[off + c - cols];
      out[off + c] = d;
    }
  }
}

namespace {

template <typename BlockFn>
double blocked_reduce(std::size_t n, BlockFn&& fn) {
  double partial[kReductionBlocks] = {0.0};
  const std::size_t block = (n + kReductionBlocks - 1) / kReductionBlocks;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(kReductionBlocks);
       ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * block;
    const std::size_t hi = std::min(n, lo + block);
    if (lo < hi) partial[b] = fn(lo, hi);
  }
  double s = 0.0;
  for (double p : partial) s += p;
  return s;
}

}  // namespace

double dual_project_step(std::span<double> ph, std::span<double> pv,
                         std::span<const double> gh,
                         std::span<const double> gv, double tau) {
  return blocked_reduce(ph.size(), [&](std::size_t lo, std::size_t hi) {
    double change = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      const double qh = ph[i] + tau * gh[i];
      const double qv = pv[i] + tau * gv[i];
      const double mag = std::sqrt(qh * qh + qv * qv);
      const double scale = mag > 1.0 ? 1.0 / mag : 1.0;
      const double nh = qh * scale;
      const double nv = qv * scale;
      const double dh = nh - ph[i];
      const double dv = nv - pv[i];
      change += dh * dh + dv * dv;
      ph[i] = nh;
      pv[i] = nv;
    }
    return change;
  });
}

double isotropic_norm_sum(std::span<const double> dh,
                          std::span<const double> dv) {
  return blocked_reduce(dh.size(), [&](std::size_t lo, std::size_t hi) {
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i)
      s += std::sqrt(dh[i] * dh[i] + dv[i] * dv[i]);
    return s;
  });
}

double dot(std::span<const double> a, std::span<const double> b) {
  return blocked_reduce(a.size(), [&](std::size_t lo, std::size_t hi) {
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += a[i] * b[i];
    return s;
  });
}

double sum(std::span<const double> a) {
  return blocked_reduce(a.size(), [&](std::size_t lo, std::size_t hi) {
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += a[i];
    return s;
  });
}

double sum_squares(std::span<const double> a) {
  return blocked_reduce(a.size(), [&](std::size_t lo, std::size_t hi) {
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += a[i] * a[i];
    return s;
  });
}

double max_abs(std::span<const double> a) {
  double partial[kReductionBlocks] = {0.0};
  const std::size_t n = a.size();
  const std::size_t block = (n + kReductionBlocks - 1) / kReductionBlocks;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(kReductionBlocks);
       ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * block;
    const std::size_t hi = std::min(n, lo + block);
    double m = 0.0;
    for (std::size_t i = lo; i < hi; ++i) m = std::max(m, std::abs(a[i]));
    partial[b] = m;
  }
  double m = 0.0;
  for (double p : partial) m = std::max(m, p);
  return m;
}

void complex_hadamard(std::span<const double> ar, std::span<const double> ai,
                      std::span<const double> br, std::span<const double> bi,
                      std::span<double> cr, std::span<double> ci,
                      bool conjugate_b) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(ar.size());
  const double sgn = conjugate_b ? -1.0 : 1.0;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double re = ar[i] * br[i] - sgn * ai[i] * bi[i];
    const double im = sgn * ar[i] * bi[i] + ai[i] * br[i];
    cr[i] = re;
    ci[i] = im;
  }
}

void spectral_conditional_solve(std::span<const double> hr,
                                std::span<const double> hi,
                                std::span<const double> yr,
                                std::span<const double> yi,
                                std::span<const double> zr,
                                std::span<const double> zi, double inv_s2,
                                double inv_r2, std::span<double> mr,
                                std::span<double> mi) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(hr.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double q = (hr[i] * hr[i] + hi[i] * hi[i]) * inv_s2 + inv_r2;
    const double br = (hr[i] * yr[i] + hi[i] * yi[i]) * inv_s2 + zr[i] * inv_r2;
    const double bi = (hr[i] * yi[i] - hi[i] * yr[i]) * inv_s2 + zi[i] * inv_r2;
    mr[i] = br / q;
    mi[i] = bi / q;
  }
}

}  // namespace par

// ---------------------------------------------------------------------------
// dispatchers
// ---------------------------------------------------------------------------

void lincomb2(std::span<double> out, double a, std::span<const double> x,
              double b, std::span<const double> y) {
  if (go_parallel(out.size()))
    par::lincomb2(out, a, x, b, y);
  else
    serial::lincomb2(out, a, x, b, y);
}

void lincomb3(std::span<double> out, double a, std::span<const double> x,
              double b, std::span<const double> y, double c,
              std::span<const double> z) {
  if (go_parallel(out.size()))
    par::lincomb3(out, a, x, b, y, c, z);
  else
    serial::lincomb3(out, a, x, b, y, c, z);
}

void forward_diff(std::span<const double> x, std::size_t rows,
                  std::size_t cols, std::span<double> dh,
                  std::span<double> dv) {
  if (go_parallel(x.size()))
    par::forward_diff(x, rows, cols, dh, dv);
  else
    serial::forward_diff(x, rows, cols, dh, dv);
}

void divergence(std::span<const double> ph, std::span<const double> pv,
                std::size_t rows, std::size_t cols, std::span<double> out) {
  if (go_parallel(out.size()))
    par::divergence(ph, pv, rows, cols, out);
  else
    serial::divergence(ph, pv, rows, cols, out);
}

double dual_project_step(std::span<double> ph, std::span<double> pv,
                         std::span<const double> gh,
                         std::span<const double> gv, double tau) {
  if (go_parallel(ph.size()))
    return par::dual_project_step(ph, pv, gh, gv, tau);
  return serial::dual_project_step(ph, pv, gh, gv, tau);
}

double isotropic_norm_sum(std::span<const double> dh,
                          std::span<const double> dv) {
  if (go_parallel(dh.size())) return par::isotropic_norm_sum(dh, dv);
  return serial::isotropic_norm_sum(dh, dv);
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (go_parallel(a.size())) return par::dot(a, b);
  return serial::dot(a, b);
}

double sum(std::span<const double> a) {
  if (go_parallel(a.size())) return par::sum(a);
  return serial::sum(a);
}

double sum_squares(std::span<const double> a) {
  if (go_parallel(a.size())) return par::sum_squares(a);
  return serial::sum_squares(a);
}

double max_abs(std::span<const double> a) {
  if (go_parallel(a.size())) return par::max_abs(a);
  return serial::max_abs(a);
}

void complex_hadamard(std::span<const double> ar, std::span<const double> ai,
                      std::span<const double> br, std::span<const double> bi,
                      std::span<double> cr, std::span<double> ci,
                      bool conjugate_b) {
  if (go_parallel(ar.size()))
    par::complex_hadamard(ar, ai, br, bi, cr, ci, conjugate_b);
  else
    serial::complex_hadamard(ar, ai, br, bi, cr, ci, conjugate_b);
}

void spectral_conditional_solve(std::span<const double> hr,
                                std::span<const double> hi,
                                std::span<const double> yr,
                                std::span<const double> yi,
                                std::span<const double> zr,
                                std::span<const double> zi, double inv_s2,
                                double inv_r2, std::span<double> mr,
                                std::span<double> mi) {
  if (go_parallel(hr.size()))
    par::spectral_conditional_solve(hr, hi, yr, yi, zr, zi, inv_s2, inv_r2, mr,
                                    mi);
  else
    serial::spectral_conditional_solve(hr, hi, yr, yi, zr, zi, inv_s2, inv_r2,
                                       mr, mi);
}

}  // namespace lsmcmc::kernels
