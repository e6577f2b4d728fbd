#include "lsmcmc/priors.hpp"

#include <cmath>
#include <stdexcept>

#include "lsmcmc/kernels.hpp"

namespace lsmcmc {

VectorField forward_differences(const ImageGrid& x) {
  VectorField f{ImageGrid(x.rows, x.cols), ImageGrid(x.rows, x.cols)};
  kernels::forward_diff(x.span(), x.rows, x.cols, f.h.span(), f.v.span());
  return f;
}

double tv(const ImageGrid& x) {
  VectorField f = forward_differences(x);
  return kernels::isotropic_norm_sum(f.h.span(), f.v.span());
}

namespace {

constexpr double kDualStep = 0.125;
constexpr double kDualTol = 1e-5;
constexpr int kMaxSweeps = 200;
constexpr double kGapTol = 1e-4;
constexpr int kHardCapSweeps = 20000;

struct DualState {
  ImageGrid ph, pv;  // dual field, |p_i| <= 1 pixel-wise
  ImageGrid div, gh, gv, work;
  explicit DualState(const ImageGrid& x)
      : ph(x.rows, x.cols),
        pv(x.rows, x.cols),
        div(x.rows, x.cols),
        gh(x.rows, x.cols),
        gv(x.rows, x.cols),
        work(x.rows, x.cols) {}

  // ascent direction grad(div p + x/w); step 1/8 covers the operator norm
  // bound ||grad div|| <= 8
  double sweep(const ImageGrid& x, double w) {
    kernels::divergence(ph.span(), pv.span(), x.rows, x.cols, div.span());
    kernels::lincomb2(work.span(), 1.0, div.span(), 1.0 / w, x.span());
    kernels::forward_diff(work.span(), x.rows, x.cols, gh.span(), gv.span());
    return kernels::dual_project_step(ph.span(), pv.span(), gh.span(),
                                      gv.span(), kDualStep);
  }

  ImageGrid primal(const ImageGrid& x, double w) {
    kernels::divergence(ph.span(), pv.span(), x.rows, x.cols, div.span());
    ImageGrid u(x.rows, x.cols);
    kernels::lincomb2(u.span(), 1.0, x.span(), w, div.span());
    return u;
  }

  // gap = w * (TV(u) - <grad u, p>) >= 0, zero at the saddle point
  double gap(double w, const ImageGrid& u) const {
    VectorField gu = forward_differences(u);
    const double tv_u = kernels::isotropic_norm_sum(gu.h.span(), gu.v.span());
    const double inner = kernels::dot(gu.h.span(), ph.span()) +
                         kernels::dot(gu.v.span(), pv.span());
    return w * (tv_u - inner);
  }
};

double primal_objective(const ImageGrid& x, double w, const ImageGrid& u) {
  ImageGrid diff(x.rows, x.cols);
  kernels::lincomb2(diff.span(), 1.0, u.span(), -1.0, x.span());
  return w * tv(u) + 0.5 * kernels::sum_squares(diff.span());
}

}  // namespace

ProxTvResult prox_tv_certified(const ImageGrid& x, double w) {
  if (!(w > 0.0)) throw std::invalid_argument("prox_tv: weight must be > 0");
  ensure_finite(x, "prox_tv input");
  if (x.size() <= 1) return {x, 0.0, 0};  // TV of one pixel is zero

  DualState s(x);
  int sweeps = 0;
  for (; sweeps < kMaxSweeps;) {
    const double change = s.sweep(x, w);
    ++sweeps;
    const double pnorm = kernels::sum_squares(s.ph.span()) +
                         kernels::sum_squares(s.pv.span());
    if (pnorm == 0.0 && change == 0.0) break;  // constant input
    if (pnorm > 0.0 && std::sqrt(change / pnorm) < kDualTol) break;
  }

  ImageGrid u = s.primal(x, w);
  double gap = s.gap(w, u);
  double tol = kGapTol * (1.0 + std::abs(primal_objective(x, w, u)));
  while (gap > tol && sweeps < kHardCapSweeps) {
    for (int k = 0; k < 50 && sweeps < kHardCapSweeps; ++k, ++sweeps)
      s.sweep(x, w);
    u = s.primal(x, w);
    gap = s.gap(w, u);
    tol = kGapTol * (1.0 + std::abs(primal_objective(x, w, u)));
  }
  return {std::move(u), gap, sweeps};
}

ImageGrid prox_tv(const ImageGrid& x, double w) {
  return prox_tv_certified(x, w).u;
}

// ---------------------------------------------------------------------------

double TvPrior::value(const ImageGrid& x) const { return tv(x); }

ImageGrid TvPrior::prox(const ImageGrid& x, double w) const {
  return prox_tv(x, w);
}

double AbsValuePrior::value(const ImageGrid& x) const {
  double s = 0.0;
  for (double v : x.data) s += std::abs(v);
  return s;
}

ImageGrid AbsValuePrior::prox(const ImageGrid& x, double w) const {
  if (!(w > 0.0)) throw std::invalid_argument("prox: weight must be > 0");
  ImageGrid u(x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x.data[i];
    u.data[i] = v > w ? v - w : (v < -w ? v + w : 0.0);
  }
  return u;
}

// ---------------------------------------------------------------------------

double envelope_value(const Prior& prior, const ImageGrid& x,
                      const PriorDescriptor& p) {
  if (!(p.lambda > 0.0))
    throw std::invalid_argument("envelope_value: lambda must be > 0");
  const ImageGrid u = prior.prox(x, p.theta * p.lambda);
  ImageGrid diff(x.rows, x.cols);
  kernels::lincomb2(diff.span(), 1.0, x.span(), -1.0, u.span());
  return p.theta * prior.value(u) +
         kernels::sum_squares(diff.span()) / (2.0 * p.lambda);
}

ImageGrid envelope_grad(const Prior& prior, const ImageGrid& x,
                        const PriorDescriptor& p) {
  if (!(p.lambda > 0.0))
    throw std::invalid_argument("envelope_grad: lambda must be > 0");
  const ImageGrid u = prior.prox(x, p.theta * p.lambda);
  ImageGrid g(x.rows, x.cols);
  const double inv = 1.0 / p.lambda;
  kernels::lincomb2(g.span(), inv, x.span(), -inv, u.span());
  return g;
}

double my_envelope_value(const ImageGrid& x, const PriorDescriptor& p) {
  return envelope_value(TvPrior{}, x, p);
}

ImageGrid my_envelope_grad(const ImageGrid& x, const PriorDescriptor& p) {
  return envelope_grad(TvPrior{}, x, p);
}

}  // namespace lsmcmc
