#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "lsmcmc/forward_models.hpp"
#include "lsmcmc/grid.hpp"
#include "lsmcmc/priors.hpp"
#include "lsmcmc/samplers.hpp"

using namespace lsmcmc;

namespace {

// independent Chebyshev recursion used as the oracle
double cheb_T(int n, double x) {
  double tm = 1.0, t = x;
  if (n == 0) return tm;
  for (int k = 2; k <= n; ++k) {
    const double next = 2.0 * x * t - tm;
    tm = t;
    t = next;
  }
  return t;
}

double cheb_T_deriv(int n, double x, double h = 1e-7) {
  return (cheb_T(n, x + h) - cheb_T(n, x - h)) / (2.0 * h);
}

// Exact stationary variance of the SK-ROCK recursion on an OU target with
// curvature kappa: the stage updates are linear, so the iterate is
// X' = b_s X + c_s xi with xi ~ N(0, 2 delta), and the fixed point of the
// variance recursion is 2 delta c_s^2 / (1 - b_s^2).
double skrock_ou_variance(const ChebyshevCoeffs& c, double delta,
                          double kappa) {
  const double d = delta * kappa;
  double b_prev = 1.0, c_prev = 0.0;
  double b_cur = 1.0 - c.mu1 * d;
  double c_cur = c.k1 - c.mu1 * d * c.nu1;
  for (std::size_t j = 0; j < c.mu.size(); ++j) {
    const double b_next = (c.nu[j] - c.mu[j] * d) * b_cur + c.k[j] * b_prev;
    const double c_next = (c.nu[j] - c.mu[j] * d) * c_cur + c.k[j] * c_prev;
    b_prev = b_cur;
    b_cur = b_next;
    c_prev = c_cur;
    c_cur = c_next;
  }
  return 2.0 * delta * c_cur * c_cur / (1.0 - b_cur * b_cur);
}

}  // namespace

TEST_CASE("chebyshev coefficients") {
  SUBCASE("oracle recursion sanity: T2(0.5) = -0.5") {
    CHECK(cheb_T(2, 0.5) == doctest::Approx(-0.5));
  }
  SUBCASE("s=15, eta=0.05 frozen values") {
    ChebyshevCoeffs c = chebyshev_coeffs(15, 0.05);
    CHECK(c.l_s == doctest::Approx(404.9833333).epsilon(1e-9));
    CHECK(c.omega0 == doctest::Approx(1.0 + 0.05 / 225.0).epsilon(1e-14));
    CHECK(c.omega1 ==
          doctest::Approx(cheb_T(15, c.omega0) / cheb_T_deriv(15, c.omega0))
              .epsilon(1e-6));
    CHECK(c.mu1 == doctest::Approx(c.omega1 / c.omega0));
    CHECK(c.nu1 == doctest::Approx(15.0 * c.omega1 / 2.0));
    CHECK(c.k1 == doctest::Approx(15.0 * c.omega1 / c.omega0));
  }
  SUBCASE("stage identities") {
    ChebyshevCoeffs c = chebyshev_coeffs(7, 0.05);
    REQUIRE(c.mu.size() == 6);
    for (std::size_t j = 0; j < c.nu.size(); ++j)
      CHECK(c.nu[j] + c.k[j] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(c.l_s > 0.0);
  }
  SUBCASE("s < 2 rejected") {
    CHECK_THROWS_AS(chebyshev_coeffs(1, 0.05), std::invalid_argument);
  }
}

TEST_CASE("step-size rules against the reported deblurring values") {
  // Lipschitz constants as reported for the cameraman deblur setup
  CHECK(stepsize_myula(5.959) == doctest::Approx(0.167).epsilon(0.005));
  ChebyshevCoeffs c = chebyshev_coeffs(15, 0.05);
  CHECK(stepsize_skrock(c, 5.959) == doctest::Approx(67.959).epsilon(0.0005));
  CHECK(stepsize_skrock(c, 4.205) == doctest::Approx(96.294).epsilon(0.0005));
  // latent step sizes strictly dominate canonical ones
  LipschitzInfo info = lipschitz_info(1.0 / 0.335, 0.335, 0.48);
  CHECK(info.L_a < info.L);
  CHECK(stepsize_skrock(c, info.L_a) > stepsize_skrock(c, info.L));
}

TEST_CASE("myula on gaussian targets") {
  SUBCASE("1d stationary variance matches the discrete fixed point") {
    // C = (1-delta)^2 C + 2 delta  =>  C = 4/3 at delta = 0.5
    const double delta = 0.5;
    GradLogPi grad = [](const ImageGrid& x) {
      ImageGrid g = x;
      for (double& v : g.data) v = -v;
      return g;
    };
    NoiseSource noise(101);
    ImageGrid x(1, 1, 0.0);
    double acc = 0.0, acc2 = 0.0;
    const long n = 1000000, burn = 1000;
    for (long i = 0; i < n + burn; ++i) {
      x = myula_step(x, grad, delta, noise);
      if (i >= burn) {
        acc += x.data[0];
        acc2 += x.data[0] * x.data[0];
      }
    }
    const double var = acc2 / n - (acc / n) * (acc / n);
    CHECK(var == doctest::Approx(4.0 / 3.0).epsilon(0.02));
  }
  SUBCASE("zero gradient and pinned noise give a fixed point") {
    GradLogPi grad = [](const ImageGrid& x) {
      return ImageGrid(x.rows, x.cols, 0.0);
    };
    NoiseSource zero = NoiseSource::zeros();
    ImageGrid x(2, 2, 1.5);
    ImageGrid next = myula_step(x, grad, 0.3, zero);
    for (std::size_t i = 0; i < x.size(); ++i)
      CHECK(next.data[i] == x.data[i]);
  }
  SUBCASE("non-finite gradient rejected") {
    GradLogPi grad = [](const ImageGrid& x) {
      return ImageGrid(x.rows, x.cols, std::nan(""));
    };
    NoiseSource noise(1);
    CHECK_THROWS(myula_step(ImageGrid(2, 2, 0.0), grad, 0.1, noise));
  }
}

TEST_CASE("skrock on gaussian targets") {
  SUBCASE("stable at the maximal step, variance matching the linear-recursion"
          " oracle") {
    // At delta = delta_s^max on the unit-curvature mode the chain sits at the
    // very edge of the stability interval: it stays bounded but the
    // stationary variance is strongly damped (about 0.061 for s = 10). The
    // closed-form recursion predicts it; the mild-step regime recovers the
    // target variance.
    ChebyshevCoeffs c = chebyshev_coeffs(10, 0.05);
    GradLogPi grad = [](const ImageGrid& x) {
      ImageGrid g = x;
      for (double& v : g.data) v = -v;
      return g;
    };
    for (double frac : {1.0, 0.01}) {
      const double delta = stepsize_skrock(c, 1.0, frac);
      NoiseSource noise(55);
      ImageGrid x(1, 1, 0.0);
      double acc = 0.0, acc2 = 0.0;
      const long n = 100000, burn = 100;
      for (long i = 0; i < n + burn; ++i) {
        x = skrock_step(x, grad, c, delta, noise);
        REQUIRE(std::isfinite(x.data[0]));
        if (i >= burn) {
          acc += x.data[0];
          acc2 += x.data[0] * x.data[0];
        }
      }
      const double var = acc2 / n - (acc / n) * (acc / n);
      CHECK(var ==
            doctest::Approx(skrock_ou_variance(c, delta, 1.0)).epsilon(0.10));
    }
    // delta*kappa <= 2: the invariant law is close to the target
    CHECK(skrock_ou_variance(c, 1.73, 1.0) == doctest::Approx(1.0).epsilon(0.10));
  }
  SUBCASE("deterministic damping contracts a quadratic potential") {
    ChebyshevCoeffs c = chebyshev_coeffs(10, 0.05);
    GradLogPi grad = [](const ImageGrid& x) {
      ImageGrid g = x;
      for (double& v : g.data) v = -v;
      return g;
    };
    NoiseSource zero = NoiseSource::zeros();
    ImageGrid x(2, 2, 4.0);
    double prev = 8.0;  // ||x||
    for (int i = 0; i < 20; ++i) {
      x = skrock_step(x, grad, c, stepsize_skrock(c, 1.0) / 2.0, zero);
      double nrm = 0.0;
      for (double v : x.data) nrm += v * v;
      nrm = std::sqrt(nrm);
      CHECK(nrm <= prev + 1e-12);
      prev = nrm;
    }
    CHECK(prev < 1e-3);
  }
  SUBCASE("exactly s gradient evaluations per step") {
    ChebyshevCoeffs c = chebyshev_coeffs(13, 0.05);
    int calls = 0;
    GradLogPi grad = [&calls](const ImageGrid& x) {
      ++calls;
      return ImageGrid(x.rows, x.cols, 0.0);
    };
    NoiseSource noise(2);
    skrock_step(ImageGrid(2, 2, 0.0), grad, c, 1.0, noise);
    CHECK(calls == 13);
  }
}

namespace {

struct ScalarModel {
  LinearForwardOperator op;
  Observation obs;
  ModelParams params;

  static ScalarModel make(double y, double sigma2, double rho2,
                          double lambda) {
    NoiseSource mask_rng(0);
    ScalarModel m{LinearForwardOperator::inpainting(1.0, 1, 1, mask_rng),
                  Observation{}, ModelParams{}};
    m.obs.y = ImageGrid(1, 1, y);
    m.obs.sigma2 = sigma2;
    m.params = ModelParams{1.0, rho2, lambda, sigma2, 1.0 / sigma2};
    return m;
  }
};

}  // namespace

TEST_CASE("latent-space kernels on the exact scalar chain") {
  const double y = 2.0, sigma2 = 0.5, rho2 = 0.4;
  const double v = sigma2 + rho2;  // latent marginal variance (TV vanishes)
  ScalarModel m = ScalarModel::make(y, sigma2, rho2, sigma2);
  TvPrior prior;
  const double delta = 1.0 / m.params.L_a();

  SUBCASE("ls-myula matches the ULA-on-gaussian stationary law") {
    ChainState st{ImageGrid(1, 1, y), ImageGrid(1, 1, y), 0};
    NoiseSource langevin(7);
    double acc = 0.0, acc2 = 0.0;
    const long n = 1000000, burn = 5000;
    for (long i = 0; i < n + burn; ++i) {
      ls_myula_step(st, m.obs, m.op, prior, m.params, delta, langevin);
      if (i >= burn) {
        acc += st.z.data[0];
        acc2 += st.z.data[0] * st.z.data[0];
      }
    }
    const double mean_z = acc / n;
    const double var_z = acc2 / n - mean_z * mean_z;
    CHECK(mean_z == doctest::Approx(y).epsilon(0.01));
    CHECK(var_z == doctest::Approx(v / (1.0 - delta / (2.0 * v))).epsilon(0.02));
  }

  SUBCASE("sgs matches the two-variable linear recursion prediction") {
    // Z' = r Z + (d/r2) a y + (d/r2) sqrt(q) eps + sqrt(2d) zeta
    const double c = 1.0 / sigma2 + 1.0 / rho2;
    const double b = (1.0 / rho2) / c;
    const double q = 1.0 / c;
    const double r = 1.0 - (delta / rho2) * (1.0 - b);
    const double innov = std::pow(delta / rho2, 2) * q + 2.0 * delta;
    const double var_pred = innov / (1.0 - r * r);

    ChainState st{ImageGrid(1, 1, y), ImageGrid(1, 1, y), 0};
    NoiseSource langevin(8), conditional(9);
    double acc = 0.0, acc2 = 0.0;
    const long n = 1000000, burn = 5000;
    for (long i = 0; i < n + burn; ++i) {
      sgs_step(st, m.obs, m.op, prior, m.params, delta, langevin, conditional);
      if (i >= burn) {
        acc += st.z.data[0];
        acc2 += st.z.data[0] * st.z.data[0];
      }
    }
    const double var_z = acc2 / n - (acc / n) * (acc / n);
    CHECK(var_z == doctest::Approx(var_pred).epsilon(0.03));
  }

  SUBCASE("one hand-stepped sgs iteration with replicated noise") {
    ChainState st{ImageGrid(1, 1, 0.7), ImageGrid(1, 1, 0.7), 0};
    NoiseSource langevin(21), conditional(22);
    NoiseSource langevin2(21), conditional2(22);

    sgs_step(st, m.obs, m.op, prior, m.params, delta, langevin, conditional);

    const double eps_y = conditional2.normal();
    const double eps_z = conditional2.normal();
    const double zeta = langevin2.normal();
    const double c = 1.0 / sigma2 + 1.0 / rho2;
    const double yt = y + std::sqrt(sigma2) * eps_y;
    const double zt = 0.7 + std::sqrt(rho2) * eps_z;
    const double x = (yt / sigma2 + zt / rho2) / c;
    const double expected =
        0.7 - (delta / rho2) * (0.7 - x) + std::sqrt(2.0 * delta) * zeta;
    CHECK(st.z.data[0] == doctest::Approx(expected).epsilon(1e-14));
    CHECK(st.x_grad.data[0] == doctest::Approx(x).epsilon(1e-14));
  }

  SUBCASE("average sgs drift equals the ls-myula drift") {
    // E over the conditional draw of (z - X)/rho2 equals (z - mu(z))/rho2
    ImageGrid z(1, 1, 1.3);
    ImageGrid mu = conditional_mean(z, m.obs, m.op, rho2);
    NoiseSource noise(31);
    double acc = 0.0;
    const int n = 10000;
    for (int k = 0; k < n; ++k) {
      ImageGrid x = conditional_sample(z, m.obs, m.op, rho2, noise);
      acc += (z.data[0] - x.data[0]) / rho2;
    }
    const double exact = (z.data[0] - mu.data[0]) / rho2;
    const double c = 1.0 / sigma2 + 1.0 / rho2;
    const double se = std::sqrt(1.0 / c) / rho2 / std::sqrt(double(n));
    CHECK(std::abs(acc / n - exact) < 4.0 * se);
  }

  SUBCASE("ls-skrock is stable at the maximal latent step and matches the"
          " linear-recursion oracle") {
    // On a single pixel the latent drift is exactly (z - y)/(sigma2 + rho2),
    // an OU process with curvature 1/v, so the scheme's stationary variance
    // has the same closed form as canonical SK-ROCK.
    ChebyshevCoeffs c10 = chebyshev_coeffs(10, 0.05);
    const double dmax = stepsize_skrock(c10, m.params.L_a());
    ChainState st{ImageGrid(1, 1, y), ImageGrid(1, 1, y), 0};
    NoiseSource langevin(12);
    double acc = 0.0, acc2 = 0.0;
    const long n = 100000, burn = 500;
    for (long i = 0; i < n + burn; ++i) {
      ls_skrock_step(st, m.obs, m.op, prior, m.params, c10, dmax, langevin);
      REQUIRE(std::isfinite(st.z.data[0]));
      if (i >= burn) {
        acc += st.z.data[0];
        acc2 += st.z.data[0] * st.z.data[0];
      }
    }
    const double mean_z = acc / n;
    const double var_z = acc2 / n - mean_z * mean_z;
    CHECK(mean_z == doctest::Approx(y).epsilon(0.02));
    CHECK(var_z ==
          doctest::Approx(skrock_ou_variance(c10, dmax, 1.0 / v)).epsilon(0.10));
  }
}

TEST_CASE("sgs with pinned conditional noise reproduces ls-myula bit for bit") {
  ImageGrid truth = make_test_scene(8, 8);
  auto op = make_uniform_blur(3, 8, 8);
  NoiseSource obs_rng(40);
  Observation obs = simulate_observation(truth, op, 40.0, obs_rng);
  const double lf = likelihood_lipschitz(obs, op);
  ModelParams params{0.05, obs.sigma2, obs.sigma2, obs.sigma2, lf};
  const double delta = 1.0 / params.L_a();
  TvPrior prior;

  ChainState a{op.apply_adjoint(obs.y), ImageGrid(8, 8, 0.0), 0};
  ChainState b = a;
  NoiseSource langevin_a(77), langevin_b(77), conditional(78);
  for (int i = 0; i < 50; ++i) {
    sgs_step(a, obs, op, prior, params, delta, langevin_a, conditional, true);
    ls_myula_step(b, obs, op, prior, params, delta, langevin_b);
    for (std::size_t k = 0; k < a.z.size(); ++k)
      REQUIRE(a.z.data[k] == b.z.data[k]);
  }
}

TEST_CASE("ls-skrock reduces to envelope-only skrock for huge rho2") {
  // identity observation, rho2 so large that the data term vanishes
  NoiseSource mask_rng(0);
  auto op = LinearForwardOperator::inpainting(1.0, 1, 2, mask_rng);
  Observation obs;
  obs.y = ImageGrid(1, 2);
  obs.y.data = {0.4, 1.9};
  obs.sigma2 = 0.5;
  ModelParams params{1.0, 1e12, 0.35, 0.5, 2.0};
  TvPrior prior;
  ChebyshevCoeffs c = chebyshev_coeffs(6, 0.05);
  const double delta = 0.05;

  PriorDescriptor pd = params.prior_descriptor();
  GradLogPi envelope_only = [&](const ImageGrid& z) {
    ImageGrid g = my_envelope_grad(z, pd);
    for (double& v : g.data) v = -v;
    return g;
  };

  ChainState st{ImageGrid(1, 2, 1.0), ImageGrid(1, 2, 1.0), 0};
  ImageGrid x(1, 2, 1.0);
  NoiseSource n1(91), n2(91);
  for (int i = 0; i < 25; ++i) {
    ls_skrock_step(st, obs, op, prior, params, c, delta, n1);
    x = skrock_step(x, envelope_only, c, delta, n2);
    for (std::size_t k = 0; k < x.size(); ++k)
      CHECK(std::abs(st.z.data[k] - x.data[k]) < 1e-6);
  }
}

TEST_CASE("run_chain bookkeeping") {
  GradLogPi grad = [](const ImageGrid& x) {
    ImageGrid g = x;
    for (double& v : g.data) v = -v;
    return g;
  };

  SUBCASE("thinning 1, burn-in 0 sees every iterate") {
    MyulaKernel kernel(ImageGrid(1, 1, 0.0), grad, 0.1, NoiseSource(5));
    long seen = 0;
    std::vector<ChainObserver> obs{[&](const SampleEvent&) { ++seen; }};
    ChainRunResult r = run_chain(kernel, 100, 0, 1, obs);
    CHECK(seen == 100);
    CHECK(r.retained == 100);
    CHECK(r.grad_evals == 100);
  }
  SUBCASE("skrock counts s gradients per iteration") {
    SkrockKernel kernel(ImageGrid(1, 1, 0.0), grad, chebyshev_coeffs(9, 0.05),
                        0.5, NoiseSource(6));
    ChainRunResult r = run_chain(kernel, 40, 10, 3, {});
    CHECK(r.grad_evals == 40 * 9);
    CHECK(r.retained == 10);
  }
  SUBCASE("fixed seed reproduces the trajectory") {
    std::vector<double> t1, t2;
    for (auto* sink : {&t1, &t2}) {
      MyulaKernel kernel(ImageGrid(1, 1, 0.0), grad, 0.1, NoiseSource(123));
      std::vector<ChainObserver> obs{[sink](const SampleEvent& ev) {
        sink->push_back(ev.state->data[0]);
      }};
      run_chain(kernel, 200, 50, 2, obs);
    }
    REQUIRE(t1.size() == t2.size());
    for (std::size_t i = 0; i < t1.size(); ++i) CHECK(t1[i] == t2[i]);
  }
  SUBCASE("observer failure aborts with context") {
    MyulaKernel kernel(ImageGrid(1, 1, 0.0), grad, 0.1, NoiseSource(5));
    std::vector<ChainObserver> obs{[](const SampleEvent&) {
      throw std::runtime_error("boom");
    }};
    CHECK_THROWS_WITH_AS(run_chain(kernel, 10, 0, 1, obs),
                         doctest::Contains("observer"), std::runtime_error);
  }
  SUBCASE("invalid iteration counts rejected") {
    MyulaKernel kernel(ImageGrid(1, 1, 0.0), grad, 0.1, NoiseSource(5));
    CHECK_THROWS_AS(run_chain(kernel, 10, 10, 1, {}), std::invalid_argument);
  }
}
