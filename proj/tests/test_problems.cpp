#include "proxsplit/problems.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace proxsplit;
using testutil::randn;
using testutil::vec;

namespace {

// Distance to an axis-aligned box by clamping, kept separate from the library.
double box_distance(const Vector& c, double side, const Vector& x) {
  double s = 0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double lo = c[k] - side / 2, hi = c[k] + side / 2;
    const double d = x[k] < lo ? lo - x[k] : (x[k] > hi ? x[k] - hi : 0.0);
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

TEST(Heron, ExampleGeometries) {
  const HeronSpec h1 = heron_example(1), h2 = heron_example(2), h3 = heron_example(3);
  EXPECT_EQ(h1.obstacles.size(), 8u);
  EXPECT_EQ(h2.obstacles.size(), 5u);
  EXPECT_EQ(h3.obstacles.size(), 5u);
  EXPECT_EQ(h2.dim, 3u);
  const auto& b = std::get<kinds::Box>(h1.obstacles[4].kind());
  EXPECT_EQ(b.lo, vec({4.5, -6.5}));
  EXPECT_EQ(b.hi, vec({5.5, -5.5}));
  const auto& c = std::get<kinds::Box>(h2.obstacles[1].kind());
  EXPECT_EQ(c.lo, vec({-5, 1, -4}));
  const auto& ball = std::get<kinds::Ball>(h1.constraint.kind());
  EXPECT_EQ(ball.center, vec({5, 0}));
  EXPECT_EQ(ball.radius, 2.0);
  EXPECT_TRUE(std::holds_alternative<kinds::AffineLine>(h3.constraint.kind()));
  EXPECT_THROW(heron_example(4), std::invalid_argument);
}

TEST(Heron, ObjectiveAtReferencePoints) {
  EXPECT_NEAR(heron_objective(heron_example(1), vec({3.392688, -1.190188})), 53.043627, 1e-5);
  EXPECT_NEAR(heron_objective(heron_example(2), vec({-0.92531, 1.62907, 0.07883})), 22.23480, 1e-4);
  EXPECT_NEAR(heron_objective(heron_example(3), vec({-1.094773, 6})), 42.882115, 1e-5);
}

TEST(Heron, ObjectiveMatchesClampOracle) {
  const std::vector<Vector> centers{vec({-2, 4}), vec({-1, -8}), vec({0, 0}), vec({0, 6}),
                                    vec({5, -6}), vec({8, -8}), vec({8, 9}), vec({9, -5})};
  std::mt19937_64 g(1);
  for (int t = 0; t < 100; ++t) {
    const Vector x = randn(g, 2, 6.0);
    double s = 0;
    for (const auto& c : centers) s += box_distance(c, 1.0, x);
    EXPECT_NEAR(heron_objective(heron_example(1), x), s, 1e-12);
  }
}

TEST(Heron, ZeroInsideOverlappingObstacles) {
  HeronSpec h{ProxFn::ball(vec({0, 0}), 1), {ProxFn::cube(vec({0, 0}), 2), ProxFn::ball(vec({0.5, 0}), 1)}, 2};
  EXPECT_EQ(heron_objective(h, vec({0.2, 0.1})), 0.0);
}

TEST(Heron, ObjectiveConvexAlongSegments) {
  std::mt19937_64 g(2);
  for (int which : {1, 2, 3}) {
    const HeronSpec h = heron_example(which);
    for (int t = 0; t < 200; ++t) {
      const Vector a = randn(g, static_cast<Eigen::Index>(h.dim), 8.0);
      const Vector b = randn(g, static_cast<Eigen::Index>(h.dim), 8.0);
      EXPECT_LE(heron_objective(h, (a + b) / 2), (heron_objective(h, a) + heron_objective(h, b)) / 2 + 1e-12);
    }
  }
}

TEST(Heron, BuildWiring) {
  const HeronSpec h = heron_example(1);
  const ProblemSpec spec = heron_build(h);
  EXPECT_EQ(spec.size(), 8u);
  EXPECT_EQ(spec.z(), Vector::Zero(2));
  for (const auto& t : spec.terms()) {
    EXPECT_EQ(t.op.norm_bound(), 1.0);
    EXPECT_EQ(t.shift, Vector::Zero(2));
  }
  // The scheme's proximal points: J_{sB^-1} = P_B(0,1), J_{sD^-1} = u - s P_{Omega_i}(u/s), J_{tA} = P_Omega.
  std::mt19937_64 g(3);
  for (int k = 0; k < 50; ++k) {
    const Vector u = randn(g, 2, 5.0);
    const Vector unit = u.norm() > 1 ? Vector(u / u.norm()) : u;
    EXPECT_LT((spec.term(2).b.inverse_resolvent(0.5, u) - unit).norm(), 1e-14);
    EXPECT_LT((spec.term(3).d.inverse_resolvent(0.5, u) - (u - 0.5 * prox(h.obstacles[3], 1, u / 0.5))).norm(), 1e-12);
    const Vector c = vec({5, 0});
    const Vector want = (u - c).norm() > 2 ? Vector(c + 2 * (u - c) / (u - c).norm()) : u;
    EXPECT_LT((spec.a().resolvent(0.24, u) - want).norm(), 1e-14);
  }
}

TEST(Heron, ConvergedPointsAreFeasible) {
  for (int which : {1, 2, 3}) {
    const HeronSpec h = heron_example(which);
    const ProblemSpec spec = heron_build(h);
    const auto d = heron_defaults(which, Scheme::dr1);
    const StepConfig c = make_step_config(spec, Scheme::dr1, d.tau, std::vector<double>(spec.size(), d.sigma),
                                          constant_lambda(d.lambda), 500);
    const auto r = run(spec, c, ErrorSchedule::exact(), d.x0);
    EXPECT_LT(distance_to_set(h.constraint, r.log.back().primal), 1e-9) << which;
  }
}

TEST(Tv, HandExamples) {
  EXPECT_EQ(tv(ImageGrid::constant(4, 5, 0.7)), 0.0);
  EXPECT_NEAR(tv(ImageGrid(2, 2, vec({0, 1, 2, 3}))), std::sqrt(5.0) + 3.0, 1e-12);
}

TEST(Tv, EqualsCrossNormOfGradient) {
  std::mt19937_64 g(4);
  for (int t = 0; t < 20; ++t) {
    const ImageGrid x(8, 8, randn(g, 64));
    auto [p, q] = gradient_apply(x);
    EXPECT_NEAR(tv(x), cross_norm(p, q), 1e-12);
    EXPECT_NEAR(tv(x), eval(ProxFn::iso_norm(1.0, 8, 8), gradient_op(8, 8).apply(x.pixels)), 1e-12);
  }
}

TEST(Deblur, ObjectiveDegenerateIdentityBlur) {
  DeblurParams p;
  DeblurSpec spec = make_deblur_spec(ImageGrid::constant(16, 16, 0.5), p);
  spec.blur = identity_op(256);
  const ImageGrid x = ImageGrid::constant(16, 16, 0.5);
  EXPECT_NEAR(deblur_objective(spec, x), p.alpha2 * haar_forward(x).lpNorm<1>(), 1e-15);
  EXPECT_NEAR(deblur_objective(spec, x), p.alpha2 * 0.5 * 16, 1e-15);
  ImageGrid bad = x;
  bad.pixels[7] = 1.5;
  EXPECT_EQ(deblur_objective(spec, bad), kInfeasible);
  bad.pixels[7] = 1.0 + 1e-13;
  EXPECT_TRUE(std::isfinite(deblur_objective(spec, bad)));
}

TEST(Deblur, Isnr) {
  std::mt19937_64 g(5);
  const ImageGrid clean(4, 4, randn(g, 16));
  const ImageGrid observed(4, 4, clean.pixels + randn(g, 16, 0.1));
  EXPECT_NEAR(isnr(clean, observed, observed), 0.0, 1e-12);
  const ImageGrid half(4, 4, clean.pixels + 0.5 * (observed.pixels - clean.pixels));
  EXPECT_NEAR(isnr(clean, observed, half), 10 * std::log10(4.0), 1e-12);
  const ImageGrid quarter(4, 4, clean.pixels + 0.25 * (observed.pixels - clean.pixels));
  EXPECT_NEAR(isnr(clean, observed, quarter) - isnr(clean, observed, half), 10 * std::log10(4.0), 1e-12);
  EXPECT_EQ(isnr(clean, observed, clean), std::numeric_limits<double>::infinity());
}

TEST(Deblur, BuildWiringMatchesClosedForms) {
  const ImageGrid clean = synthetic_image(32, 32);
  DeblurParams p;
  const LinOp A = gaussian_blur_op(32, 32, p.kernel_size, p.blur_std);
  const DeblurSpec spec = make_deblur_spec(degrade(clean, A, p.noise_std, 1), p, clean);
  const ProblemSpec prob = deblur_build(spec);
  ASSERT_EQ(prob.size(), 3u);
  EXPECT_TRUE(prob.is_reduced());
  EXPECT_EQ(prob.term(0).op.norm_bound(), 1.0);
  EXPECT_EQ(prob.term(1).op.norm_bound(), 1.0);
  EXPECT_NEAR(prob.term(2).op.norm_bound(), std::sqrt(8.0), 1e-15);
  std::mt19937_64 g(6);
  const Vector& b = spec.observed.pixels;
  for (int t = 0; t < 20; ++t) {
    const Vector u = randn(g, 1024, 2.0);
    const double s = testutil::uniform(g, 0.05, 2.0);
    EXPECT_LT((prob.term(0).b.inverse_resolvent(s, u) - (u - s * b).cwiseMax(-1.0).cwiseMin(1.0)).norm(), 1e-12);
    EXPECT_LT((prob.term(1).b.inverse_resolvent(s, u) - u.cwiseMax(-p.alpha2).cwiseMin(p.alpha2)).norm(), 1e-12);
    const Vector pq = randn(g, 2048, 0.01);
    Vector want(2048);
    for (Eigen::Index k = 0; k < 1024; ++k) {
      const double r = std::max(p.alpha1, std::hypot(pq[k], pq[1024 + k]));
      want[k] = p.alpha1 * pq[k] / r;
      want[1024 + k] = p.alpha1 * pq[1024 + k] / r;
    }
    EXPECT_LT((prob.term(2).b.inverse_resolvent(s, pq) - want).norm(), 1e-12);
    EXPECT_EQ(prob.a().resolvent(s, u), u.cwiseMax(0.0).cwiseMin(1.0));
  }
}

TEST(Deblur, StepRecipesWithSmallWaveletBound) {
  DeblurParams p;
  p.wavelet_norm = kSmallWaveletNorm;
  const DeblurSpec spec = make_deblur_spec(synthetic_image(32, 32), p);
  EXPECT_EQ(spec.wavelet.norm_bound(), kSmallWaveletNorm);
  const ProblemSpec prob = deblur_build(spec);
  const double w = std::pow(2.0, -16);
  const double tau1 = 4.0 / (1.0 + 1.0 * w + 8 * 0.05) - 0.01;
  const StepConfig c1{tau1, {1.0, 1.0, 0.05}, constant_lambda(1.5), 200, Scheme::dr1};
  EXPECT_TRUE(validate_steps(prob, c1).ok);
  const double tau2 = 1.0 / (1.0 + 0.05 * w + 8 * 0.05) - 0.01;
  const StepConfig c2{tau2, {1.0, 0.05, 0.05}, constant_lambda(1.6), 200, Scheme::dr2_reduced};
  EXPECT_TRUE(validate_steps(prob, c2).ok);
  const auto d1 = deblur_defaults(spec, Scheme::dr1);
  EXPECT_NEAR(d1.tau, tau1, 1e-12);
  const auto d2 = deblur_defaults(spec, Scheme::dr2);
  EXPECT_EQ(d2.scheme, Scheme::dr2_reduced);
  EXPECT_NEAR(d2.tau, tau2, 1e-12);
  // The declared bound is not certified by the power estimate.
  EXPECT_FALSE(validate_steps(prob, c1, true).ok);
}

TEST(Deblur, DefaultRecipeUsesTrueWaveletNorm) {
  const DeblurSpec spec = make_deblur_spec(synthetic_image(32, 32), DeblurParams{});
  const auto d1 = deblur_defaults(spec, Scheme::dr1);
  EXPECT_NEAR(d1.tau, 4.0 / (1.0 + 1.0 + 8 * 0.05) - 0.01, 1e-12);
  const ProblemSpec prob = deblur_build(spec);
  const StepConfig c{d1.tau, d1.sigmas, constant_lambda(d1.lambda), 10, d1.scheme};
  EXPECT_TRUE(validate_steps(prob, c, true).ok);
}

TEST(Deblur, SyntheticImageAndDegrade) {
  const ImageGrid x = synthetic_image();
  EXPECT_EQ(x.rows, 64u);
  EXPECT_GE(x.pixels.minCoeff(), 0.1 - 1e-15);
  EXPECT_LE(x.pixels.maxCoeff(), 0.9 + 1e-15);
  const LinOp A = gaussian_blur_op(64, 64, 9, 4.0);
  const ImageGrid b1 = degrade(x, A, 1e-3, 7), b2 = degrade(x, A, 1e-3, 7), b3 = degrade(x, A, 1e-3, 8);
  EXPECT_EQ(b1.pixels, b2.pixels);
  EXPECT_NE(b1.pixels, b3.pixels);
  const double noise = (b1.pixels - A.apply(x.pixels)).norm() / 64.0;
  EXPECT_NEAR(noise, 1e-3, 1e-4);
}

TEST(Deblur, PadAndCrop) {
  std::mt19937_64 g(7);
  const ImageGrid x(5, 18, randn(g, 90));
  const PaddedImage p = pad_reflexive(x, 16);
  EXPECT_EQ(p.image.rows, 16u);
  EXPECT_EQ(p.image.cols, 32u);
  EXPECT_EQ(p.pad_rows, 11u);
  EXPECT_EQ(p.pad_cols, 14u);
  EXPECT_EQ(p.image(5, 0), x(4, 0));  // edge duplicated
  EXPECT_EQ(p.image(6, 3), x(3, 3));
  EXPECT_EQ(crop(p.image, 5, 18).pixels, x.pixels);
  EXPECT_THROW(crop(x, 6, 18), std::invalid_argument);
}
