#pragma once

#include "proxsplit/core.hpp"
#include "proxsplit/linops.hpp"
#include "proxsplit/prox.hpp"
#include "proxsplit/solvers.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace proxsplit {

// ===========================================================================
// Generalized Heron problem: minimize sum_i d(x; Omega_i) over x in Omega.
// ===========================================================================

struct HeronSpec {
  ProxFn constraint;
  std::vector<ProxFn> obstacles;
  std::size_t dim = 2;
};

/// sum_i d(x; Omega_i). The constraint indicator is not added.
inline double heron_objective(const HeronSpec& spec, const Vector& x) {
  require(static_cast<std::size_t>(x.size()) == spec.dim, "heron_objective: dimension mismatch");
  double s = 0.0;
  for (const auto& o : spec.obstacles) s += distance_to_set(o, x);
  return s;
}

/// f = delta_Omega, g_i = ||.||, l_i = delta_{Omega_i}, L_i = Id, r_i = 0, z = 0.
inline ProblemSpec heron_build(const HeronSpec& spec) {
  require(!spec.obstacles.empty(), "heron_build: no obstacle sets");
  require(spec.constraint.is_indicator(), "heron_build: constraint must be an indicator");
  std::vector<ProxTerm> terms;
  for (const auto& o : spec.obstacles) {
    require(o.is_indicator(), "heron_build: obstacles must be indicators");
    terms.push_back(ProxTerm{identity_op(spec.dim), ProxFn::eucl_norm(), o,
                             Vector::Zero(static_cast<Eigen::Index>(spec.dim))});
  }
  return make_prox_problem(spec.constraint, Vector::Zero(static_cast<Eigen::Index>(spec.dim)), terms);
}

namespace detail {

inline Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index k = 0;
  for (double x : xs) v[k++] = x;
  return v;
}

inline HeronSpec heron_with_cubes(ProxFn constraint, std::size_t dim,
                                  const std::vector<Vector>& centers, double side) {
  HeronSpec s{std::move(constraint), {}, dim};
  for (const auto& c : centers) s.obstacles.push_back(ProxFn::cube(c, side));
  return s;
}

}  // namespace detail

/// The three location instances: 1 = eight unit squares with a disc
/// constraint, 2 = five cubes with a ball constraint, 3 = five squares
/// constrained to a horizontal line.
inline HeronSpec heron_example(int which) {
  using detail::vec;
  switch (which) {
    case 1:
      return detail::heron_with_cubes(ProxFn::ball(vec({5, 0}), 2.0), 2,
                                      {vec({-2, 4}), vec({-1, -8}), vec({0, 0}), vec({0, 6}),
                                       vec({5, -6}), vec({8, -8}), vec({8, 9}), vec({9, -5})},
                                      1.0);
    case 2:
      return detail::heron_with_cubes(ProxFn::ball(vec({0, 2, 0}), 1.0), 3,
                                      {vec({0, -4, 0}), vec({-4, 2, -3}), vec({-3, -4, 2}),
                                       vec({-5, 4, 4}), vec({-1, 8, 1})},
                                      2.0);
    case 3:
      return detail::heron_with_cubes(ProxFn::line(vec({1, 6}), vec({1, 0})), 2,
                                      {vec({-6, -9}), vec({-5, 4}), vec({0, -7}), vec({1, 0}),
                                       vec({8, 8})},
                                      2.0);
    default:
      throw std::invalid_argument("heron_example: no example " + std::to_string(which));
  }
}

/// Reference initialisation for a Heron example and scheme.
struct HeronParams {
  double tau;
  double sigma;  // same for every term
  double lambda;
  Vector x0;
};

inline HeronParams heron_defaults(int which, Scheme scheme) {
  using detail::vec;
  const bool first = scheme == Scheme::dr1;
  switch (which) {
    case 1: return first ? HeronParams{0.24, 0.5, 1.8, vec({5, -2})} : HeronParams{0.24, 0.1, 1.8, vec({5, -2})};
    case 2: return first ? HeronParams{0.99, 0.4, 1.8, vec({0, 2, 0})} : HeronParams{0.59, 0.05, 1.8, vec({0, 2, 0})};
    case 3: return first ? HeronParams{3.99, 0.1, 1.7, vec({-1, 6})} : HeronParams{0.49, 0.1, 1.7, vec({-1, 6})};
    default:
      throw std::invalid_argument("heron_defaults: no example " + std::to_string(which));
  }
}

// ===========================================================================
// Image deblurring:
//   min ||Ax - b||_1 + alpha2 ||Wx||_1 + alpha1 TV(x) + delta_[0,1]^n(x)
// ===========================================================================

/// Discrete isotropic total variation, evaluated term by term: interior
/// pixels contribute the Euclidean norm of both forward differences, the
/// last column and the last row contribute single absolute differences.
inline double tv(const ImageGrid& x) {
  const auto M = x.rows, N = x.cols;
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < M; ++i)
    for (std::size_t j = 0; j + 1 < N; ++j)
      s += std::hypot(x(i + 1, j) - x(i, j), x(i, j + 1) - x(i, j));
  for (std::size_t i = 0; i + 1 < M; ++i) s += std::abs(x(i + 1, N - 1) - x(i, N - 1));
  for (std::size_t j = 0; j + 1 < N; ++j) s += std::abs(x(M - 1, j + 1) - x(M - 1, j));
  return s;
}

/// ||(p, q)||_x = sum_ij sqrt(p_ij^2 + q_ij^2).
inline double cross_norm(const Vector& p, const Vector& q) {
  require(p.size() == q.size(), "cross_norm: size mismatch");
  double s = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k) s += std::hypot(p[k], q[k]);
  return s;
}

struct DeblurSpec {
  ImageGrid observed;
  double alpha1 = 3e-3;
  double alpha2 = 2e-5;
  LinOp blur;
  LinOp wavelet;
  LinOp grad;
  std::optional<ImageGrid> clean;
};

/// Alternative declared bound for the wavelet term, giving sigma_2 * 2^-16 in
/// the step recipe. It understates the true norm of the orthonormal transform.
inline constexpr double kSmallWaveletNorm = 1.0 / 256.0;

struct DeblurParams {
  double alpha1 = 3e-3;
  double alpha2 = 2e-5;
  std::size_t kernel_size = 9;
  double blur_std = 4.0;
  double noise_std = 1e-3;
  std::uint64_t noise_seed = 42;
  /// Declared norm bound of the wavelet operator used in step arithmetic.
  /// The first scheme diverges on the default instance with kSmallWaveletNorm.
  double wavelet_norm = 1.0;
};

/// Operators for an M x N grid. Both dimensions must be multiples of 16.
inline DeblurSpec make_deblur_spec(ImageGrid observed, const DeblurParams& p,
                                   std::optional<ImageGrid> clean = std::nullopt) {
  const auto M = observed.rows, N = observed.cols;
  LinOp w = haar_op(M, N);
  if (p.wavelet_norm != w.norm_bound()) w = w.with_norm_bound(p.wavelet_norm);
  return DeblurSpec{std::move(observed), p.alpha1, p.alpha2, gaussian_blur_op(M, N, p.kernel_size, p.blur_std),
                    std::move(w), gradient_op(M, N), std::move(clean)};
}

inline double deblur_objective(const DeblurSpec& spec, const ImageGrid& x) {
  require(x.rows == spec.observed.rows && x.cols == spec.observed.cols,
          "deblur_objective: grid mismatch");
  const double lo = x.pixels.minCoeff(), hi = x.pixels.maxCoeff();
  if (lo < -kMembershipSlack || hi > 1.0 + kMembershipSlack) return kInfeasible;
  const double fit = (spec.blur.apply(x.pixels) - spec.observed.pixels).lpNorm<1>();
  const double wav = spec.wavelet.apply(x.pixels).lpNorm<1>();
  return fit + spec.alpha2 * wav + spec.alpha1 * tv(x);
}

/// 10 log10(||clean - observed||^2 / ||clean - current||^2); +inf when current == clean.
inline double isnr(const ImageGrid& clean, const ImageGrid& observed, const ImageGrid& current) {
  require(clean.size() == observed.size() && clean.size() == current.size(), "isnr: size mismatch");
  const double den = (clean.pixels - current.pixels).squaredNorm();
  if (den == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10((clean.pixels - observed.pixels).squaredNorm() / den);
}

/// m = 3 terms (A, ||. - b||_1), (W, alpha2 ||.||_1), (L, alpha1 ||.||_x), each
/// with the zero-point reduction for D_i; f = delta_[0,1]^n, z = 0, r_i = 0.
inline ProblemSpec deblur_build(const DeblurSpec& spec) {
  const auto M = spec.observed.rows, N = spec.observed.cols;
  const auto n = static_cast<Eigen::Index>(M * N);
  require(spec.blur.in_dim() == M * N && spec.wavelet.in_dim() == M * N && spec.grad.in_dim() == M * N,
          "deblur_build: operator dimensions do not match the grid");
  std::vector<ProxTerm> terms{
      ProxTerm{spec.blur, ProxFn::weighted_l1(1.0, spec.observed.pixels), ProxFn::zero_point(),
               Vector::Zero(n)},
      ProxTerm{spec.wavelet, ProxFn::weighted_l1(spec.alpha2), ProxFn::zero_point(), Vector::Zero(n)},
      ProxTerm{spec.grad, ProxFn::iso_norm(spec.alpha1, M, N), ProxFn::zero_point(),
               Vector::Zero(2 * n)},
  };
  return make_prox_problem(ProxFn::box(M * N, 0.0, 1.0), Vector::Zero(n), terms);
}

/// Reference step recipe: sigmas fixed, tau = budget / (s1 ||A||^2 + s2 ||W||^2 + s3 ||L||^2) - 0.01.
struct DeblurSteps {
  Scheme scheme;
  double tau;
  std::vector<double> sigmas;
  double lambda;
};

inline DeblurSteps deblur_defaults(const DeblurSpec& spec, Scheme scheme) {
  const double a = spec.blur.norm_bound(), w = spec.wavelet.norm_bound(), l = spec.grad.norm_bound();
  auto recipe = [&](Scheme s, std::vector<double> sg, double lambda) {
    const double denom = sg[0] * a * a + sg[1] * w * w + sg[2] * l * l;
    return DeblurSteps{s, step_budget(s) / denom - 0.01, std::move(sg), lambda};
  };
  if (scheme == Scheme::dr1) return recipe(Scheme::dr1, {1.0, 1.0, 0.05}, 1.5);
  // The second scheme runs in its reduced form (every D_i is the zero-point reduction).
  return recipe(Scheme::dr2_reduced, {1.0, 0.05, 0.05}, 1.6);
}

/// 64 x 64 style test image: 8-pixel checkerboard on a horizontal ramp, values in [0.1, 0.9].
inline ImageGrid synthetic_image(std::size_t rows = 64, std::size_t cols = 64) {
  ImageGrid g = ImageGrid::constant(rows, cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      const double ramp = cols > 1 ? static_cast<double>(j) / static_cast<double>(cols - 1) : 0.0;
      const double check = ((i / 8 + j / 8) % 2 == 0) ? 0.0 : 0.5;
      g(i, j) = 0.1 + check + 0.3 * ramp;
    }
  return g;
}

/// b = A x + white Gaussian noise (seeded).
inline ImageGrid degrade(const ImageGrid& clean, const LinOp& blur, double noise_std, std::uint64_t seed) {
  Vector b = blur.apply(clean.pixels);
  if (noise_std > 0.0) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd(0.0, noise_std);
    for (Eigen::Index k = 0; k < b.size(); ++k) b[k] += nd(gen);
  }
  return ImageGrid(clean.rows, clean.cols, std::move(b));
}

/// Reflexive padding up to the next multiple of `multiple` in each direction
/// (added at the bottom and right).
struct PaddedImage {
  ImageGrid image;
  std::size_t pad_rows = 0, pad_cols = 0;
};

inline PaddedImage pad_reflexive(const ImageGrid& x, std::size_t multiple = 16) {
  auto up = [multiple](std::size_t v) { return (v + multiple - 1) / multiple * multiple; };
  const std::size_t M = up(x.rows), N = up(x.cols);
  ImageGrid out = ImageGrid::constant(M, N, 0.0);
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t j = 0; j < N; ++j)
      out(i, j) = x(detail::reflect_index(static_cast<long>(i), static_cast<long>(x.rows)),
                    detail::reflect_index(static_cast<long>(j), static_cast<long>(x.cols)));
  return {std::move(out), M - x.rows, N - x.cols};
}

inline ImageGrid crop(const ImageGrid& x, std::size_t rows, std::size_t cols) {
  require(rows <= x.rows && cols <= x.cols, "crop: target larger than image");
  ImageGrid out = ImageGrid::constant(rows, cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out(i, j) = x(i, j);
  return out;
}

}  // namespace proxsplit
