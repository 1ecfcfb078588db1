#pragma once

#include "proxsplit/core.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace proxsplit {

/// Bounded linear map H -> G with its adjoint and a declared upper bound on
/// the operator norm. Immutable after construction.
class LinOp {
 public:
  using Map = std::function<Vector(const Vector&)>;

  LinOp(std::size_t in_dim, std::size_t out_dim, Map apply, Map adjoint, double norm_bound,
        std::string name = "linop")
      : in_dim_(in_dim),
        out_dim_(out_dim),
        apply_(std::move(apply)),
        adjoint_(std::move(adjoint)),
        norm_bound_(norm_bound),
        name_(std::move(name)) {
    require(in_dim_ > 0 && out_dim_ > 0, "LinOp: dimensions must be positive");
    require(norm_bound_ >= 0.0 && std::isfinite(norm_bound_), "LinOp: invalid norm bound");
  }

  std::size_t in_dim() const { return in_dim_; }
  std::size_t out_dim() const { return out_dim_; }
  double norm_bound() const { return norm_bound_; }
  const std::string& name() const { return name_; }

  Vector apply(const Vector& x) const {
    require(static_cast<std::size_t>(x.size()) == in_dim_, name_ + ": apply dimension mismatch");
    return apply_(x);
  }
  Vector adjoint(const Vector& y) const {
    require(static_cast<std::size_t>(y.size()) == out_dim_, name_ + ": adjoint dimension mismatch");
    return adjoint_(y);
  }

  /// Same operator, different declared norm.
  LinOp with_norm_bound(double bound) const {
    LinOp op = *this;
    require(bound >= 0.0 && std::isfinite(bound), "LinOp: invalid norm bound");
    op.norm_bound_ = bound;
    return op;
  }

 private:
  std::size_t in_dim_, out_dim_;
  Map apply_, adjoint_;
  double norm_bound_;
  std::string name_;
};

/// Call counters shared between an instrumented operator and its observer.
struct OpCounter {
  std::atomic<std::uint64_t> applies{0};
  std::atomic<std::uint64_t> adjoints{0};
  void reset() {
    applies = 0;
    adjoints = 0;
  }
};

inline LinOp instrumented(const LinOp& op, std::shared_ptr<OpCounter> counter) {
  return LinOp(
      op.in_dim(), op.out_dim(),
      [op, counter](const Vector& x) {
        ++counter->applies;
        return op.apply(x);
      },
      [op, counter](const Vector& y) {
        ++counter->adjoints;
        return op.adjoint(y);
      },
      op.norm_bound(), op.name());
}

// ---------------------------------------------------------------------------
// Basic operators
// ---------------------------------------------------------------------------

inline LinOp identity_op(std::size_t n) {
  return LinOp(
      n, n, [](const Vector& x) { return x; }, [](const Vector& y) { return y; }, 1.0, "identity");
}

/// Dense matrix; the declared bound is its largest singular value.
inline LinOp matrix_op(const Eigen::MatrixXd& m) {
  require(m.rows() > 0 && m.cols() > 0, "matrix_op: empty matrix");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const double smax = svd.singularValues()(0);
  // Round-off in the SVD can sit a few ulps under the true value.
  const double bound = smax * (1.0 + 1e-12);
  return LinOp(
      static_cast<std::size_t>(m.cols()), static_cast<std::size_t>(m.rows()),
      [m](const Vector& x) -> Vector { return m * x; },
      [m](const Vector& y) -> Vector { return m.transpose() * y; }, bound, "matrix");
}

inline LinOp diagonal_op(const Vector& d) {
  require(d.size() > 0, "diagonal_op: empty diagonal");
  const auto n = static_cast<std::size_t>(d.size());
  return LinOp(
      n, n, [d](const Vector& x) -> Vector { return d.cwiseProduct(x); },
      [d](const Vector& y) -> Vector { return d.cwiseProduct(y); }, d.cwiseAbs().maxCoeff(),
      "diagonal");
}

// ---------------------------------------------------------------------------
// Images
// ---------------------------------------------------------------------------

/// Grayscale image stored row-major; pixel (i, j) lives at i*cols + j.
struct ImageGrid {
  std::size_t rows = 0, cols = 0;
  Vector pixels;

  ImageGrid() = default;
  ImageGrid(std::size_t r, std::size_t c, Vector px) : rows(r), cols(c), pixels(std::move(px)) {
    require(r > 0 && c > 0, "ImageGrid: empty grid");
    require(static_cast<std::size_t>(pixels.size()) == r * c, "ImageGrid: pixel count mismatch");
  }
  static ImageGrid constant(std::size_t r, std::size_t c, double v) {
    return ImageGrid(r, c, Vector::Constant(static_cast<Eigen::Index>(r * c), v));
  }

  double operator()(std::size_t i, std::size_t j) const {
    return pixels[static_cast<Eigen::Index>(i * cols + j)];
  }
  double& operator()(std::size_t i, std::size_t j) {
    return pixels[static_cast<Eigen::Index>(i * cols + j)];
  }
  std::size_t size() const { return rows * cols; }
};

/// Forward differences (L1 x)_{ij} = x_{i+1,j} - x_{ij} (zero on the last
/// row) and (L2 x)_{ij} = x_{i,j+1} - x_{ij} (zero on the last column).
inline std::pair<Vector, Vector> gradient_apply(const ImageGrid& x) {
  const auto M = x.rows, N = x.cols;
  Vector p = Vector::Zero(static_cast<Eigen::Index>(M * N));
  Vector q = Vector::Zero(static_cast<Eigen::Index>(M * N));
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t j = 0; j < N; ++j) {
      const auto k = static_cast<Eigen::Index>(i * N + j);
      if (i + 1 < M) p[k] = x(i + 1, j) - x(i, j);
      if (j + 1 < N) q[k] = x(i, j + 1) - x(i, j);
    }
  return {std::move(p), std::move(q)};
}

/// Adjoint of gradient_apply (negative divergence).
inline ImageGrid gradient_adjoint(const Vector& p, const Vector& q, std::size_t rows,
                                  std::size_t cols) {
  require(static_cast<std::size_t>(p.size()) == rows * cols &&
              static_cast<std::size_t>(q.size()) == rows * cols,
          "gradient_adjoint: field dimension mismatch");
  ImageGrid out = ImageGrid::constant(rows, cols, 0.0);
  auto at = [cols](std::size_t i, std::size_t j) { return static_cast<Eigen::Index>(i * cols + j); };
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      double s = 0.0;
      if (i + 1 < rows) s -= p[at(i, j)];
      if (i > 0) s += p[at(i - 1, j)];
      if (j + 1 < cols) s -= q[at(i, j)];
      if (j > 0) s += q[at(i, j - 1)];
      out(i, j) = s;
    }
  return out;
}

/// Gradient as an operator R^{MN} -> R^{2MN} with output (p; q).
/// Declared bound sqrt(8), from ||L||^2 <= 8.
inline LinOp gradient_op(std::size_t rows, std::size_t cols) {
  require(rows > 0 && cols > 0, "gradient_op: empty grid");
  const auto n = rows * cols;
  return LinOp(
      n, 2 * n,
      [rows, cols](const Vector& x) -> Vector {
        auto [p, q] = gradient_apply(ImageGrid(rows, cols, x));
        Vector out(p.size() + q.size());
        out << p, q;
        return out;
      },
      [rows, cols, n](const Vector& y) -> Vector {
        const auto k = static_cast<Eigen::Index>(n);
        return gradient_adjoint(y.head(k), y.tail(k), rows, cols).pixels;
      },
      std::sqrt(8.0), "gradient");
}

// ---------------------------------------------------------------------------
// Orthonormal 2-D Haar transform (Mallat layout: coarse block top-left)
// ---------------------------------------------------------------------------

inline constexpr std::size_t kHaarLevels = 4;

namespace detail {

inline void haar_check(std::size_t rows, std::size_t cols, std::size_t levels) {
  const std::size_t q = std::size_t{1} << levels;
  require(rows % q == 0 && cols % q == 0,
          "haar: grid " + std::to_string(rows) + "x" + std::to_string(cols) +
              " is not divisible by " + std::to_string(q));
}

// One analysis/synthesis pass along a strided line of even length.
inline void haar_line(double* base, std::size_t len, std::size_t stride, std::vector<double>& tmp,
                      bool inverse) {
  const double s = 1.0 / std::sqrt(2.0);
  const std::size_t h = len / 2;
  tmp.resize(len);
  if (!inverse) {
    for (std::size_t k = 0; k < h; ++k) {
      const double a = base[(2 * k) * stride], b = base[(2 * k + 1) * stride];
      tmp[k] = s * (a + b);
      tmp[h + k] = s * (a - b);
    }
  } else {
    for (std::size_t k = 0; k < h; ++k) {
      const double a = base[k * stride], d = base[(h + k) * stride];
      tmp[2 * k] = s * (a + d);
      tmp[2 * k + 1] = s * (a - d);
    }
  }
  for (std::size_t k = 0; k < len; ++k) base[k * stride] = tmp[k];
}

}  // namespace detail

inline Vector haar_forward(const ImageGrid& x, std::size_t levels = kHaarLevels) {
  detail::haar_check(x.rows, x.cols, levels);
  Vector c = x.pixels;
  std::vector<double> tmp;
  std::size_t h = x.rows, w = x.cols;
  for (std::size_t l = 0; l < levels; ++l) {
    for (std::size_t i = 0; i < h; ++i) detail::haar_line(c.data() + i * x.cols, w, 1, tmp, false);
    for (std::size_t j = 0; j < w; ++j) detail::haar_line(c.data() + j, h, x.cols, tmp, false);
    h /= 2;
    w /= 2;
  }
  return c;
}

/// Inverse of haar_forward; equal to its adjoint since the transform is orthonormal.
inline ImageGrid haar_adjoint(const Vector& coeffs, std::size_t rows, std::size_t cols,
                              std::size_t levels = kHaarLevels) {
  detail::haar_check(rows, cols, levels);
  require(static_cast<std::size_t>(coeffs.size()) == rows * cols, "haar_adjoint: size mismatch");
  Vector x = coeffs;
  std::vector<double> tmp;
  for (std::size_t l = levels; l-- > 0;) {
    const std::size_t h = rows >> l, w = cols >> l;
    for (std::size_t j = 0; j < w; ++j) detail::haar_line(x.data() + j, h, cols, tmp, true);
    for (std::size_t i = 0; i < h; ++i) detail::haar_line(x.data() + i * cols, w, 1, tmp, true);
  }
  return ImageGrid(rows, cols, std::move(x));
}

/// Haar analysis operator. The true norm is 1; callers reproducing other
/// parameter arithmetic can override the declared bound with with_norm_bound.
inline LinOp haar_op(std::size_t rows, std::size_t cols, std::size_t levels = kHaarLevels) {
  detail::haar_check(rows, cols, levels);
  const auto n = rows * cols;
  return LinOp(
      n, n,
      [rows, cols, levels](const Vector& x) { return haar_forward(ImageGrid(rows, cols, x), levels); },
      [rows, cols, levels](const Vector& c) { return haar_adjoint(c, rows, cols, levels).pixels; },
      1.0, "haar");
}

// ---------------------------------------------------------------------------
// Gaussian blur with reflexive boundary
// ---------------------------------------------------------------------------

namespace detail {

/// Symmetric extension with the edge sample repeated: -1 -> 0, n -> n-1.
inline std::size_t reflect_index(long idx, long n) {
  const long period = 2 * n;
  long j = idx % period;
  if (j < 0) j += period;
  if (j >= n) j = period - 1 - j;
  return static_cast<std::size_t>(j);
}

inline std::vector<double> gaussian_kernel_1d(std::size_t size, double sd) {
  const long r = static_cast<long>(size / 2);
  std::vector<double> k(size);
  double s = 0.0;
  for (long t = -r; t <= r; ++t) {
    k[static_cast<std::size_t>(t + r)] = std::exp(-static_cast<double>(t * t) / (2.0 * sd * sd));
    s += k[static_cast<std::size_t>(t + r)];
  }
  for (auto& v : k) v /= s;
  return k;
}

// Convolve every line along one axis. `transpose` scatters instead of
// gathers, giving the exact adjoint of the gather pass.
inline Vector blur_axis(const Vector& x, std::size_t rows, std::size_t cols,
                        const std::vector<double>& k, bool along_rows, bool transpose) {
  const long r = static_cast<long>(k.size() / 2);
  const std::size_t lines = along_rows ? rows : cols;
  const std::size_t len = along_rows ? cols : rows;
  const std::size_t step = along_rows ? 1 : cols;
  Vector y = Vector::Zero(x.size());
  for (std::size_t l = 0; l < lines; ++l) {
    const std::size_t off = along_rows ? l * cols : l;
    for (std::size_t t = 0; t < len; ++t) {
      for (long o = -r; o <= r; ++o) {
        const std::size_t src = reflect_index(static_cast<long>(t) + o, static_cast<long>(len));
        const double w = k[static_cast<std::size_t>(o + r)];
        const auto a = static_cast<Eigen::Index>(off + t * step);
        const auto b = static_cast<Eigen::Index>(off + src * step);
        if (!transpose) y[a] += w * x[b];
        else y[b] += w * x[a];
      }
    }
  }
  return y;
}

}  // namespace detail

/// Separable Gaussian blur, kernel normalized to sum 1, reflexive boundary.
/// Symmetric kernel + symmetric extension makes the operator self-adjoint;
/// it is nonnegative with unit row sums, so its norm is at most 1.
inline LinOp gaussian_blur_op(std::size_t rows, std::size_t cols, std::size_t kernel_size,
                              double sd) {
  require(kernel_size % 2 == 1, "gaussian_blur: kernel size must be odd");
  require(sd > 0.0, "gaussian_blur: standard deviation must be positive");
  require(rows > 0 && cols > 0, "gaussian_blur: empty grid");
  const auto k = detail::gaussian_kernel_1d(kernel_size, sd);
  const auto n = rows * cols;
  return LinOp(
      n, n,
      [=](const Vector& x) {
        return detail::blur_axis(detail::blur_axis(x, rows, cols, k, true, false), rows, cols, k,
                                 false, false);
      },
      [=](const Vector& y) {
        return detail::blur_axis(detail::blur_axis(y, rows, cols, k, false, true), rows, cols, k,
                                 true, true);
      },
      1.0, "gaussian-blur");
}

// ---------------------------------------------------------------------------

/// Power iteration on adjoint∘apply from a seeded start. Returns a lower
/// estimate of ||op|| that does not decrease with `iters`; 0 for the zero map.
inline double op_norm_estimate(const LinOp& op, std::size_t iters, std::uint64_t seed = 1) {
  require(iters >= 1, "op_norm_estimate: iters must be >= 1");
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Vector x(static_cast<Eigen::Index>(op.in_dim()));
  for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = nd(gen);
  x /= x.norm();
  double best = 0.0;
  for (std::size_t it = 0; it < iters; ++it) {
    const Vector y = op.apply(x);
    const double est = y.norm();
    best = std::max(best, est);
    if (est == 0.0) break;
    Vector z = op.adjoint(y);
    const double zn = z.norm();
    if (zn == 0.0) break;
    x = z / zn;
  }
  return best;
}

}  // namespace proxsplit
