#pragma once

#include "proxsplit/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <variant>

namespace proxsplit {

/// Value returned by eval() outside the domain of an indicator.
inline constexpr double kInfeasible = std::numeric_limits<double>::infinity();

/// Slack used when deciding set membership in eval().
inline constexpr double kMembershipSlack = 1e-12;

namespace kinds {

/// delta of the box [lo, hi] (coordinatewise).
struct Box {
  Vector lo, hi;
};
/// delta of the closed ball B(center, radius).
struct Ball {
  Vector center;
  double radius;
};
/// delta of the line {base + t dir}.
struct AffineLine {
  Vector base, dir;
};
/// delta_{0}; the conjugate is the zero function.
struct ZeroPoint {};
/// alpha ||y - shift||_1; an empty shift means zero.
struct WeightedL1 {
  double alpha;
  Vector shift;
};
/// ||y||_2
struct EuclNorm {};
/// alpha * sum_pixels sqrt(p^2 + q^2) on the stacked field (p; q), p and q of
/// length rows*cols each.
struct IsoNorm {
  double alpha;
  std::size_t rows, cols;
};

}  // namespace kinds

class ProxFn;

namespace kinds {
/// f + <tilt, .>
struct Tilted {
  std::shared_ptr<const ProxFn> base;
  Vector tilt;
};
}  // namespace kinds

/// A closed convex function known through its proximal map.
class ProxFn {
 public:
  using Kind = std::variant<kinds::Box, kinds::Ball, kinds::AffineLine, kinds::ZeroPoint,
                            kinds::WeightedL1, kinds::EuclNorm, kinds::IsoNorm, kinds::Tilted>;

  explicit ProxFn(Kind k) : kind_(std::move(k)) {}

  static ProxFn box(Vector lo, Vector hi) {
    require(lo.size() == hi.size(), "box: bound dimension mismatch");
    require((lo.array() <= hi.array()).all(), "box: lo must not exceed hi");
    return ProxFn(kinds::Box{std::move(lo), std::move(hi)});
  }
  static ProxFn box(std::size_t dim, double lo, double hi) {
    const auto n = static_cast<Eigen::Index>(dim);
    return box(Vector::Constant(n, lo), Vector::Constant(n, hi));
  }
  /// Axis-aligned square/cube given by its center and side length.
  static ProxFn cube(const Vector& center, double side) {
    require(side > 0.0, "cube: side must be positive");
    const Vector h = Vector::Constant(center.size(), side / 2.0);
    return box(center - h, center + h);
  }
  static ProxFn ball(Vector center, double radius) {
    require(radius > 0.0, "ball: radius must be positive");
    return ProxFn(kinds::Ball{std::move(center), radius});
  }
  static ProxFn line(Vector base, Vector dir) {
    require(base.size() == dir.size(), "line: dimension mismatch");
    require(dir.squaredNorm() > 0.0, "line: direction must be nonzero");
    return ProxFn(kinds::AffineLine{std::move(base), std::move(dir)});
  }
  static ProxFn zero_point() { return ProxFn(kinds::ZeroPoint{}); }
  static ProxFn weighted_l1(double alpha, Vector shift = {}) {
    require(alpha > 0.0, "weighted_l1: alpha must be positive");
    return ProxFn(kinds::WeightedL1{alpha, std::move(shift)});
  }
  static ProxFn eucl_norm() { return ProxFn(kinds::EuclNorm{}); }
  static ProxFn iso_norm(double alpha, std::size_t rows, std::size_t cols) {
    require(alpha > 0.0, "iso_norm: alpha must be positive");
    require(rows > 0 && cols > 0, "iso_norm: empty grid");
    return ProxFn(kinds::IsoNorm{alpha, rows, cols});
  }
  static ProxFn tilted(ProxFn base, Vector tilt) {
    return ProxFn(kinds::Tilted{std::make_shared<const ProxFn>(std::move(base)), std::move(tilt)});
  }

  const Kind& kind() const { return kind_; }

  bool is_indicator() const {
    return std::holds_alternative<kinds::Box>(kind_) || std::holds_alternative<kinds::Ball>(kind_) ||
           std::holds_alternative<kinds::AffineLine>(kind_) ||
           std::holds_alternative<kinds::ZeroPoint>(kind_);
  }

  std::string name() const {
    return std::visit(
        [](const auto& k) -> std::string {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, kinds::Box>) return "box";
          else if constexpr (std::is_same_v<K, kinds::Ball>) return "ball";
          else if constexpr (std::is_same_v<K, kinds::AffineLine>) return "line";
          else if constexpr (std::is_same_v<K, kinds::ZeroPoint>) return "zero-point";
          else if constexpr (std::is_same_v<K, kinds::WeightedL1>) return "weighted-l1";
          else if constexpr (std::is_same_v<K, kinds::EuclNorm>) return "eucl-norm";
          else if constexpr (std::is_same_v<K, kinds::IsoNorm>) return "iso-norm";
          else return "tilted(" + k.base->name() + ")";
        },
        kind_);
  }

 private:
  Kind kind_;
};

namespace detail {

inline Vector shift_or_zero(const Vector& shift, Eigen::Index n) {
  if (shift.size() == 0) return Vector::Zero(n);
  require(shift.size() == n, "weighted_l1: shift dimension mismatch");
  return shift;
}

/// prox of gamma*||.||: radial shrinkage toward the origin.
inline Vector shrink(const Vector& x, double t) {
  const double n = x.norm();
  if (n <= t) return Vector::Zero(x.size());
  return (1.0 - t / n) * x;
}

inline Vector soft_threshold(const Vector& x, double t) {
  return x.unaryExpr([t](double v) { return v > t ? v - t : (v < -t ? v + t : 0.0); });
}

inline Vector project_ball(const Vector& x, const Vector& c, double r) {
  require(x.size() == c.size(), "ball: dimension mismatch");
  const Vector d = x - c;
  const double n = d.norm();
  if (n <= r) return x;
  return c + (r / n) * d;
}

inline void check_iso_dims(const kinds::IsoNorm& k, const Vector& x) {
  require(static_cast<std::size_t>(x.size()) == 2 * k.rows * k.cols,
          "iso_norm: expected stacked field of length 2*rows*cols");
}

}  // namespace detail

/// Per-pixel projection of the field (p, q) onto discs of radius alpha:
/// (p_ij, q_ij) -> alpha (p_ij, q_ij) / max(alpha, |(p_ij, q_ij)|).
/// Pixels already inside the disc are returned unchanged.
inline std::pair<Vector, Vector> project_pixel_discs(double alpha, const Vector& p,
                                                     const Vector& q) {
  require(alpha > 0.0, "project_pixel_discs: alpha must be positive");
  require(p.size() == q.size(), "project_pixel_discs: p and q differ in size");
  Vector pp = p, qq = q;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    const double n = std::hypot(p[k], q[k]);
    if (n > alpha) {
      pp[k] = alpha * p[k] / n;
      qq[k] = alpha * q[k] / n;
    }
  }
  return {std::move(pp), std::move(qq)};
}

/// argmin_y { gamma f(y) + 1/2 ||y - x||^2 }.
inline Vector prox(const ProxFn& f, double gamma, const Vector& x) {
  require(gamma > 0.0, "prox: gamma must be positive");
  return std::visit(
      [&](const auto& k) -> Vector {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, kinds::Box>) {
          require(x.size() == k.lo.size(), "box: dimension mismatch");
          return x.cwiseMax(k.lo).cwiseMin(k.hi);
        } else if constexpr (std::is_same_v<K, kinds::Ball>) {
          return detail::project_ball(x, k.center, k.radius);
        } else if constexpr (std::is_same_v<K, kinds::AffineLine>) {
          require(x.size() == k.base.size(), "line: dimension mismatch");
          const double t = (x - k.base).dot(k.dir) / k.dir.squaredNorm();
          return k.base + t * k.dir;
        } else if constexpr (std::is_same_v<K, kinds::ZeroPoint>) {
          return Vector::Zero(x.size());
        } else if constexpr (std::is_same_v<K, kinds::WeightedL1>) {
          const Vector b = detail::shift_or_zero(k.shift, x.size());
          return b + detail::soft_threshold(x - b, gamma * k.alpha);
        } else if constexpr (std::is_same_v<K, kinds::EuclNorm>) {
          return detail::shrink(x, gamma);
        } else if constexpr (std::is_same_v<K, kinds::IsoNorm>) {
          detail::check_iso_dims(k, x);
          const auto n = static_cast<Eigen::Index>(k.rows * k.cols);
          const double t = gamma * k.alpha;
          Vector y = x;
          for (Eigen::Index j = 0; j < n; ++j) {
            const double r = std::hypot(x[j], x[n + j]);
            const double s = r <= t ? 0.0 : 1.0 - t / r;
            y[j] = s * x[j];
            y[n + j] = s * x[n + j];
          }
          return y;
        } else {
          require(x.size() == k.tilt.size(), "tilted: dimension mismatch");
          return prox(*k.base, gamma, x - gamma * k.tilt);
        }
      },
      f.kind());
}

/// prox of gamma f^*, the resolvent of gamma (df)^{-1}. Closed forms for every
/// kind; they agree with x - gamma prox(f, 1/gamma, x/gamma).
inline Vector prox_conjugate(const ProxFn& f, double gamma, const Vector& x) {
  require(gamma > 0.0, "prox_conjugate: gamma must be positive");
  return std::visit(
      [&](const auto& k) -> Vector {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, kinds::Box>) {
          // f^* is the support function sum_j max(lo_j p_j, hi_j p_j).
          require(x.size() == k.lo.size(), "box: dimension mismatch");
          Vector y(x.size());
          for (Eigen::Index j = 0; j < x.size(); ++j) {
            const double up = gamma * k.hi[j], dn = gamma * k.lo[j];
            y[j] = x[j] > up ? x[j] - up : (x[j] < dn ? x[j] - dn : 0.0);
          }
          return y;
        } else if constexpr (std::is_same_v<K, kinds::Ball>) {
          // f^*(p) = <c, p> + r ||p||
          require(x.size() == k.center.size(), "ball: dimension mismatch");
          return detail::shrink(x - gamma * k.center, gamma * k.radius);
        } else if constexpr (std::is_same_v<K, kinds::AffineLine>) {
          // f^*(p) = <base, p> + delta_{dir^perp}(p)
          require(x.size() == k.base.size(), "line: dimension mismatch");
          const Vector u = x - gamma * k.base;
          return u - (u.dot(k.dir) / k.dir.squaredNorm()) * k.dir;
        } else if constexpr (std::is_same_v<K, kinds::ZeroPoint>) {
          return x;
        } else if constexpr (std::is_same_v<K, kinds::WeightedL1>) {
          // f^*(p) = delta_{[-alpha, alpha]^n}(p) + <shift, p>
          const Vector b = detail::shift_or_zero(k.shift, x.size());
          return (x - gamma * b).cwiseMax(-k.alpha).cwiseMin(k.alpha);
        } else if constexpr (std::is_same_v<K, kinds::EuclNorm>) {
          return detail::project_ball(x, Vector::Zero(x.size()), 1.0);
        } else if constexpr (std::is_same_v<K, kinds::IsoNorm>) {
          detail::check_iso_dims(k, x);
          const auto n = static_cast<Eigen::Index>(k.rows * k.cols);
          auto [p, q] = project_pixel_discs(k.alpha, x.head(n), x.tail(n));
          Vector y(x.size());
          y << p, q;
          return y;
        } else {
          // (f + <t, .>)^*(p) = f^*(p - t)
          require(x.size() == k.tilt.size(), "tilted: dimension mismatch");
          return k.tilt + prox_conjugate(*k.base, gamma, x - k.tilt);
        }
      },
      f.kind());
}

/// Function value; indicators give 0 inside (with kMembershipSlack) and
/// kInfeasible outside.
inline double eval(const ProxFn& f, const Vector& x) {
  return std::visit(
      [&](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, kinds::Box>) {
          require(x.size() == k.lo.size(), "box: dimension mismatch");
          const bool in = ((x - k.lo).array() >= -kMembershipSlack).all() &&
                          ((k.hi - x).array() >= -kMembershipSlack).all();
          return in ? 0.0 : kInfeasible;
        } else if constexpr (std::is_same_v<K, kinds::Ball>) {
          return (x - k.center).norm() <= k.radius + kMembershipSlack ? 0.0 : kInfeasible;
        } else if constexpr (std::is_same_v<K, kinds::AffineLine>) {
          const Vector r = x - prox(ProxFn(k), 1.0, x);
          return r.norm() <= kMembershipSlack ? 0.0 : kInfeasible;
        } else if constexpr (std::is_same_v<K, kinds::ZeroPoint>) {
          return x.lpNorm<Eigen::Infinity>() <= kMembershipSlack ? 0.0 : kInfeasible;
        } else if constexpr (std::is_same_v<K, kinds::WeightedL1>) {
          return k.alpha * (x - detail::shift_or_zero(k.shift, x.size())).template lpNorm<1>();
        } else if constexpr (std::is_same_v<K, kinds::EuclNorm>) {
          return x.norm();
        } else if constexpr (std::is_same_v<K, kinds::IsoNorm>) {
          detail::check_iso_dims(k, x);
          const auto n = static_cast<Eigen::Index>(k.rows * k.cols);
          double s = 0.0;
          for (Eigen::Index j = 0; j < n; ++j) s += std::hypot(x[j], x[n + j]);
          return k.alpha * s;
        } else {
          return eval(*k.base, x) + dot(k.tilt, x);
        }
      },
      f.kind());
}

/// d(x; Omega) = ||x - P_Omega(x)|| for an indicator kind.
inline double distance_to_set(const ProxFn& omega, const Vector& x) {
  require(omega.is_indicator(), "distance_to_set: '" + omega.name() + "' is not an indicator");
  return (x - prox(omega, 1.0, x)).norm();
}

}  // namespace proxsplit
