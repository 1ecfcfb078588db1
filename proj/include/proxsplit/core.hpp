#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace proxsplit {

using Vector = Eigen::VectorXd;

/// Throws std::invalid_argument with `what` unless `ok`.
inline void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline double dot(const Vector& u, const Vector& v) {
  require(u.size() == v.size(), "dot: dimension mismatch (" + std::to_string(u.size()) +
                                    " vs " + std::to_string(v.size()) + ")");
  return u.dot(v);
}

// ---------------------------------------------------------------------------
// BlockVector: an element of G_1 x ... x G_m with the block-sum inner product.
// ---------------------------------------------------------------------------
class BlockVector {
 public:
  BlockVector() = default;
  explicit BlockVector(std::vector<Vector> blocks) : blocks_(std::move(blocks)) {}

  static BlockVector zeros(const std::vector<std::size_t>& signature) {
    std::vector<Vector> b;
    b.reserve(signature.size());
    for (auto d : signature) b.push_back(Vector::Zero(static_cast<Eigen::Index>(d)));
    return BlockVector(std::move(b));
  }

  std::size_t size() const { return blocks_.size(); }
  const Vector& operator[](std::size_t i) const { return blocks_.at(i); }
  Vector& operator[](std::size_t i) { return blocks_.at(i); }
  const std::vector<Vector>& blocks() const { return blocks_; }

  std::vector<std::size_t> signature() const {
    std::vector<std::size_t> s;
    s.reserve(blocks_.size());
    for (const auto& b : blocks_) s.push_back(static_cast<std::size_t>(b.size()));
    return s;
  }

  double dot(const BlockVector& other) const {
    require(signature() == other.signature(), "BlockVector::dot: signature mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < blocks_.size(); ++i) s += blocks_[i].dot(other.blocks_[i]);
    return s;
  }

  double squared_norm() const {
    double s = 0.0;
    for (const auto& b : blocks_) s += b.squaredNorm();
    return s;
  }
  double norm() const { return std::sqrt(squared_norm()); }

  bool all_finite() const {
    for (const auto& b : blocks_)
      if (!b.allFinite()) return false;
    return true;
  }

  BlockVector operator-(const BlockVector& other) const {
    require(signature() == other.signature(), "BlockVector: signature mismatch");
    std::vector<Vector> r;
    r.reserve(blocks_.size());
    for (std::size_t i = 0; i < blocks_.size(); ++i) r.push_back(blocks_[i] - other.blocks_[i]);
    return BlockVector(std::move(r));
  }
  BlockVector operator+(const BlockVector& other) const {
    require(signature() == other.signature(), "BlockVector: signature mismatch");
    std::vector<Vector> r;
    r.reserve(blocks_.size());
    for (std::size_t i = 0; i < blocks_.size(); ++i) r.push_back(blocks_[i] + other.blocks_[i]);
    return BlockVector(std::move(r));
  }
  BlockVector operator*(double s) const {
    std::vector<Vector> r;
    r.reserve(blocks_.size());
    for (const auto& b : blocks_) r.push_back(s * b);
    return BlockVector(std::move(r));
  }

 private:
  std::vector<Vector> blocks_;
};

// ---------------------------------------------------------------------------
// Step parameters
// ---------------------------------------------------------------------------

/// Which iteration a configuration is meant for. Each has its own step budget
/// for tau * sum_i sigma_i ||L_i||^2.
enum class Scheme { dr1, dr2, dr2_reduced };

inline double step_budget(Scheme s) {
  switch (s) {
    case Scheme::dr1: return 4.0;
    case Scheme::dr2: return 0.25;
    case Scheme::dr2_reduced: return 1.0;
  }
  return 0.0;
}

inline std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::dr1: return "dr1";
    case Scheme::dr2: return "dr2";
    case Scheme::dr2_reduced: return "dr2-reduced";
  }
  return "?";
}

inline Scheme scheme_from_string(const std::string& s) {
  if (s == "dr1") return Scheme::dr1;
  if (s == "dr2") return Scheme::dr2;
  if (s == "dr2-reduced" || s == "dr2_reduced") return Scheme::dr2_reduced;
  throw std::invalid_argument("unknown algorithm '" + s + "' (expected dr1, dr2, dr2-reduced)");
}

using LambdaSchedule = std::function<double(std::size_t)>;

inline LambdaSchedule constant_lambda(double lambda) {
  return [lambda](std::size_t) { return lambda; };
}

/// Step sizes, relaxation and iteration cap. The budget inequality is checked
/// against a concrete problem by solvers::make_step_config / validate_steps.
struct StepConfig {
  double tau = 1.0;
  std::vector<double> sigmas;
  LambdaSchedule lambda = constant_lambda(1.0);
  std::size_t max_iters = 1;
  Scheme scheme = Scheme::dr1;
  /// Upper bound on worker threads used for the per-term loops.
  unsigned threads = 1;

  double bound_budget() const { return step_budget(scheme); }
};

// ---------------------------------------------------------------------------
// Error schedules
// ---------------------------------------------------------------------------

/// Dimensions of H and of each G_i.
struct SpaceSignature {
  std::size_t primal_dim = 0;
  std::vector<std::size_t> dual_dims;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline Vector random_unit(std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Vector v(static_cast<Eigen::Index>(dim));
  double n = 0.0;
  while (n == 0.0) {
    for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = nd(gen);
    n = v.norm();
  }
  return v / n;
}

}  // namespace detail

/// Additive perturbations a_n (in H), b_{i,n} and d_{i,n} (in G_i) injected
/// after the resolvent evaluations of the splitting schemes. Each vector has
/// norm c (n+1)^(-p) along a pseudorandom unit direction fixed by the seed.
class ErrorSchedule {
 public:
  /// The all-zero schedule; solvers skip the additions entirely.
  static ErrorSchedule exact() { return ErrorSchedule(); }

  bool is_exact() const { return scale_ == 0.0; }
  double scale() const { return scale_; }
  double exponent() const { return exponent_; }

  double magnitude(std::size_t n) const {
    if (is_exact()) return 0.0;
    return scale_ * std::pow(static_cast<double>(n) + 1.0, -exponent_);
  }

  Vector a(std::size_t n) const { return draw(0, 0, n, sig_.primal_dim); }
  Vector b(std::size_t i, std::size_t n) const { return draw(1, i, n, sig_.dual_dims.at(i)); }
  Vector d(std::size_t i, std::size_t n) const { return draw(2, i, n, sig_.dual_dims.at(i)); }

  /// c * zeta(p) <= c * p / (p - 1): bound on sum_n ||a_n|| over all n.
  double summability_bound() const {
    if (is_exact()) return 0.0;
    return scale_ * exponent_ / (exponent_ - 1.0);
  }

  const SpaceSignature& signature() const { return sig_; }

  friend ErrorSchedule make_power_error_schedule(double c, double p, SpaceSignature dims,
                                                 std::uint64_t seed);

 private:
  Vector draw(std::uint64_t kind, std::size_t i, std::size_t n, std::size_t dim) const {
    if (is_exact()) return Vector::Zero(static_cast<Eigen::Index>(dim));
    std::uint64_t h = detail::splitmix64(seed_);
    h = detail::splitmix64(h ^ kind);
    h = detail::splitmix64(h ^ static_cast<std::uint64_t>(i));
    h = detail::splitmix64(h ^ static_cast<std::uint64_t>(n));
    return magnitude(n) * detail::random_unit(dim, h);
  }

  double scale_ = 0.0;
  double exponent_ = 2.0;
  std::uint64_t seed_ = 0;
  SpaceSignature sig_;
};

inline ErrorSchedule make_power_error_schedule(double c, double p, SpaceSignature dims,
                                               std::uint64_t seed) {
  require(p > 1.0, "error schedule exponent must exceed 1 (got " + std::to_string(p) +
                       "); the schedule would not be summable");
  require(c >= 0.0 && std::isfinite(c), "error schedule scale must be finite and >= 0");
  ErrorSchedule s;
  s.scale_ = c;
  s.exponent_ = p;
  s.seed_ = seed;
  s.sig_ = std::move(dims);
  return s;
}

// ---------------------------------------------------------------------------
// Iterate log
// ---------------------------------------------------------------------------

struct LogRow {
  std::size_t n = 0;
  Vector primal;
  BlockVector duals;
  std::optional<double> objective;
  double step_residual = 0.0;
};

class IterateLog {
 public:
  void push(LogRow row) {
    require(rows_.empty() || row.n > rows_.back().n, "IterateLog: rows must be increasing in n");
    rows_.push_back(std::move(row));
  }
  const std::vector<LogRow>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }
  const LogRow& back() const { return rows_.back(); }

 private:
  std::vector<LogRow> rows_;
};

}  // namespace proxsplit
