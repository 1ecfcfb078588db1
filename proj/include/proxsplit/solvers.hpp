#pragma once

#include "proxsplit/core.hpp"
#include "proxsplit/linops.hpp"
#include "proxsplit/prox.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace proxsplit {

// ---------------------------------------------------------------------------
// Resolvent providers
// ---------------------------------------------------------------------------

/// Access to a maximally monotone operator M through J_{gM} and J_{gM^{-1}}.
/// Built either from a ProxFn (M = df) or from a raw resolvent map, in which
/// case the inverse resolvent comes from J_{gM^{-1}}(u) = u - g J_{M/g}(u/g).
class Resolvents {
 public:
  using Map = std::function<Vector(double, const Vector&)>;

  static Resolvents from_prox(const ProxFn& f) {
    Resolvents r;
    r.fwd_ = [f](double g, const Vector& x) { return prox(f, g, x); };
    r.inv_ = [f](double g, const Vector& x) { return prox_conjugate(f, g, x); };
    r.zero_point_ = std::holds_alternative<kinds::ZeroPoint>(f.kind());
    return r;
  }

  static Resolvents from_resolvent(Map fwd) {
    Resolvents r;
    r.fwd_ = fwd;
    r.inv_ = [fwd](double g, const Vector& u) -> Vector { return u - g * fwd(1.0 / g, u / g); };
    return r;
  }

  static Resolvents from_pair(Map fwd, Map inv) {
    Resolvents r;
    r.fwd_ = std::move(fwd);
    r.inv_ = std::move(inv);
    return r;
  }

  /// D with D(0) = G and D(v) empty otherwise, i.e. the subdifferential of
  /// delta_{0}. Its parallel sum with B leaves B unchanged.
  static Resolvents zero_point() { return from_prox(ProxFn::zero_point()); }

  Vector resolvent(double gamma, const Vector& x) const { return fwd_(gamma, x); }
  Vector inverse_resolvent(double gamma, const Vector& x) const { return inv_(gamma, x); }
  bool is_zero_point() const { return zero_point_; }

 private:
  Map fwd_, inv_;
  bool zero_point_ = false;
};

// ---------------------------------------------------------------------------
// Problem
// ---------------------------------------------------------------------------

/// One composite term L_i^* (B_i □ D_i)(L_i . - r_i).
struct Term {
  LinOp op;
  Resolvents b;
  Resolvents d;
  Vector shift;
};

/// Find x with z in A x + sum_i L_i^* (B_i □ D_i)(L_i x - r_i).
class ProblemSpec {
 public:
  ProblemSpec(Resolvents a, Vector z, std::vector<Term> terms)
      : a_(std::move(a)), z_(std::move(z)), terms_(std::move(terms)) {
    require(!terms_.empty(), "ProblemSpec: at least one composite term is required");
    require(z_.size() > 0, "ProblemSpec: empty primal space");
    for (std::size_t i = 0; i < terms_.size(); ++i) {
      const auto& t = terms_[i];
      const std::string at = "ProblemSpec: term " + std::to_string(i) + ": ";
      require(t.op.in_dim() == static_cast<std::size_t>(z_.size()), at + "L.in_dim != dim(H)");
      require(t.op.out_dim() == static_cast<std::size_t>(t.shift.size()), at + "L.out_dim != dim(r)");
      require(t.op.norm_bound() > 0.0, at + "operator must be nonzero (norm_bound > 0)");
    }
  }

  const Resolvents& a() const { return a_; }
  const Vector& z() const { return z_; }
  const std::vector<Term>& terms() const { return terms_; }
  const Term& term(std::size_t i) const { return terms_.at(i); }
  std::size_t size() const { return terms_.size(); }
  std::size_t primal_dim() const { return static_cast<std::size_t>(z_.size()); }

  std::vector<std::size_t> dual_dims() const {
    std::vector<std::size_t> d;
    for (const auto& t : terms_) d.push_back(t.op.out_dim());
    return d;
  }
  SpaceSignature signature() const { return {primal_dim(), dual_dims()}; }

  bool is_reduced() const {
    return std::all_of(terms_.begin(), terms_.end(),
                       [](const Term& t) { return t.d.is_zero_point(); });
  }

 private:
  Resolvents a_;
  Vector z_;
  std::vector<Term> terms_;
};

/// A term of the convex form (g_i □ l_i)(L_i x - r_i).
struct ProxTerm {
  LinOp op;
  ProxFn g;
  ProxFn l;
  Vector shift;
};

/// Wires f, g_i, l_i into resolvents: J_{tA} = prox_{tf}, J_{sB^{-1}} =
/// prox_{s g^*}, J_{sD^{-1}} = prox_{s l^*}, J_{gD} = prox_{g l}.
inline ProblemSpec make_prox_problem(const ProxFn& f, Vector z, const std::vector<ProxTerm>& terms) {
  std::vector<Term> ts;
  ts.reserve(terms.size());
  for (const auto& t : terms)
    ts.push_back(Term{t.op, Resolvents::from_prox(t.g), Resolvents::from_prox(t.l), t.shift});
  return ProblemSpec(Resolvents::from_prox(f), std::move(z), std::move(ts));
}

// ---------------------------------------------------------------------------
// Step validation
// ---------------------------------------------------------------------------

struct StepReport {
  bool ok = false;
  double weighted_sum = 0.0;  // tau * sum_i sigma_i ||L_i||^2
  double budget = 0.0;
  std::string message;
};

class StepViolation : public std::invalid_argument {
 public:
  explicit StepViolation(StepReport r) : std::invalid_argument(r.message), report_(std::move(r)) {}
  const StepReport& report() const { return report_; }

 private:
  StepReport report_;
};

inline double weighted_norm_sum(const ProblemSpec& spec, const std::vector<double>& sigmas,
                                const std::vector<double>& norms) {
  double s = 0.0;
  for (std::size_t i = 0; i < spec.size(); ++i) s += sigmas[i] * norms[i] * norms[i];
  return s;
}

/// Checks tau * sum_i sigma_i ||L_i||^2 < budget(scheme) using the declared
/// norm bounds; `strict` also checks against power-iteration estimates.
inline StepReport validate_steps(const ProblemSpec& spec, const StepConfig& cfg, bool strict = false) {
  StepReport r;
  r.budget = cfg.bound_budget();
  std::ostringstream msg;
  auto fail = [&](const std::string& why) {
    r.ok = false;
    r.message = why;
    return r;
  };
  if (!(cfg.tau > 0.0) || !std::isfinite(cfg.tau)) return fail("tau must be a positive finite number");
  if (cfg.sigmas.size() != spec.size())
    return fail("expected " + std::to_string(spec.size()) + " sigmas, got " +
                std::to_string(cfg.sigmas.size()));
  for (std::size_t i = 0; i < cfg.sigmas.size(); ++i)
    if (!(cfg.sigmas[i] > 0.0) || !std::isfinite(cfg.sigmas[i]))
      return fail("sigma[" + std::to_string(i) + "] must be a positive finite number");
  if (!cfg.lambda) return fail("missing relaxation schedule");
  for (std::size_t n = 0; n <= cfg.max_iters; ++n) {
    const double l = cfg.lambda(n);
    if (!(l > 0.0 && l < 2.0))
      return fail("lambda(" + std::to_string(n) + ") = " + std::to_string(l) + " is outside (0,2)");
  }
  if (cfg.scheme == Scheme::dr2_reduced && !spec.is_reduced())
    return fail("dr2-reduced requires every D_i to be the zero-point reduction");

  std::vector<double> norms;
  for (const auto& t : spec.terms()) norms.push_back(t.op.norm_bound());
  r.weighted_sum = cfg.tau * weighted_norm_sum(spec, cfg.sigmas, norms);
  if (!(r.weighted_sum < r.budget)) {
    msg.precision(17);
    msg << to_string(cfg.scheme) << ": tau * sum sigma_i ||L_i||^2 = " << r.weighted_sum
        << " is not below the budget " << r.budget;
    return fail(msg.str());
  }
  if (strict) {
    std::vector<double> est;
    for (const auto& t : spec.terms())
      est.push_back(std::max(t.op.norm_bound(), op_norm_estimate(t.op, 200, 7)));
    const double s = cfg.tau * weighted_norm_sum(spec, cfg.sigmas, est);
    if (!(s < r.budget)) {
      msg.precision(17);
      msg << to_string(cfg.scheme) << " (strict): with estimated norms the sum is " << s
          << ", not below " << r.budget;
      r.weighted_sum = s;
      return fail(msg.str());
    }
  }
  r.ok = true;
  return r;
}

/// Builds a StepConfig and rejects it unless validate_steps passes.
inline StepConfig make_step_config(const ProblemSpec& spec, Scheme scheme, double tau,
                                   std::vector<double> sigmas, LambdaSchedule lambda,
                                   std::size_t max_iters) {
  StepConfig cfg;
  cfg.scheme = scheme;
  cfg.tau = tau;
  cfg.sigmas = std::move(sigmas);
  cfg.lambda = std::move(lambda);
  cfg.max_iters = max_iters;
  auto rep = validate_steps(spec, cfg);
  if (!rep.ok) throw StepViolation(std::move(rep));
  return cfg;
}

// ---------------------------------------------------------------------------
// Iteration states and step traces
// ---------------------------------------------------------------------------

struct Alg1State {
  Vector x;
  BlockVector v;
  std::size_t n = 0;
};

struct Alg2State {
  Vector x;
  BlockVector y;
  BlockVector v;
  std::vector<double> gammas;
  std::size_t n = 0;
};

/// gamma_i = sigma_i^{-1} tau sum_j sigma_j ||L_j||^2 with declared norms.
inline std::vector<double> alg2_gammas(const ProblemSpec& spec, const StepConfig& cfg) {
  std::vector<double> norms;
  for (const auto& t : spec.terms()) norms.push_back(t.op.norm_bound());
  const double s = cfg.tau * weighted_norm_sum(spec, cfg.sigmas, norms);
  std::vector<double> g;
  for (double sigma : cfg.sigmas) g.push_back(s / sigma);
  return g;
}

inline Alg1State make_alg1_state(const ProblemSpec& spec, Vector x0) {
  require(static_cast<std::size_t>(x0.size()) == spec.primal_dim(), "x0 dimension mismatch");
  return {std::move(x0), BlockVector::zeros(spec.dual_dims()), 0};
}

inline Alg2State make_alg2_state(const ProblemSpec& spec, const StepConfig& cfg, Vector x0) {
  require(static_cast<std::size_t>(x0.size()) == spec.primal_dim(), "x0 dimension mismatch");
  return {std::move(x0), BlockVector::zeros(spec.dual_dims()),
          BlockVector::zeros(spec.dual_dims()), alg2_gammas(spec, cfg), 0};
}

/// Result of one DR1 step: the new state plus the step's temporaries.
struct Alg1Step {
  Alg1State next;
  Vector p1;
  Vector w1;
  BlockVector p2;
  BlockVector w2;
  Vector z1;
  BlockVector z2;
  double residual = 0.0;  // lambda_n ||(z1, z2) - (p1, p2)||
};

/// Result of one DR2 (or reduced DR2) step.
struct Alg2Step {
  Alg2State next;
  Vector p1;
  BlockVector p2;
  BlockVector p3;
  double residual = 0.0;  // lambda_n ||(p1, p2, p3) - (x, y, v)||
};

namespace detail {

/// Runs f(i) for i in [0, m), possibly on up to `threads` workers. Callers
/// write into per-i slots and reduce afterwards in ascending i.
template <class F>
void for_each_term(std::size_t m, unsigned threads, F&& f) {
  if (threads <= 1 || m < 2) {
    for (std::size_t i = 0; i < m; ++i) f(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(threads, m);
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::mutex mu;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < m; i += workers) f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!err) err = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

inline Vector sum_ascending(const std::vector<Vector>& parts, Eigen::Index dim) {
  Vector s = Vector::Zero(dim);
  for (const auto& p : parts) s += p;
  return s;
}

}  // namespace detail

/// One step of the first scheme. Each L_i and L_i^* is evaluated twice.
inline Alg1Step dr1_step(const ProblemSpec& spec, const StepConfig& cfg, const ErrorSchedule& errs,
                         const Alg1State& s) {
  const std::size_t m = spec.size();
  const std::size_t n = s.n;
  const double tau = cfg.tau;
  const double lambda = cfg.lambda(n);
  const auto dim = static_cast<Eigen::Index>(spec.primal_dim());
  const bool exact = errs.is_exact();

  std::vector<Vector> parts(m);
  detail::for_each_term(m, cfg.threads, [&](std::size_t i) { parts[i] = spec.term(i).op.adjoint(s.v[i]); });
  const Vector sum_lv = detail::sum_ascending(parts, dim);

  Alg1Step out;
  out.p1 = spec.a().resolvent(tau, s.x - (tau / 2.0) * sum_lv + tau * spec.z());
  if (!exact) out.p1 += errs.a(n);
  out.w1 = 2.0 * out.p1 - s.x;

  std::vector<Vector> p2(m), w2(m);
  detail::for_each_term(m, cfg.threads, [&](std::size_t i) {
    const Term& t = spec.term(i);
    const double sg = cfg.sigmas[i];
    p2[i] = t.b.inverse_resolvent(sg, s.v[i] + (sg / 2.0) * t.op.apply(out.w1) - sg * t.shift);
    if (!exact) p2[i] += errs.b(i, n);
    w2[i] = 2.0 * p2[i] - s.v[i];
    parts[i] = t.op.adjoint(w2[i]);
  });
  out.z1 = out.w1 - (tau / 2.0) * detail::sum_ascending(parts, dim);

  out.next.x = s.x + lambda * (out.z1 - out.p1);
  const Vector u = 2.0 * out.z1 - out.w1;

  std::vector<Vector> z2(m), v_next(m);
  detail::for_each_term(m, cfg.threads, [&](std::size_t i) {
    const Term& t = spec.term(i);
    const double sg = cfg.sigmas[i];
    z2[i] = t.d.inverse_resolvent(sg, w2[i] + (sg / 2.0) * t.op.apply(u));
    if (!exact) z2[i] += errs.d(i, n);
    v_next[i] = s.v[i] + lambda * (z2[i] - p2[i]);
  });

  double r2 = (out.z1 - out.p1).squaredNorm();
  for (std::size_t i = 0; i < m; ++i) r2 += (z2[i] - p2[i]).squaredNorm();
  out.residual = lambda * std::sqrt(r2);

  out.p2 = BlockVector(std::move(p2));
  out.w2 = BlockVector(std::move(w2));
  out.z2 = BlockVector(std::move(z2));
  out.next.v = BlockVector(std::move(v_next));
  out.next.n = n + 1;
  return out;
}

/// One step of the second scheme. Each L_i and L_i^* is evaluated once.
inline Alg2Step dr2_step(const ProblemSpec& spec, const StepConfig& cfg, const ErrorSchedule& errs,
                         const Alg2State& s) {
  const std::size_t m = spec.size();
  require(s.gammas.size() == m, "dr2_step: gammas not initialised for this problem");
  const std::size_t n = s.n;
  const double tau = cfg.tau;
  const double lambda = cfg.lambda(n);
  const auto dim = static_cast<Eigen::Index>(spec.primal_dim());
  const bool exact = errs.is_exact();

  std::vector<Vector> parts(m);
  detail::for_each_term(m, cfg.threads, [&](std::size_t i) { parts[i] = spec.term(i).op.adjoint(s.v[i]); });
  const Vector sum_lv = detail::sum_ascending(parts, dim);

  Alg2Step out;
  out.p1 = spec.a().resolvent(tau, s.x - tau * (sum_lv - spec.z()));
  if (!exact) out.p1 += errs.a(n);
  out.next.x = s.x + lambda * (out.p1 - s.x);
  const Vector u = 2.0 * out.p1 - s.x;

  std::vector<Vector> p2(m), y_next(m), p3(m), v_next(m);
  detail::for_each_term(m, cfg.threads, [&](std::size_t i) {
    const Term& t = spec.term(i);
    const double sg = cfg.sigmas[i];
    const double gm = s.gammas[i];
    p2[i] = t.d.resolvent(gm, s.y[i] + gm * s.v[i]);
    if (!exact) p2[i] += errs.d(i, n);
    y_next[i] = s.y[i] + lambda * (p2[i] - s.y[i]);
    Vector arg = t.op.apply(u);
    arg -= 2.0 * p2[i] - s.y[i];
    arg -= t.shift;
    p3[i] = t.b.inverse_resolvent(sg, s.v[i] + sg * arg);
    if (!exact) p3[i] += errs.b(i, n);
    v_next[i] = s.v[i] + lambda * (p3[i] - s.v[i]);
  });

  double r2 = (out.p1 - s.x).squaredNorm();
  for (std::size_t i = 0; i < m; ++i) {
    r2 += (p2[i] - s.y[i]).squaredNorm();
    r2 += (p3[i] - s.v[i]).squaredNorm();
  }
  out.residual = lambda * std::sqrt(r2);

  out.p2 = BlockVector(std::move(p2));
  out.p3 = BlockVector(std::move(p3));
  out.next.y = BlockVector(std::move(y_next));
  out.next.v = BlockVector(std::move(v_next));
  out.next.gammas = s.gammas;
  out.next.n = n + 1;
  return out;
}

/// The second scheme with every D_i = zero-point reduction and y = 0: the y
/// and p2 sequences vanish and only (x, v) are updated.
inline Alg2Step dr2_reduced_step(const ProblemSpec& spec, const StepConfig& cfg,
                                 const ErrorSchedule& errs, const Alg2State& s) {
  require(spec.is_reduced(), "dr2_reduced_step: every D_i must be the zero-point reduction");
  for (std::size_t i = 0; i < s.y.size(); ++i)
    require(s.y[i].isZero(0.0), "dr2_reduced_step: y must be identically zero");
  const std::size_t m = spec.size();
  const std::size_t n = s.n;
  const double tau = cfg.tau;
  const double lambda = cfg.lambda(n);
  const auto dim = static_cast<Eigen::Index>(spec.primal_dim());
  const bool exact = errs.is_exact();

  std::vector<Vector> parts(m);
  detail::for_each_term(m, cfg.threads, [&](std::size_t i) { parts[i] = spec.term(i).op.adjoint(s.v[i]); });
  const Vector sum_lv = detail::sum_ascending(parts, dim);

  Alg2Step out;
  out.p1 = spec.a().resolvent(tau, s.x - tau * (sum_lv - spec.z()));
  if (!exact) out.p1 += errs.a(n);
  out.next.x = s.x + lambda * (out.p1 - s.x);
  const Vector u = 2.0 * out.p1 - s.x;

  std::vector<Vector> p3(m), v_next(m);
  detail::for_each_term(m, cfg.threads, [&](std::size_t i) {
    const Term& t = spec.term(i);
    const double sg = cfg.sigmas[i];
    Vector arg = t.op.apply(u);
    arg -= t.shift;
    p3[i] = t.b.inverse_resolvent(sg, s.v[i] + sg * arg);
    if (!exact) p3[i] += errs.b(i, n);
    v_next[i] = s.v[i] + lambda * (p3[i] - s.v[i]);
  });

  double r2 = (out.p1 - s.x).squaredNorm();
  for (std::size_t i = 0; i < m; ++i) r2 += (p3[i] - s.v[i]).squaredNorm();
  out.residual = lambda * std::sqrt(r2);

  out.p2 = BlockVector::zeros(spec.dual_dims());
  out.p3 = BlockVector(std::move(p3));
  out.next.y = s.y;
  out.next.v = BlockVector(std::move(v_next));
  out.next.gammas = s.gammas;
  out.next.n = n + 1;
  return out;
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

class NonFiniteIterate : public std::runtime_error {
 public:
  NonFiniteIterate(const std::string& quantity, std::size_t n)
      : std::runtime_error("non-finite value in " + quantity + " at iteration " + std::to_string(n)),
        quantity_(quantity),
        n_(n) {}
  const std::string& quantity() const { return quantity_; }
  std::size_t iteration() const { return n_; }

 private:
  std::string quantity_;
  std::size_t n_;
};

struct RunOptions {
  /// Evaluated at p_{1,n} for each logged row when set.
  std::function<double(const Vector&)> objective;
  std::size_t stride = 1;
  /// Stop once the step residual drops below this; <= 0 or non-finite disables.
  double residual_tol = 0.0;
};

struct RunResult {
  IterateLog log;
  Vector x;
  BlockVector v;
  BlockVector y;  // second scheme only
  std::size_t steps = 0;
  bool converged = false;
  double last_residual = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline void check_finite(const Vector& v, const std::string& what, std::size_t n) {
  if (!v.allFinite()) throw NonFiniteIterate(what, n);
}
inline void check_finite(const BlockVector& v, const std::string& what, std::size_t n) {
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!v[i].allFinite()) throw NonFiniteIterate(what + "[" + std::to_string(i) + "]", n);
}

inline bool tol_active(double tol) { return std::isfinite(tol) && tol > 0.0; }

}  // namespace detail

/// Runs cfg.max_iters steps (n = 0 .. max_iters-1) of the first scheme. Row n
/// of the log holds p_{1,n}, the dual estimates p_{2,i,n} and the residual.
inline RunResult run_dr1(const ProblemSpec& spec, const StepConfig& cfg, const ErrorSchedule& errs,
                         Alg1State state, const RunOptions& opts = {}) {
  const auto rep = validate_steps(spec, cfg);
  if (!rep.ok) throw StepViolation(rep);
  require(opts.stride >= 1, "run: stride must be >= 1");
  RunResult res;
  for (std::size_t k = 0; k < cfg.max_iters; ++k) {
    Alg1Step st = dr1_step(spec, cfg, errs, state);
    const std::size_t n = state.n;
    detail::check_finite(st.p1, "p1", n);
    detail::check_finite(st.p2, "p2", n);
    detail::check_finite(st.z1, "z1", n);
    detail::check_finite(st.z2, "z2", n);
    detail::check_finite(st.next.x, "x", n);
    detail::check_finite(st.next.v, "v", n);
    res.last_residual = st.residual;
    ++res.steps;
    const bool stop = detail::tol_active(opts.residual_tol) && st.residual < opts.residual_tol;
    const bool last = stop || k + 1 == cfg.max_iters;
    if (n % opts.stride == 0 || last) {
      LogRow row{n, st.p1, st.p2, std::nullopt, st.residual};
      if (opts.objective) row.objective = opts.objective(st.p1);
      res.log.push(std::move(row));
    }
    state = std::move(st.next);
    if (stop) {
      res.converged = true;
      break;
    }
  }
  res.x = std::move(state.x);
  res.v = std::move(state.v);
  return res;
}

/// Second scheme (full or reduced per cfg.scheme). Log rows hold p_{1,n} and p_{3,i,n}.
inline RunResult run_dr2(const ProblemSpec& spec, const StepConfig& cfg, const ErrorSchedule& errs,
                         Alg2State state, const RunOptions& opts = {}) {
  const auto rep = validate_steps(spec, cfg);
  if (!rep.ok) throw StepViolation(rep);
  require(cfg.scheme != Scheme::dr1, "run_dr2: configuration is for dr1");
  require(opts.stride >= 1, "run: stride must be >= 1");
  const bool reduced = cfg.scheme == Scheme::dr2_reduced;
  RunResult res;
  for (std::size_t k = 0; k < cfg.max_iters; ++k) {
    Alg2Step st = reduced ? dr2_reduced_step(spec, cfg, errs, state) : dr2_step(spec, cfg, errs, state);
    const std::size_t n = state.n;
    detail::check_finite(st.p1, "p1", n);
    detail::check_finite(st.p2, "p2", n);
    detail::check_finite(st.p3, "p3", n);
    detail::check_finite(st.next.x, "x", n);
    detail::check_finite(st.next.y, "y", n);
    detail::check_finite(st.next.v, "v", n);
    res.last_residual = st.residual;
    ++res.steps;
    const bool stop = detail::tol_active(opts.residual_tol) && st.residual < opts.residual_tol;
    const bool last = stop || k + 1 == cfg.max_iters;
    if (n % opts.stride == 0 || last) {
      LogRow row{n, st.p1, st.p3, std::nullopt, st.residual};
      if (opts.objective) row.objective = opts.objective(st.p1);
      res.log.push(std::move(row));
    }
    state = std::move(st.next);
    if (stop) {
      res.converged = true;
      break;
    }
  }
  res.x = std::move(state.x);
  res.v = std::move(state.v);
  res.y = std::move(state.y);
  return res;
}

/// Starts from x0 with all dual (and y) variables at zero.
inline RunResult run(const ProblemSpec& spec, const StepConfig& cfg, const ErrorSchedule& errs,
                     const Vector& x0, const RunOptions& opts = {}) {
  if (cfg.scheme == Scheme::dr1) return run_dr1(spec, cfg, errs, make_alg1_state(spec, x0), opts);
  return run_dr2(spec, cfg, errs, make_alg2_state(spec, cfg, x0), opts);
}

// ---------------------------------------------------------------------------
// Diagnostics for the first scheme
// ---------------------------------------------------------------------------

/// <u, V w> with V(x, v) = (x/tau - 1/2 sum L_i^* v_i, v_i/sigma_i - 1/2 L_i x).
inline double v_inner_dr1(const ProblemSpec& spec, const StepConfig& cfg, const Vector& ux,
                          const BlockVector& uv, const Vector& wx, const BlockVector& wv) {
  const auto dim = static_cast<Eigen::Index>(spec.primal_dim());
  Vector sum_lw = Vector::Zero(dim);
  for (std::size_t i = 0; i < spec.size(); ++i) sum_lw += spec.term(i).op.adjoint(wv[i]);
  double s = ux.dot(wx / cfg.tau - 0.5 * sum_lw);
  for (std::size_t i = 0; i < spec.size(); ++i)
    s += uv[i].dot(wv[i] / cfg.sigmas[i] - 0.5 * spec.term(i).op.apply(wx));
  return s;
}

/// sqrt<u, V u>, the metric in which the first scheme is a Douglas-Rachford iteration.
inline double vnorm_dr1(const ProblemSpec& spec, const StepConfig& cfg, const Vector& x,
                        const BlockVector& v) {
  return std::sqrt(std::max(0.0, v_inner_dr1(spec, cfg, x, v, x, v)));
}

/// rho with <u, V u> >= rho ||u||^2.
inline double strong_positivity_dr1(const ProblemSpec& spec, const StepConfig& cfg) {
  std::vector<double> norms;
  for (const auto& t : spec.terms()) norms.push_back(t.op.norm_bound());
  const double s = cfg.tau * weighted_norm_sum(spec, cfg.sigmas, norms);
  double mn = 1.0 / cfg.tau;
  for (double sg : cfg.sigmas) mn = std::min(mn, 1.0 / sg);
  return (1.0 - 0.5 * std::sqrt(s)) * mn;
}

}  // namespace proxsplit
