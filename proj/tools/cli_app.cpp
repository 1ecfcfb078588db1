#include "cli_app.hpp"

#include "proxsplit/pgm.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace proxsplit::cli {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, _] : j.items())
    if (!allowed.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

template <class T>
T get(const json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

Vector to_vector(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (!j[k].is_number()) throw ConfigError(where + ": expected an array of numbers");
    v[static_cast<Eigen::Index>(k)] = j[k].get<double>();
  }
  return v;
}

std::vector<double> to_doubles(const json& j, const std::string& where) {
  const Vector v = to_vector(j, where);
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

ProxFn parse_proxfn(const json& j) {
  const std::string where = "proxfn";
  if (!j.is_object() || !j.contains("kind")) throw ConfigError(where + ": missing 'kind'");
  const auto kind = get<std::string>(j, "kind", where);
  const std::string at = where + "(" + kind + ")";
  try {
    if (kind == "box") {
      check_keys(j, {"kind", "lo", "hi"}, at);
      return ProxFn::box(to_vector(j.at("lo"), at + ".lo"), to_vector(j.at("hi"), at + ".hi"));
    }
    if (kind == "cube") {
      check_keys(j, {"kind", "center", "side"}, at);
      return ProxFn::cube(to_vector(j.at("center"), at + ".center"), get<double>(j, "side", at));
    }
    if (kind == "ball") {
      check_keys(j, {"kind", "center", "radius"}, at);
      return ProxFn::ball(to_vector(j.at("center"), at + ".center"), get<double>(j, "radius", at));
    }
    if (kind == "line") {
      check_keys(j, {"kind", "base", "dir"}, at);
      return ProxFn::line(to_vector(j.at("base"), at + ".base"), to_vector(j.at("dir"), at + ".dir"));
    }
    if (kind == "zero-point") {
      check_keys(j, {"kind"}, at);
      return ProxFn::zero_point();
    }
    if (kind == "weighted-l1") {
      check_keys(j, {"kind", "alpha", "shift"}, at);
      Vector shift;
      if (j.contains("shift")) shift = to_vector(j.at("shift"), at + ".shift");
      return ProxFn::weighted_l1(get<double>(j, "alpha", at), shift);
    }
    if (kind == "eucl-norm") {
      check_keys(j, {"kind"}, at);
      return ProxFn::eucl_norm();
    }
    if (kind == "iso-norm") {
      check_keys(j, {"kind", "alpha", "rows", "cols"}, at);
      return ProxFn::iso_norm(get<double>(j, "alpha", at), get<std::size_t>(j, "rows", at),
                              get<std::size_t>(j, "cols", at));
    }
    if (kind == "tilted") {
      check_keys(j, {"kind", "base", "tilt"}, at);
      return ProxFn::tilted(parse_proxfn(j.at("base")), to_vector(j.at("tilt"), at + ".tilt"));
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(at + ": " + e.what());
  }
  throw ConfigError(where + ": unknown kind '" + kind + "'");
}

RunConfig parse_run_config(const json& j) {
  static const std::set<std::string> top{"experiment", "algorithm", "tau",    "sigmas",
                                         "lambda",     "iters",     "log_stride", "residual_tol",
                                         "x0",         "errors",    "deblur", "custom",
                                         "output"};
  check_keys(j, top, "config");
  RunConfig c;
  if (j.contains("experiment")) c.experiment = get<std::string>(j, "experiment", "config");
  static const std::set<std::string> experiments{"heron1", "heron2", "heron3", "deblur", "custom"};
  if (!experiments.count(c.experiment)) throw ConfigError("config.experiment: unknown '" + c.experiment + "'");
  if (j.contains("algorithm")) {
    try {
      c.algorithm = scheme_from_string(get<std::string>(j, "algorithm", "config"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config.algorithm: ") + e.what());
    }
  }
  if (j.contains("tau")) c.tau = get<double>(j, "tau", "config");
  if (j.contains("sigmas")) {
    const auto& s = j.at("sigmas");
    c.sigmas = s.is_number() ? std::vector<double>{s.get<double>()} : to_doubles(s, "config.sigmas");
  }
  if (j.contains("lambda")) c.lambda = get<double>(j, "lambda", "config");
  if (j.contains("iters")) c.iters = get<std::size_t>(j, "iters", "config");
  if (j.contains("log_stride")) c.log_stride = get<std::size_t>(j, "log_stride", "config");
  if (c.log_stride == 0) throw ConfigError("config.log_stride: must be >= 1");
  if (j.contains("residual_tol")) c.residual_tol = get<double>(j, "residual_tol", "config");
  if (j.contains("x0")) c.x0 = to_doubles(j.at("x0"), "config.x0");
  if (j.contains("errors")) {
    const auto& e = j.at("errors");
    check_keys(e, {"c", "p", "seed"}, "config.errors");
    if (e.contains("c")) c.errors.c = get<double>(e, "c", "config.errors");
    if (e.contains("p")) c.errors.p = get<double>(e, "p", "config.errors");
    if (e.contains("seed")) c.errors.seed = get<std::uint64_t>(e, "seed", "config.errors");
  }
  if (j.contains("deblur")) {
    const auto& d = j.at("deblur");
    const std::string w = "config.deblur";
    check_keys(d, {"alpha1", "alpha2", "kernel_size", "blur_std", "noise_std", "noise_seed", "image",
                   "size", "wavelet_norm"},
               w);
    auto& p = c.deblur.params;
    if (d.contains("alpha1")) p.alpha1 = get<double>(d, "alpha1", w);
    if (d.contains("alpha2")) p.alpha2 = get<double>(d, "alpha2", w);
    if (d.contains("kernel_size")) p.kernel_size = get<std::size_t>(d, "kernel_size", w);
    if (d.contains("blur_std")) p.blur_std = get<double>(d, "blur_std", w);
    if (d.contains("noise_std")) p.noise_std = get<double>(d, "noise_std", w);
    if (d.contains("noise_seed")) p.noise_seed = get<std::uint64_t>(d, "noise_seed", w);
    if (d.contains("wavelet_norm")) p.wavelet_norm = get<double>(d, "wavelet_norm", w);
    if (d.contains("size")) c.deblur.size = get<std::size_t>(d, "size", w);
    if (d.contains("image")) c.deblur.image = get<std::string>(d, "image", w);
  }
  if (j.contains("custom")) c.custom = j.at("custom");
  if (j.contains("output")) {
    const auto& o = j.at("output");
    check_keys(o, {"csv", "pgm", "metadata"}, "config.output");
    if (o.contains("csv")) c.output.csv = get<std::string>(o, "csv", "config.output");
    if (o.contains("pgm")) c.output.pgm = get<std::string>(o, "pgm", "config.output");
    if (o.contains("metadata")) c.output.metadata = get<std::string>(o, "metadata", "config.output");
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return parse_run_config(j);
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> expand_sigmas(const std::vector<double>& s, std::size_t m) {
  if (s.size() == 1) return std::vector<double>(m, s[0]);
  if (s.size() != m)
    throw ConfigError("sigmas: expected 1 or " + std::to_string(m) + " values, got " + std::to_string(s.size()));
  return s;
}

StepConfig assemble_steps(const RunConfig& c, Scheme scheme, double tau, std::vector<double> sigmas,
                          double lambda, std::size_t default_iters, std::size_t m) {
  StepConfig s;
  s.scheme = scheme;
  s.tau = c.tau.value_or(tau);
  s.sigmas = expand_sigmas(c.sigmas.value_or(sigmas), m);
  s.lambda = constant_lambda(c.lambda.value_or(lambda));
  s.max_iters = c.iters.value_or(default_iters) + 1;
  s.threads = c.threads;
  return s;
}

Experiment build_heron(const RunConfig& c, int which) {
  HeronSpec h = heron_example(which);
  const HeronParams d = heron_defaults(which, c.algorithm);
  ProblemSpec prob = heron_build(h);
  const std::size_t m = prob.size();
  Vector x0 = d.x0;
  if (c.x0) {
    x0 = Eigen::Map<const Vector>(c.x0->data(), static_cast<Eigen::Index>(c.x0->size()));
    if (static_cast<std::size_t>(x0.size()) != h.dim) throw ConfigError("x0: dimension mismatch");
  }
  StepConfig steps = assemble_steps(c, c.algorithm, d.tau, {d.sigma}, d.lambda, 50, m);
  auto obj = [h](const Vector& x) { return heron_objective(h, x); };
  return Experiment{std::move(prob), std::move(steps), std::move(x0), ErrorSchedule::exact(),
                    obj, h, std::nullopt, 0, 0, 0, 0, ""};
}

Experiment build_deblur(const RunConfig& c) {
  const DeblurParams& p = c.deblur.params;
  ImageGrid clean;
  std::size_t orig_r, orig_c, pad_r = 0, pad_c = 0;
  if (c.deblur.image) {
    ImageGrid img;
    try {
      img = pgm_read(*c.deblur.image);
    } catch (const PgmError& e) {
      throw ConfigError(e.what());
    } catch (const std::runtime_error& e) {
      throw ConfigError(e.what());
    }
    orig_r = img.rows;
    orig_c = img.cols;
    PaddedImage padded = pad_reflexive(img, std::size_t{1} << kHaarLevels);
    clean = std::move(padded.image);
    pad_r = padded.pad_rows;
    pad_c = padded.pad_cols;
  } else {
    if (c.deblur.size == 0 || c.deblur.size % 16 != 0)
      throw ConfigError("deblur.size must be a positive multiple of 16");
    clean = synthetic_image(c.deblur.size, c.deblur.size);
    orig_r = orig_c = c.deblur.size;
  }
  if (p.kernel_size % 2 == 0) throw ConfigError("deblur.kernel_size must be odd");
  const LinOp blur = gaussian_blur_op(clean.rows, clean.cols, p.kernel_size, p.blur_std);
  ImageGrid observed = degrade(clean, blur, p.noise_std, p.noise_seed);
  DeblurSpec spec = make_deblur_spec(observed, p, clean);

  // Every D_i is the zero-point reduction, so the second scheme runs reduced.
  Scheme scheme = c.algorithm;
  std::string note;
  if (scheme == Scheme::dr2) {
    scheme = Scheme::dr2_reduced;
    note = "dr2 executed in reduced form (all l_i = delta_{0}, y0 = 0)";
  }
  const DeblurSteps d = deblur_defaults(spec, scheme);
  ProblemSpec prob = deblur_build(spec);
  StepConfig steps = assemble_steps(c, scheme, d.tau, d.sigmas, d.lambda, 200, prob.size());
  Vector x0 = observed.pixels;
  if (c.x0) throw ConfigError("x0: not supported for deblur (the observed image is the start)");
  const auto rows = spec.observed.rows, cols = spec.observed.cols;
  auto obj = [spec, rows, cols](const Vector& x) { return deblur_objective(spec, ImageGrid(rows, cols, x)); };
  return Experiment{std::move(prob), std::move(steps), std::move(x0), ErrorSchedule::exact(), obj,
                    std::nullopt, std::move(spec), pad_r, pad_c, orig_r, orig_c, note};
}

Experiment build_custom(const RunConfig& c) {
  const json& j = c.custom;
  const std::string w = "config.custom";
  check_keys(j, {"dim", "f", "z", "terms"}, w);
  const auto dim = get<std::size_t>(j, "dim", w);
  if (dim == 0) throw ConfigError(w + ".dim: must be positive");
  const auto n = static_cast<Eigen::Index>(dim);
  if (!j.contains("f")) throw ConfigError(w + ": missing 'f'");
  const ProxFn f = parse_proxfn(j.at("f"));
  Vector z = j.contains("z") ? to_vector(j.at("z"), w + ".z") : Vector::Zero(n);
  if (z.size() != n) throw ConfigError(w + ".z: dimension mismatch");
  if (!j.contains("terms") || !j.at("terms").is_array() || j.at("terms").empty())
    throw ConfigError(w + ".terms: expected a nonempty array");

  std::vector<ProxTerm> terms;
  bool reduced = true;
  for (std::size_t i = 0; i < j.at("terms").size(); ++i) {
    const json& t = j.at("terms")[i];
    const std::string at = w + ".terms[" + std::to_string(i) + "]";
    check_keys(t, {"L", "g", "l", "r"}, at);
    LinOp op = identity_op(dim);
    if (t.contains("L") && !(t.at("L").is_string() && t.at("L").get<std::string>() == "identity")) {
      const json& rows = t.at("L");
      if (!rows.is_array() || rows.empty()) throw ConfigError(at + ".L: expected 'identity' or a matrix");
      Eigen::MatrixXd mtx(static_cast<Eigen::Index>(rows.size()), n);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const Vector row = to_vector(rows[r], at + ".L");
        if (row.size() != n) throw ConfigError(at + ".L: row length must equal dim");
        mtx.row(static_cast<Eigen::Index>(r)) = row.transpose();
      }
      op = matrix_op(mtx);
    }
    if (!t.contains("g")) throw ConfigError(at + ": missing 'g'");
    ProxFn g = parse_proxfn(t.at("g"));
    ProxFn l = t.contains("l") ? parse_proxfn(t.at("l")) : ProxFn::zero_point();
    reduced = reduced && std::holds_alternative<kinds::ZeroPoint>(l.kind());
    Vector r = t.contains("r") ? to_vector(t.at("r"), at + ".r")
                               : Vector::Zero(static_cast<Eigen::Index>(op.out_dim()));
    terms.push_back(ProxTerm{op, std::move(g), std::move(l), std::move(r)});
  }
  ProblemSpec prob = [&] {
    try {
      return make_prox_problem(f, z, terms);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(w + ": " + e.what());
    }
  }();
  if (!c.tau || !c.sigmas) throw ConfigError(w + ": tau and sigmas are required");
  Vector x0 = Vector::Zero(n);
  if (c.x0) {
    x0 = Eigen::Map<const Vector>(c.x0->data(), static_cast<Eigen::Index>(c.x0->size()));
    if (x0.size() != n) throw ConfigError("x0: dimension mismatch");
  }
  StepConfig steps = assemble_steps(c, c.algorithm, *c.tau, *c.sigmas, 1.0, 50, prob.size());
  std::function<double(const Vector&)> obj;
  if (reduced) {
    // f(x) + sum_i g_i(L_i x - r_i) - <x, z>; the parallel sum collapses to g_i.
    obj = [f, terms, z](const Vector& x) {
      double s = eval(f, x) - z.dot(x);
      for (const auto& t : terms) s += eval(t.g, t.op.apply(x) - t.shift);
      return s;
    };
  }
  return Experiment{std::move(prob), std::move(steps), std::move(x0), ErrorSchedule::exact(), obj,
                    std::nullopt, std::nullopt, 0, 0, 0, 0, ""};
}

}  // namespace

Experiment build_experiment(const RunConfig& c) {
  Experiment ex = [&] {
    if (c.experiment == "heron1") return build_heron(c, 1);
    if (c.experiment == "heron2") return build_heron(c, 2);
    if (c.experiment == "heron3") return build_heron(c, 3);
    if (c.experiment == "deblur") return build_deblur(c);
    if (c.experiment == "custom") return build_custom(c);
    throw ConfigError("unknown experiment '" + c.experiment + "'");
  }();
  if (c.errors.c != 0.0) {
    try {
      ex.errors = make_power_error_schedule(c.errors.c, c.errors.p, ex.problem.signature(), c.errors.seed);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("errors: ") + e.what());
    }
  }
  return ex;
}

// ---------------------------------------------------------------------------

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_csv(const Experiment& ex, const IterateLog& log) {
  std::ostringstream os;
  const bool deblur = ex.deblur.has_value();
  os << "iter,objective,residual";
  if (deblur) {
    os << ",isnr";
  } else {
    for (std::size_t k = 0; k < ex.problem.primal_dim(); ++k) os << ",primal_" << k;
  }
  os << '\n';
  for (const auto& r : log.rows()) {
    os << r.n << ',' << (r.objective ? format_number(*r.objective) : "") << ','
       << format_number(r.step_residual);
    if (deblur) {
      const auto& d = *ex.deblur;
      const ImageGrid cur(d.observed.rows, d.observed.cols, r.primal);
      os << ',' << format_number(isnr(*d.clean, d.observed, cur));
    } else {
      for (Eigen::Index k = 0; k < r.primal.size(); ++k) os << ',' << format_number(r.primal[k]);
    }
    os << '\n';
  }
  return os.str();
}

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

}  // namespace

int cmd_validate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    const Experiment ex = build_experiment(cfg);
    const StepReport rep = validate_steps(ex.problem, ex.steps);
    if (!rep.ok) {
      err << "invalid configuration: " << rep.message << '\n';
      return kInvalid;
    }
    out << to_string(ex.steps.scheme) << ": tau * sum sigma_i ||L_i||^2 = " << format_number(rep.weighted_sum)
        << " < " << format_number(rep.budget) << " ok\n";
    const StepReport strict = validate_steps(ex.problem, ex.steps, true);
    if (!strict.ok)
      err << "warning: with power-iteration norm estimates the budget fails: " << strict.message << '\n';
    return kOk;
  } catch (const ConfigError& e) {
    err << "invalid configuration: " << e.what() << '\n';
    return kInvalid;
  }
}

int cmd_norms(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    const Experiment ex = build_experiment(cfg);
    out << "term,operator,declared,estimate\n";
    for (std::size_t i = 0; i < ex.problem.size(); ++i) {
      const LinOp& op = ex.problem.term(i).op;
      out << i << ',' << op.name() << ',' << format_number(op.norm_bound()) << ','
          << format_number(op_norm_estimate(op, 300, 1)) << '\n';
    }
    return kOk;
  } catch (const ConfigError& e) {
    err << "invalid configuration: " << e.what() << '\n';
    return kInvalid;
  }
}

int cmd_run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  Experiment ex = [&]() -> Experiment {
    try {
      return build_experiment(cfg);
    } catch (const ConfigError& e) {
      err << "invalid configuration: " << e.what() << '\n';
      throw;
    }
  }();
  const StepReport rep = validate_steps(ex.problem, ex.steps);
  if (!rep.ok) {
    err << "invalid configuration: " << rep.message << '\n';
    return kInvalid;
  }
  RunOptions opts;
  opts.objective = ex.objective;
  opts.stride = cfg.log_stride;
  opts.residual_tol = cfg.residual_tol;
  RunResult res;
  try {
    res = run(ex.problem, ex.steps, ex.errors, ex.x0, opts);
  } catch (const NonFiniteIterate& e) {
    err << "aborted: " << e.what() << '\n';
    return kNonFinite;
  }
  write_text(cfg.output.csv, format_csv(ex, res.log));
  if (ex.deblur && cfg.output.pgm) {
    const auto& d = *ex.deblur;
    const ImageGrid last(d.observed.rows, d.observed.cols, res.log.back().primal);
    pgm_write(crop(last, ex.orig_rows, ex.orig_cols), *cfg.output.pgm);
  }
  if (cfg.output.metadata) {
    json meta{{"experiment", cfg.experiment},
              {"scheme", to_string(ex.steps.scheme)},
              {"tau", ex.steps.tau},
              {"sigmas", ex.steps.sigmas},
              {"lambda", ex.steps.lambda(0)},
              {"steps", res.steps},
              {"converged", res.converged},
              {"weighted_sum", rep.weighted_sum},
              {"budget", rep.budget}};
    if (ex.deblur) {
      meta["pad_rows"] = ex.pad_rows;
      meta["pad_cols"] = ex.pad_cols;
    }
    if (!ex.note.empty()) meta["note"] = ex.note;
    write_text(*cfg.output.metadata, meta.dump(2) + "\n");
  }
  const auto& last = res.log.back();
  out << cfg.experiment << ' ' << to_string(ex.steps.scheme) << ": " << res.steps << " steps, final objective "
      << (last.objective ? format_number(*last.objective) : "n/a") << ", residual "
      << format_number(last.step_residual) << '\n';
  return kOk;
}

int main_with_args(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Primal-dual Douglas-Rachford splitting experiments"};
  app.require_subcommand(1);

  std::vector<std::string> run_args;
  std::optional<std::size_t> iters;
  std::string csv, pgm;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment from a JSON config or '<experiment> <algorithm>'");
  run_cmd->add_option("args", run_args, "config.json | experiment algorithm")->required()->expected(1, 2);
  run_cmd->add_option("--iters", iters, "Index of the last logged iterate");
  run_cmd->add_option("--csv", csv, "CSV output path");
  run_cmd->add_option("--pgm", pgm, "PGM output path (deblur)");

  std::string validate_path, norms_path;
  auto* validate_cmd = app.add_subcommand("validate", "Check step sizes of a config");
  validate_cmd->add_option("config", validate_path)->required();
  auto* norms_cmd = app.add_subcommand("norms", "Power-iteration norm estimates vs declared bounds");
  norms_cmd->add_option("config", norms_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kInvalid;
  }

  unsigned threads = 1;
  if (const char* t = std::getenv("PROXSPLIT_THREADS")) {
    try {
      threads = static_cast<unsigned>(std::max(1L, std::stol(t)));
    } catch (...) {
      err << "ignoring invalid PROXSPLIT_THREADS='" << t << "'\n";
    }
  }

  try {
    if (*run_cmd) {
      RunConfig cfg;
      if (run_args.size() == 1) {
        cfg = load_run_config(run_args[0]);
      } else {
        json j{{"experiment", run_args[0]}, {"algorithm", run_args[1]}};
        cfg = parse_run_config(j);
      }
      if (iters) cfg.iters = *iters;
      if (!csv.empty()) cfg.output.csv = csv;
      if (!pgm.empty()) cfg.output.pgm = pgm;
      cfg.threads = threads;
      return cmd_run(cfg, out, err);
    }
    if (*validate_cmd) {
      RunConfig cfg = load_run_config(validate_path);
      return cmd_validate(cfg, out, err);
    }
    RunConfig cfg = load_run_config(norms_path);
    return cmd_norms(cfg, out, err);
  } catch (const ConfigError& e) {
    err << "invalid configuration: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::invalid_argument& e) {
    err << "invalid configuration: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace proxsplit::cli
