#include "gle/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

namespace gle {

ConfigError::ConfigError(Kind kind, std::string key, std::string message, int line, int column)
    : std::runtime_error([&] {
        std::string where = line > 0 ? "line " + std::to_string(line) + ", column " +
                                           std::to_string(column) + ": "
                                     : std::string();
        std::string k = key.empty() ? std::string() : key + ": ";
        return where + k + message;
      }()),
      kind_(kind),
      key_(std::move(key)),
      detail_(std::move(message)),
      line_(line),
      column_(column) {}

const char* to_string(ConfigError::Kind kind) noexcept {
  switch (kind) {
    case ConfigError::Kind::Syntax: return "syntax";
    case ConfigError::Kind::UnknownKey: return "unknown_key";
    case ConfigError::Kind::TypeMismatch: return "type_mismatch";
    case ConfigError::Kind::Constraint: return "constraint";
    case ConfigError::Kind::Regime: return "regime";
    case ConfigError::Kind::Missing: break;
  }
  return "missing";
}

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

bool operator==(const RunConfig& a, const RunConfig& b) {
  auto same_kernel = a.kernel.alpha == b.kernel.alpha && a.kernel.beta == b.kernel.beta &&
                     a.kernel.n_modes == b.kernel.n_modes && a.kernel.s == b.kernel.s;
  auto same_pot = a.potential.kind() == b.potential.kind() &&
                  a.potential.parameters() == b.potential.parameters();
  const auto& x = a.integrator;
  const auto& y = b.integrator;
  auto same_int = x.m == y.m && x.gamma == y.gamma && x.dt == y.dt && x.t_final == y.t_final &&
                  x.scheme == y.scheme && x.thin_stride == y.thin_stride &&
                  x.cutoff_R == y.cutoff_R && x.multirate_tol == y.multirate_tol;
  return same_kernel && a.enforce_regime == b.enforce_regime && same_pot && same_int &&
         a.experiment == b.experiment && a.seed == b.seed && a.output_dir == b.output_dir;
}

namespace {

using Kind = ConfigError::Kind;

[[noreturn]] void fail(Kind kind, const std::string& key, const std::string& msg,
                       const toml::source_region& where) {
  throw ConfigError(kind, key, msg, static_cast<int>(where.begin.line),
                    static_cast<int>(where.begin.column));
}

/// Reads typed keys from one table and rejects anything it was not asked for.
class Section {
 public:
  Section(const toml::table* tbl, std::string prefix) : tbl_(tbl), prefix_(std::move(prefix)) {}

  const toml::node* node(const std::string& key) {
    known_.insert(key);
    return tbl_ ? tbl_->get(key) : nullptr;
  }

  std::string path(const std::string& key) const {
    return prefix_.empty() ? key : prefix_ + "." + key;
  }

  void real(const std::string& key, double& out) {
    if (const auto* n = node(key)) out = as_real(*n, path(key));
  }

  void opt_real(const std::string& key, std::optional<double>& out) {
    if (const auto* n = node(key)) out = as_real(*n, path(key));
  }

  void count(const std::string& key, std::size_t& out) {
    if (const auto* n = node(key)) {
      const auto* v = n->as_integer();
      if (!v) fail(Kind::TypeMismatch, path(key), "expected an integer", n->source());
      if (v->get() < 0) fail(Kind::Constraint, path(key), "must be >= 0", n->source());
      out = static_cast<std::size_t>(v->get());
    }
  }

  void flag(const std::string& key, bool& out) {
    if (const auto* n = node(key)) {
      const auto* v = n->as_boolean();
      if (!v) fail(Kind::TypeMismatch, path(key), "expected true or false", n->source());
      out = v->get();
    }
  }

  void text(const std::string& key, std::string& out) {
    if (const auto* n = node(key)) {
      const auto* v = n->as_string();
      if (!v) fail(Kind::TypeMismatch, path(key), "expected a string", n->source());
      out = v->get();
    }
  }

  void reals(const std::string& key, std::vector<double>& out) {
    if (const auto* n = node(key)) {
      const auto* arr = n->as_array();
      if (!arr) fail(Kind::TypeMismatch, path(key), "expected an array of numbers", n->source());
      out.clear();
      for (const auto& el : *arr) out.push_back(as_real(el, path(key)));
    }
  }

  void finish() const {
    if (!tbl_) return;
    for (const auto& [k, v] : *tbl_) {
      const std::string name(k.str());
      if (!known_.count(name)) fail(Kind::UnknownKey, path(name), "unknown key", v.source());
    }
  }

  toml::source_region where(const std::string& key) const {
    if (tbl_) {
      if (const auto* n = tbl_->get(key)) return n->source();
      return tbl_->source();
    }
    return {};
  }

 private:
  static double as_real(const toml::node& n, const std::string& path) {
    if (const auto* f = n.as_floating_point()) return f->get();
    if (const auto* i = n.as_integer()) return static_cast<double>(i->get());
    fail(Kind::TypeMismatch, path, "expected a number", n.source());
  }

  const toml::table* tbl_;
  std::string prefix_;
  std::set<std::string> known_;
};

const toml::table* subtable(const toml::table& root, const std::string& name) {
  const auto* n = root.get(name);
  if (!n) return nullptr;
  const auto* t = n->as_table();
  if (!t) fail(Kind::TypeMismatch, name, "expected a table", n->source());
  return t;
}

void require(bool ok, Section& sec, const std::string& key, const std::string& msg) {
  if (!ok) fail(Kind::Constraint, sec.path(key), msg, sec.where(key));
}

Potential parse_potential(const toml::node* n) {
  if (!n) return Potential::harmonic(1.0);
  const auto* t = n->as_table();
  if (!t) {
    fail(Kind::TypeMismatch, "physics.potential",
         "expected a table such as {type = \"harmonic\", k = 1.0}", n->source());
  }
  Section sec(t, "physics.potential");
  std::string type;
  sec.text("type", type);
  if (type.empty()) fail(Kind::Missing, "physics.potential.type", "missing potential type", t->source());
  try {
    if (type == "harmonic") {
      double k = 1.0;
      sec.real("k", k);
      require(k > 0.0 && std::isfinite(k), sec, "k", "must satisfy k > 0");
      sec.finish();
      return Potential::harmonic(k);
    }
    if (type == "double_well") {
      double a = 1.0, b = 1.0;
      sec.real("a", a);
      sec.real("b", b);
      require(a > 0.0 && std::isfinite(a), sec, "a", "must satisfy a > 0");
      require(std::isfinite(b), sec, "b", "must be finite");
      sec.finish();
      return Potential::double_well(a, b);
    }
    if (type == "even_polynomial") {
      std::vector<double> coeffs;
      sec.reals("coeffs", coeffs);
      if (coeffs.empty()) {
        fail(Kind::Missing, "physics.potential.coeffs", "missing coefficient list", t->source());
      }
      sec.finish();
      try {
        return Potential::even_polynomial(coeffs);
      } catch (const std::invalid_argument& e) {
        fail(Kind::Constraint, "physics.potential.coeffs", e.what(), sec.where("coeffs"));
      }
    }
    if (type == "zero") {
      sec.finish();
      return Potential::zero();
    }
  } catch (const std::invalid_argument& e) {
    fail(Kind::Constraint, "physics.potential", e.what(), t->source());
  }
  fail(Kind::Constraint, "physics.potential.type",
       "unknown potential '" + type + "' (harmonic, double_well, even_polynomial, zero)",
       sec.where("type"));
}

std::string regime_message(const KernelSpec& k) {
  const double a = k.alpha;
  if (a > 1.0) {
    return "regime (D) needs beta > 1/(alpha-1) = " + format_double(1.0 / (a - 1.0));
  }
  if (a == 1.0) return "regime (C) needs beta > 1";
  return "regime (SD) needs 0 < alpha < 1 and beta > 1/alpha = " + format_double(1.0 / a);
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    throw ConfigError(Kind::Syntax, "", std::string(e.description()),
                      static_cast<int>(e.source().begin.line),
                      static_cast<int>(e.source().begin.column));
  }
  RunConfig cfg;
  Section top(&root, "");
  // Section tables are claimed so finish() does not report them.
  top.node("kernel");
  top.node("physics");
  top.node("integrator");
  top.node("experiment");

  if (const auto* n = top.node("seed")) {
    const auto* v = n->as_integer();
    if (!v) fail(Kind::TypeMismatch, "seed", "expected an integer", n->source());
    if (v->get() < 0) fail(Kind::Constraint, "seed", "must be >= 0", n->source());
    cfg.seed = static_cast<std::uint64_t>(v->get());
  }
  top.text("output_dir", cfg.output_dir);
  top.finish();

  {
    Section k(subtable(root, "kernel"), "kernel");
    auto& ks = cfg.kernel;
    k.real("alpha", ks.alpha);
    k.real("beta", ks.beta);
    k.count("n_modes", ks.n_modes);
    k.real("s", ks.s);
    k.flag("enforce_regime", cfg.enforce_regime);
    k.finish();
    require(ks.alpha > 0.0 && std::isfinite(ks.alpha), k, "alpha", "must satisfy alpha > 0");
    require(ks.beta > 0.0 && std::isfinite(ks.beta), k, "beta", "must satisfy beta > 0");
    require(ks.n_modes >= 1, k, "n_modes", "must be at least 1");
    require(ks.s > 0.5 && std::isfinite(ks.s), k, "s", "must satisfy s > 1/2");
    if (cfg.enforce_regime) {
      const Regime r = classify_regime(ks);
      if (r.tag == RegimeTag::Unclassified) {
        fail(Kind::Regime, "kernel", regime_message(ks) + " (set enforce_regime = false to override)",
             k.where("beta"));
      }
      if (!r.s_in_range) {
        fail(Kind::Regime, "kernel.s",
             "regime (" + std::string(to_string(r.tag)) + ") needs " + format_double(r.s_lo) +
                 " < s < " + format_double(r.s_hi) + " (set enforce_regime = false to override)",
             k.where("s"));
      }
    }
  }

  auto& ic = cfg.integrator;
  {
    const auto* tbl = subtable(root, "physics");
    Section ph(tbl, "physics");
    ph.real("m", ic.m);
    ph.real("gamma", ic.gamma);
    cfg.potential = parse_potential(ph.node("potential"));
    ph.finish();
    require(ic.m > 0.0 && std::isfinite(ic.m), ph, "m", "must satisfy m > 0");
    require(ic.gamma >= 0.0 && std::isfinite(ic.gamma), ph, "gamma", "must satisfy gamma >= 0");
  }

  {
    Section in(subtable(root, "integrator"), "integrator");
    in.real("dt", ic.dt);
    in.real("t_final", ic.t_final);
    std::string scheme(to_string(ic.scheme));
    in.text("scheme", scheme);
    in.count("thin_stride", ic.thin_stride);
    in.opt_real("cutoff_R", ic.cutoff_R);
    in.real("multirate_tol", ic.multirate_tol);
    in.finish();
    try {
      ic.scheme = parse_scheme(scheme);
    } catch (const std::invalid_argument& e) {
      fail(Kind::Constraint, "integrator.scheme", e.what(), in.where("scheme"));
    }
    require(ic.dt > 0.0 && std::isfinite(ic.dt), in, "dt", "must satisfy dt > 0");
    require(ic.t_final > 0.0 && std::isfinite(ic.t_final), in, "t_final", "must satisfy t_final > 0");
    require(ic.dt <= ic.t_final, in, "dt", "must not exceed t_final");
    require(ic.thin_stride >= 1, in, "thin_stride", "must be at least 1");
    require(!ic.cutoff_R || *ic.cutoff_R > 0.0, in, "cutoff_R", "must satisfy cutoff_R > 0");
    require(ic.multirate_tol > 0.0, in, "multirate_tol", "must be > 0");
    if (ic.scheme == Scheme::EulerMaruyama && ic.gamma > 0.0) {
      require(ic.dt < ic.m / ic.gamma, in, "dt", "Euler-Maruyama needs dt < m / gamma");
    }
  }

  {
    auto& ex = cfg.experiment;
    Section e(subtable(root, "experiment"), "experiment");
    e.real("kernel_t_lo", ex.kernel_t_lo);
    e.real("kernel_t_hi", ex.kernel_t_hi);
    e.count("kernel_points", ex.kernel_points);
    e.real("fit_t_lo", ex.fit_t_lo);
    e.real("fit_t_hi", ex.fit_t_hi);
    e.real("x0", ex.x0);
    e.real("v0", ex.v0);
    e.flag("store_modes", ex.store_modes);
    e.count("n_traj", ex.n_traj);
    e.count("n_record", ex.n_record);
    e.opt_real("window_lo", ex.window_lo);
    e.opt_real("window_hi", ex.window_hi);
    e.reals("checkpoints", ex.checkpoints);
    e.flag("zero_modes", ex.zero_modes);
    e.count("record_every", ex.record_every);
    e.count("n_samples", ex.n_samples);
    e.opt_real("lambda", ex.lambda);
    if (const auto* n = e.node("kappa")) {
      if (const auto* s = n->as_string()) {
        if (s->get() != "auto") {
          fail(Kind::TypeMismatch, "experiment.kappa", "expected a number or \"auto\"", n->source());
        }
        ex.kappa.reset();
      } else {
        e.opt_real("kappa", ex.kappa);
      }
    }
    e.count("n_runs", ex.n_runs);
    e.real("xbar0", ex.xbar0);
    e.real("vbar0", ex.vbar0);
    e.real("eta", ex.eta);
    e.real("cost_R", ex.cost_R);
    e.flag("plot_scripts", ex.plot_scripts);
    e.finish();
    require(ex.kernel_t_lo > 0.0 && ex.kernel_t_hi > ex.kernel_t_lo, e, "kernel_t_hi",
            "need 0 < kernel_t_lo < kernel_t_hi");
    require(ex.kernel_points >= 10, e, "kernel_points", "must be at least 10");
    require(ex.fit_t_lo > 0.0 && ex.fit_t_hi > ex.fit_t_lo, e, "fit_t_hi",
            "need 0 < fit_t_lo < fit_t_hi");
    require(ex.n_traj >= 1, e, "n_traj", "must be at least 1");
    require(ex.n_record >= 2, e, "n_record", "must be at least 2");
    require(!ex.window_lo || *ex.window_lo > 0.0, e, "window_lo", "must be > 0");
    require(!ex.window_hi || !ex.window_lo || *ex.window_hi > *ex.window_lo, e, "window_hi",
            "must exceed window_lo");
    require(!ex.checkpoints.empty(), e, "checkpoints", "must not be empty");
    for (double t : ex.checkpoints) require(t >= 0.0, e, "checkpoints", "times must be >= 0");
    require(ex.record_every >= 1, e, "record_every", "must be at least 1");
    require(ex.n_samples >= 1, e, "n_samples", "must be at least 1");
    require(!ex.lambda || *ex.lambda > 0.0, e, "lambda", "must be > 0");
    require(!ex.kappa || *ex.kappa > 0.0, e, "kappa", "must be > 0 or \"auto\"");
    require(ex.n_runs >= 1, e, "n_runs", "must be at least 1");
    require(ex.eta > 0.0, e, "eta", "must be > 0");
    require(ex.cost_R >= 0.0, e, "cost_R", "must be >= 0");
  }
  if (cfg.seed) ic.seed = *cfg.seed;
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(Kind::Missing, "", "cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

namespace {

/// TOML floats need a decimal point or exponent.
std::string toml_real(double x) {
  std::string s = format_double(x);
  if (s.find_first_of(".eE") == std::string::npos && s.find("inf") == std::string::npos &&
      s.find("nan") == std::string::npos) {
    s += ".0";
  }
  return s;
}

std::string toml_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string emit_config(const RunConfig& cfg) {
  std::ostringstream o;
  const auto& ic = cfg.integrator;
  const auto& ex = cfg.experiment;
  if (cfg.seed) o << "seed = " << *cfg.seed << "\n";
  o << "output_dir = " << toml_string(cfg.output_dir) << "\n\n";

  o << "[kernel]\n"
    << "alpha = " << toml_real(cfg.kernel.alpha) << "\n"
    << "beta = " << toml_real(cfg.kernel.beta) << "\n"
    << "n_modes = " << cfg.kernel.n_modes << "\n"
    << "s = " << toml_real(cfg.kernel.s) << "\n"
    << "enforce_regime = " << (cfg.enforce_regime ? "true" : "false") << "\n\n";

  o << "[physics]\n"
    << "m = " << toml_real(ic.m) << "\n"
    << "gamma = " << toml_real(ic.gamma) << "\n"
    << "potential = {type = \"" << cfg.potential.kind_name() << "\"";
  const auto& par = cfg.potential.parameters();
  switch (cfg.potential.kind()) {
    case Potential::Kind::Harmonic: o << ", k = " << toml_real(par[0]); break;
    case Potential::Kind::DoubleWell:
      o << ", a = " << toml_real(par[0]) << ", b = " << toml_real(par[1]);
      break;
    case Potential::Kind::EvenPolynomial: {
      o << ", coeffs = [";
      for (std::size_t i = 0; i < par.size(); ++i) o << (i ? ", " : "") << toml_real(par[i]);
      o << "]";
      break;
    }
    case Potential::Kind::Zero: break;
  }
  o << "}\n\n";

  o << "[integrator]\n"
    << "dt = " << toml_real(ic.dt) << "\n"
    << "t_final = " << toml_real(ic.t_final) << "\n"
    << "scheme = \"" << to_string(ic.scheme) << "\"\n"
    << "thin_stride = " << ic.thin_stride << "\n";
  if (ic.cutoff_R) o << "cutoff_R = " << toml_real(*ic.cutoff_R) << "\n";
  o << "multirate_tol = " << toml_real(ic.multirate_tol) << "\n\n";

  o << "[experiment]\n"
    << "kernel_t_lo = " << toml_real(ex.kernel_t_lo) << "\n"
    << "kernel_t_hi = " << toml_real(ex.kernel_t_hi) << "\n"
    << "kernel_points = " << ex.kernel_points << "\n"
    << "fit_t_lo = " << toml_real(ex.fit_t_lo) << "\n"
    << "fit_t_hi = " << toml_real(ex.fit_t_hi) << "\n"
    << "x0 = " << toml_real(ex.x0) << "\n"
    << "v0 = " << toml_real(ex.v0) << "\n"
    << "store_modes = " << (ex.store_modes ? "true" : "false") << "\n"
    << "n_traj = " << ex.n_traj << "\n"
    << "n_record = " << ex.n_record << "\n";
  if (ex.window_lo) o << "window_lo = " << toml_real(*ex.window_lo) << "\n";
  if (ex.window_hi) o << "window_hi = " << toml_real(*ex.window_hi) << "\n";
  o << "checkpoints = [";
  for (std::size_t i = 0; i < ex.checkpoints.size(); ++i) {
    o << (i ? ", " : "") << toml_real(ex.checkpoints[i]);
  }
  o << "]\n"
    << "zero_modes = " << (ex.zero_modes ? "true" : "false") << "\n"
    << "record_every = " << ex.record_every << "\n"
    << "n_samples = " << ex.n_samples << "\n";
  if (ex.lambda) o << "lambda = " << toml_real(*ex.lambda) << "\n";
  o << "kappa = " << (ex.kappa ? toml_real(*ex.kappa) : std::string("\"auto\"")) << "\n"
    << "n_runs = " << ex.n_runs << "\n"
    << "xbar0 = " << toml_real(ex.xbar0) << "\n"
    << "vbar0 = " << toml_real(ex.vbar0) << "\n"
    << "eta = " << toml_real(ex.eta) << "\n"
    << "cost_R = " << toml_real(ex.cost_R) << "\n"
    << "plot_scripts = " << (ex.plot_scripts ? "true" : "false") << "\n";
  return o.str();
}

}  // namespace gle
