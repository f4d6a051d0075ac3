#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "gle/config.hpp"
#include "gle/coupling.hpp"
#include "gle/kernel.hpp"
#include "gle/measure.hpp"
#include "gle/potential.hpp"
#include "gle/runner.hpp"
#include "gle/statistics.hpp"

namespace py = pybind11;
using namespace gle;

namespace {

py::array_t<double> to_array(const std::vector<double>& v) {
  return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
}

// Trajectory as a dict of arrays; z is (n_times, n_modes) when modes were stored.
py::dict trajectory_dict(const Trajectory& tr) {
  const std::size_t n = tr.states.size();
  py::array_t<double> x(static_cast<py::ssize_t>(n));
  py::array_t<double> v(static_cast<py::ssize_t>(n));
  auto xm = x.mutable_unchecked<1>();
  auto vm = v.mutable_unchecked<1>();
  const std::size_t nm = n ? tr.states.front().n_modes() : 0;
  py::array_t<double> z({static_cast<py::ssize_t>(n), static_cast<py::ssize_t>(nm)});
  auto zm = z.mutable_unchecked<2>();
  for (std::size_t i = 0; i < n; ++i) {
    xm(i) = tr.states[i].x;
    vm(i) = tr.states[i].v;
    for (std::size_t k = 0; k < nm && k < tr.states[i].z.size(); ++k) zm(i, k) = tr.states[i].z[k];
  }
  py::dict d;
  d["t"] = to_array(tr.times);
  d["x"] = x;
  d["v"] = v;
  d["z"] = z;
  d["seed_used"] = tr.seed_used;
  d["sup_norm_sq"] = tr.sup_norm_sq;
  return d;
}

// Applies f elementwise; scalars in, scalar out.
template <class F>
py::object map_double(py::object x, F f) {
  if (py::isinstance<py::float_>(x) || py::isinstance<py::int_>(x)) {
    return py::float_(f(x.cast<double>()));
  }
  auto a = py::array_t<double, py::array::c_style | py::array::forcecast>::ensure(x);
  if (!a) throw std::invalid_argument("expected a float or an array of floats");
  py::array_t<double> out(std::vector<py::ssize_t>(a.shape(), a.shape() + a.ndim()));
  const double* in = a.data();
  double* o = out.mutable_data();
  for (py::ssize_t i = 0; i < a.size(); ++i) o[i] = f(in[i]);
  return std::move(out);
}

}  // namespace

PYBIND11_MODULE(_gle, mod) {
  mod.doc() = "Truncated generalized Langevin dynamics with power-law memory";
  mod.attr("__version__") = version();

  py::register_exception<BlowUpError>(mod, "BlowUpError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(mod, "ConfigError", PyExc_ValueError);

  // kernel
  py::class_<KernelSpec>(mod, "KernelSpec")
      .def(py::init([](double alpha, double beta, std::size_t n_modes, double s) {
             KernelSpec k{alpha, beta, n_modes, s};
             k.validate();
             return k;
           }),
           py::arg("alpha") = 1.5, py::arg("beta") = 3.0, py::arg("n_modes") = 50,
           py::arg("s") = 0.6)
      .def_readwrite("alpha", &KernelSpec::alpha)
      .def_readwrite("beta", &KernelSpec::beta)
      .def_readwrite("n_modes", &KernelSpec::n_modes)
      .def_readwrite("s", &KernelSpec::s)
      .def("validate", &KernelSpec::validate)
      .def("__repr__", [](const KernelSpec& k) {
        std::ostringstream os;
        os << "KernelSpec(alpha=" << k.alpha << ", beta=" << k.beta << ", n_modes=" << k.n_modes
           << ", s=" << k.s << ")";
        return os.str();
      });

  py::class_<ModeSet>(mod, "ModeSet")
      .def(py::init<>())
      .def(py::init([](std::vector<double> c, std::vector<double> lambda) {
        if (c.size() != lambda.size()) throw std::invalid_argument("c and lambda differ in length");
        return ModeSet{std::move(c), std::move(lambda)};
      }))
      .def_property_readonly("c", [](const ModeSet& m) { return to_array(m.c); })
      .def_property_readonly("lam", [](const ModeSet& m) { return to_array(m.lambda); })
      .def("prefix", &ModeSet::prefix)
      .def("__len__", &ModeSet::size);

  mod.def("build_modes", &build_modes);
  mod.def(
      "eval_kernel",
      [](const ModeSet& m, py::object t) {
        return map_double(t, [&](double u) { return eval_kernel(m, u); });
      },
      py::arg("modes"), py::arg("t"));
  mod.def("kernel_mass", &kernel_mass);
  mod.def("truncation_tail_bound", &truncation_tail_bound);
  mod.def("kernel_l2_squared", &kernel_l2_squared);
  mod.def("logspace",
          [](double lo, double hi, std::size_t n) { return to_array(logspace(lo, hi, n)); });

  py::enum_<RegimeTag>(mod, "RegimeTag")
      .value("Diffusive", RegimeTag::Diffusive)
      .value("Critical", RegimeTag::Critical)
      .value("Subdiffusive", RegimeTag::Subdiffusive)
      .value("Unclassified", RegimeTag::Unclassified);

  py::class_<Regime>(mod, "Regime")
      .def_readonly("tag", &Regime::tag)
      .def_readonly("s_lo", &Regime::s_lo)
      .def_readonly("s_hi", &Regime::s_hi)
      .def_readonly("s_in_range", &Regime::s_in_range);
  mod.def("classify_regime", &classify_regime);

  py::class_<TailFit>(mod, "TailFit")
      .def_readonly("slope", &TailFit::slope)
      .def_readonly("intercept", &TailFit::intercept)
      .def_readonly("window_exceeds_plateau", &TailFit::window_exceeds_plateau)
      .def_readonly("plateau_limit", &TailFit::plateau_limit);
  mod.def("fit_tail_exponent", &fit_tail_exponent, py::arg("modes"), py::arg("t_lo"),
          py::arg("t_hi"), py::arg("n_points") = 200);

  // potential
  py::class_<Potential>(mod, "Potential")
      .def_static("harmonic", &Potential::harmonic, py::arg("k") = 1.0)
      .def_static("even_polynomial", &Potential::even_polynomial)
      .def_static("double_well", &Potential::double_well, py::arg("a") = 1.0, py::arg("b") = 1.0)
      .def_static("zero", &Potential::zero)
      .def_property_readonly("kind", [](const Potential& p) { return std::string(p.kind_name()); })
      .def_property_readonly("coefficients", &Potential::coefficients)
      .def("phi",
           [](const Potential& p, py::object x) {
             return map_double(x, [&](double u) { return p.phi(u); });
           })
      .def("dphi",
           [](const Potential& p, py::object x) {
             return map_double(x, [&](double u) { return p.dphi(u); });
           })
      .def("d2phi",
           [](const Potential& p, py::object x) {
             return map_double(x, [&](double u) { return p.d2phi(u); });
           });

  py::class_<AssumptionReport>(mod, "AssumptionReport")
      .def_readonly("conforming", &AssumptionReport::conforming)
      .def_readonly("b_estimate", &AssumptionReport::b_estimate)
      .def_readonly("growth_ok", &AssumptionReport::growth_ok)
      .def_readonly("derivative_bound_ok", &AssumptionReport::derivative_bound_ok)
      .def_readonly("derivative_integral", &AssumptionReport::derivative_integral)
      .def_readonly("derivative_integral_ok", &AssumptionReport::derivative_integral_ok)
      .def_readonly("notes", &AssumptionReport::notes);
  mod.def("check_assumptions", &check_assumptions, py::arg("potential"), py::arg("x_max") = 10.0,
          py::arg("n_points") = 2001);

  // dynamics
  py::class_<State>(mod, "State")
      .def(py::init<>())
      .def(py::init<double, double, std::vector<double>>(), py::arg("x"), py::arg("v"),
           py::arg("z"))
      .def_readwrite("x", &State::x)
      .def_readwrite("v", &State::v)
      .def_readwrite("z", &State::z)
      .def("__eq__", [](const State& a, const State& b) { return a == b; });

  py::enum_<Scheme>(mod, "Scheme")
      .value("EulerMaruyama", Scheme::EulerMaruyama)
      .value("SplittingExactOU", Scheme::SplittingExactOU)
      .value("MultiRateOU", Scheme::MultiRateOU);

  py::class_<SimConfig>(mod, "SimConfig")
      .def(py::init([](double m, double gamma, double dt, double t_final, std::uint64_t seed,
                       Scheme scheme, std::size_t thin_stride, std::optional<double> cutoff_R) {
             SimConfig c;
             c.m = m;
             c.gamma = gamma;
             c.dt = dt;
             c.t_final = t_final;
             c.seed = seed;
             c.scheme = scheme;
             c.thin_stride = thin_stride;
             c.cutoff_R = cutoff_R;
             c.validate();
             return c;
           }),
           py::arg("m") = 1.0, py::arg("gamma") = 1.0, py::arg("dt") = 1e-3,
           py::arg("t_final") = 1.0, py::arg("seed") = 0,
           py::arg("scheme") = Scheme::SplittingExactOU, py::arg("thin_stride") = 1,
           py::arg("cutoff_R") = std::nullopt)
      .def_readwrite("m", &SimConfig::m)
      .def_readwrite("gamma", &SimConfig::gamma)
      .def_readwrite("dt", &SimConfig::dt)
      .def_readwrite("t_final", &SimConfig::t_final)
      .def_readwrite("seed", &SimConfig::seed)
      .def_readwrite("scheme", &SimConfig::scheme)
      .def_readwrite("thin_stride", &SimConfig::thin_stride)
      .def_readwrite("cutoff_R", &SimConfig::cutoff_R)
      .def_readwrite("multirate_tol", &SimConfig::multirate_tol)
      .def_property_readonly("n_steps", &SimConfig::n_steps);

  mod.def("init_state", &init_state, py::arg("x0"), py::arg("v0"), py::arg("mode_seed"),
          py::arg("n_modes"));
  mod.def(
      "simulate",
      [](const State& initial, const ModeSet& modes, const Potential& p, const SimConfig& cfg,
         bool store_modes, double s) {
        SimulateOptions opts;
        opts.store_modes = store_modes;
        opts.s = s;
        Trajectory tr;
        {
          py::gil_scoped_release release;
          tr = simulate(initial, modes, p, cfg, opts);
        }
        return trajectory_dict(tr);
      },
      py::arg("initial"), py::arg("modes"), py::arg("potential"), py::arg("cfg"),
      py::arg("store_modes") = true, py::arg("s") = 0.6);

  // measure
  mod.def("norm_minus_s", &norm_minus_s);
  mod.def("lyapunov_psi", &lyapunov_psi);
  mod.def("lyapunov_theta", &lyapunov_theta);
  mod.def("generator_on_psi", &generator_on_psi);
  mod.def("generator_on_theta", &generator_on_theta);
  mod.def("zeta_tail", &zeta_tail);

  py::class_<ThetaConstants>(mod, "ThetaConstants")
      .def_readonly("split_N", &ThetaConstants::split_N)
      .def_readonly("admissible", &ThetaConstants::admissible)
      .def_readonly("a", &ThetaConstants::a)
      .def_readonly("a1_theta", &ThetaConstants::a1_theta)
      .def_readonly("a1_theta_full", &ThetaConstants::a1_theta_full)
      .def_readonly("split_N_full", &ThetaConstants::split_N_full);
  mod.def("theta_constants", &theta_constants);

  py::class_<PsiConstants>(mod, "PsiConstants")
      .def_readonly("a1", &PsiConstants::a1)
      .def_readonly("a2", &PsiConstants::a2)
      .def_readonly("a1_full", &PsiConstants::a1_full)
      .def_readonly("a2_full", &PsiConstants::a2_full);
  mod.def("psi_constants", &psi_constants);

  py::class_<GibbsMarginal>(mod, "GibbsMarginal")
      .def(py::init<const Potential&, double>(), py::arg("potential"), py::arg("abs_tol") = 1e-10)
      .def_property_readonly("normalizer", &GibbsMarginal::normalizer)
      .def("density",
           [](const GibbsMarginal& g, py::object x) {
             return map_double(x, [&](double u) { return g.density(u); });
           })
      .def("cdf",
           [](const GibbsMarginal& g, py::object x) {
             return map_double(x, [&](double u) { return g.cdf(u); });
           })
      .def("expect", &GibbsMarginal::expect);

  py::class_<GibbsSampler>(mod, "GibbsSampler")
      .def(py::init<const Potential&, double, std::size_t, std::uint64_t, std::optional<double>>(),
           py::arg("potential"), py::arg("m"), py::arg("n_modes"), py::arg("seed"),
           py::arg("envelope_b") = std::nullopt)
      .def_property_readonly("envelope_b", &GibbsSampler::envelope_b)
      .def("sample", py::overload_cast<std::uint64_t>(&GibbsSampler::sample, py::const_))
      .def(
          "sample_many",
          [](const GibbsSampler& g, std::size_t n, unsigned threads) {
            py::gil_scoped_release release;
            return g.sample_many(n, threads);
          },
          py::arg("n"), py::arg("threads") = 1);

  // statistics
  mod.def("ks_statistic", &ks_statistic);
  mod.def("normal_cdf", &normal_cdf, py::arg("x"), py::arg("mean") = 0.0, py::arg("sd") = 1.0);
  mod.def("integrated_autocorrelation_time",
          [](const std::vector<double>& s) { return integrated_autocorrelation_time(s); });
  mod.def("time_average", [](const std::vector<double>& t, const std::vector<double>& f) {
    return time_average(t, f).value;
  });
  mod.def(
      "msd_ensemble",
      [](const ModeSet& modes, const SimConfig& cfg, std::size_t n_traj, std::size_t n_record,
         unsigned threads, std::optional<double> window_lo, std::optional<double> window_hi) {
        EnsembleSpec es;
        es.n_traj = n_traj;
        es.n_record = n_record;
        es.threads = threads;
        MsdCurve c;
        {
          py::gil_scoped_release release;
          c = msd_ensemble(es, modes, Potential::zero(), cfg, window_lo, window_hi);
        }
        py::dict d;
        d["t"] = to_array(c.times);
        d["msd"] = to_array(c.msd);
        d["stderr"] = to_array(c.stderr_);
        d["window"] = py::make_tuple(c.window_lo, c.window_hi);
        d["window_clamped"] = c.window_clamped;
        d["slope"] = c.slope;
        d["intercept"] = c.intercept;
        return d;
      },
      py::arg("modes"), py::arg("cfg"), py::arg("n_traj") = 100, py::arg("n_record") = 60,
      py::arg("threads") = 1, py::arg("window_lo") = std::nullopt,
      py::arg("window_hi") = std::nullopt);
  mod.def("exact_free_msd",
          [](const ModeSet& modes, double m, double gamma, const std::vector<double>& t, double h) {
            return to_array(exact_free_msd(modes, m, gamma, t, h));
          },
          py::arg("modes"), py::arg("m"), py::arg("gamma"), py::arg("t"), py::arg("h") = 1e-3);

  // coupling
  mod.def("control_u0", &control_u0);
  mod.def("default_lambda", &default_lambda);
  mod.def("clopper_pearson", &clopper_pearson);
  mod.def(
      "run_coupling",
      [](const State& X0, const State& Xt0, const KernelSpec& spec, const Potential& p,
         const SimConfig& cfg, std::optional<double> lambda_ctrl, std::optional<double> kappa,
         std::size_t n_runs, unsigned threads) {
        const ModeSet modes = build_modes(spec);
        const double lam = lambda_ctrl.value_or(default_lambda(modes));
        const State Xbar0(X0.x - Xt0.x, X0.v - Xt0.v, [&] {
          std::vector<double> zb(X0.z.size());
          for (std::size_t k = 0; k < zb.size(); ++k) zb[k] = X0.z[k] - Xt0.z.at(k);
          return zb;
        }());
        const double kap =
            kappa ? *kappa
                  : cost_bound(X0, Xbar0, spec, modes, p, cfg.m, cfg.gamma, lam).kappa_auto;
        CouplingOptions opts;
        opts.n_runs = n_runs;
        opts.threads = threads;
        CouplingReport r;
        {
          py::gil_scoped_release release;
          r = run_coupling_experiment(X0, Xt0, spec, modes, p, cfg, lam, kap, opts);
        }
        std::vector<double> final_norms, costs;
        for (const auto& run : r.runs) {
          final_norms.push_back(run.final_norm);
          costs.push_back(run.cost);
        }
        py::dict d;
        d["lambda"] = r.lambda_ctrl;
        d["kappa"] = r.kappa;
        d["never_stopped_fraction"] = r.never_stopped_fraction;
        d["ci"] = py::make_tuple(r.ci_lo, r.ci_hi);
        d["max_ratio"] = r.max_ratio;
        d["final_norms"] = to_array(final_norms);
        d["costs"] = to_array(costs);
        d["regime"] = r.regime;
        return d;
      },
      py::arg("X0"), py::arg("Xt0"), py::arg("spec"), py::arg("potential"), py::arg("cfg"),
      py::arg("lambda_ctrl") = std::nullopt, py::arg("kappa") = std::nullopt,
      py::arg("n_runs") = 10, py::arg("threads") = 1);

  // config and runner
  py::class_<RunConfig>(mod, "RunConfig")
      .def_readwrite("kernel", &RunConfig::kernel)
      .def_readwrite("potential", &RunConfig::potential)
      .def_readwrite("integrator", &RunConfig::integrator)
      .def_readwrite("seed", &RunConfig::seed)
      .def_readwrite("output_dir", &RunConfig::output_dir)
      .def("__eq__", [](const RunConfig& a, const RunConfig& b) { return a == b; });
  mod.def("parse_config", &parse_config);
  mod.def("load_config", &load_config);
  mod.def("emit_config", &emit_config);
  mod.def(
      "run_subcommand",
      [](const std::string& name, const RunConfig& cfg, unsigned threads) {
        std::ostringstream log;
        std::vector<std::string> files;
        {
          py::gil_scoped_release release;
          files = run_subcommand(name, cfg, threads, log);
        }
        return files;
      },
      py::arg("name"), py::arg("cfg"), py::arg("threads") = 1);
  mod.def("subcommands", &subcommands);
}
