#include <sstream>

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "kmtdep/harness.hpp"

namespace py = pybind11;
using namespace kmtdep;

namespace {

py::array_t<double> to_array(const std::vector<double>& v) {
    py::array_t<double> a(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), a.mutable_data());
    return a;
}

Seed seed_of(std::uint64_t master, std::uint64_t stream, std::uint64_t replication) {
    return Seed{master, stream, replication};
}

ExperimentConfig config_from_text(const std::string& text) {
    std::istringstream in(text);
    auto cfg = parse_config(in);
    validate(cfg);
    return cfg;
}

std::string config_to_text(const ExperimentConfig& cfg) {
    std::ostringstream os;
    write_config(cfg, os);
    return os.str();
}

}  // namespace

PYBIND11_MODULE(_kmtdep, m) {
    m.doc() = "Dependence measures, blockwise pipeline and Gaussian coupling for causal processes";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    py::class_<InnovationLaw>(m, "InnovationLaw")
        .def_static("parse", &InnovationLaw::parse, py::arg("name"), py::arg("param") = 0.0)
        .def_property_readonly("name", &InnovationLaw::name)
        .def_property_readonly("p_max", &InnovationLaw::p_max)
        .def_property_readonly("mean", &InnovationLaw::mean)
        .def_property_readonly("variance", &InnovationLaw::variance)
        .def("cdf", &InnovationLaw::cdf)
        .def("quantile", &InnovationLaw::quantile)
        .def("lp_norm", &InnovationLaw::lp_norm)
        .def("__repr__", [](const InnovationLaw& l) { return "InnovationLaw(" + l.name() + ")"; });

    py::class_<CausalProcess>(m, "CausalProcess")
        .def_property_readonly("name", &CausalProcess::name)
        .def_property_readonly("law", &CausalProcess::law)
        .def_property_readonly("memory", &CausalProcess::memory)
        .def_property_readonly("min_lag", &CausalProcess::min_lag)
        .def("delta_oracle", &CausalProcess::delta_oracle, py::arg("j"), py::arg("p"))
        .def("autocov_oracle", &CausalProcess::autocov_oracle, py::arg("h"))
        .def("sigma2_oracle", &CausalProcess::sigma2_oracle)
        .def("__repr__", [](const CausalProcess& p) { return "CausalProcess(" + p.name() + ")"; });

    m.def("make_iid", &make_iid, py::arg("law") = InnovationLaw::standard_normal());
    m.def("make_ma1", &make_ma1, py::arg("theta"), py::arg("law") = InnovationLaw::standard_normal());
    m.def("make_ar1", [](double rho, const InnovationLaw& law) { return make_ar1_linear(rho, law); }, py::arg("rho"),
          py::arg("law") = InnovationLaw::standard_normal());
    m.def("make_linear", [](std::vector<double> a, const InnovationLaw& law) { return make_linear(std::move(a), law); },
          py::arg("coefficients"), py::arg("law") = InnovationLaw::standard_normal());
    m.def("make_tar", [](double a_pos, double a_neg, const InnovationLaw& law) { return make_tar(a_pos, a_neg, law); },
          py::arg("a_pos"), py::arg("a_neg"), py::arg("law") = InnovationLaw::standard_normal());
    m.def("make_arch1", [](double omega, double a, const InnovationLaw& law) { return make_arch1(omega, a, law); },
          py::arg("omega"), py::arg("a"), py::arg("law") = InnovationLaw::standard_normal());
    m.def("make_doubling_identity", &make_doubling_identity, py::arg("bit_depth") = 53);
    m.def("zoo", &zoo);

    m.def(
        "evaluate_path",
        [](const CausalProcess& proc, std::int64_t n, std::uint64_t seed, std::int64_t L) {
            if (L < 0) L = proc.min_lag();
            return to_array(evaluate_path(proc, Seed{seed, streams::panel, 0}, n, L));
        },
        py::arg("process"), py::arg("n"), py::arg("seed") = 1, py::arg("lag_budget") = -1,
        "X_1..X_n from one panel; lag_budget < 0 uses the process's minimum.");

    m.def("tau_p", &tau_p, py::arg("p"));
    m.def(
        "mk_schedule",
        [](const std::string& c, double p, std::optional<double> alpha, std::int64_t k, const std::string& base) {
            auto sched = MkSchedule::named(parse_schedule_case(c), p, alpha, parse_log_base(base));
            return sched(k);
        },
        py::arg("case"), py::arg("p"), py::arg("alpha") = std::nullopt, py::arg("k") = 2,
        py::arg("log_base") = "natural");

    py::class_<DeltaEstimate>(m, "DeltaEstimate")
        .def_readonly("j", &DeltaEstimate::j)
        .def_readonly("delta", &DeltaEstimate::delta)
        .def_readonly("se", &DeltaEstimate::se)
        .def_readonly("beyond_window", &DeltaEstimate::beyond_window);

    py::class_<DependenceProfile>(m, "DependenceProfile")
        .def_readonly("process", &DependenceProfile::process)
        .def_readonly("p", &DependenceProfile::p)
        .def_readonly("L", &DependenceProfile::L)
        .def_readonly("tail", &DependenceProfile::tail)
        .def_readonly("long_range", &DependenceProfile::long_range)
        .def_property_readonly("delta",
                               [](const DependenceProfile& d) {
                                   std::vector<double> v;
                                   for (const auto& e : d.delta) v.push_back(e.delta);
                                   return to_array(v);
                               })
        .def_property_readonly("delta_se",
                               [](const DependenceProfile& d) {
                                   std::vector<double> v;
                                   for (const auto& e : d.delta) v.push_back(e.se);
                                   return to_array(v);
                               })
        .def_property_readonly("theta", [](const DependenceProfile& d) { return to_array(d.theta); })
        .def_property_readonly("theta_se", [](const DependenceProfile& d) { return to_array(d.theta_se); })
        .def_property_readonly("fit", [](const DependenceProfile& d) {
            return d.fit ? py::object(py::str(d.fit->describe())) : py::object(py::none());
        });

    m.def(
        "estimate_delta",
        [](const CausalProcess& proc, std::int64_t j, double p, std::uint64_t seed, std::size_t reps, std::int64_t L) {
            DeltaOptions opt;
            opt.replications = reps;
            opt.lag_budget = L < 0 ? std::max<std::int64_t>(proc.min_lag(), j) : L;
            return estimate_delta(proc, j, p, Seed{seed, streams::panel, 0}, opt);
        },
        py::arg("process"), py::arg("j"), py::arg("p"), py::arg("seed") = 1, py::arg("replications") = 100000,
        py::arg("lag_budget") = -1);
    m.def(
        "estimate_profile",
        [](const CausalProcess& proc, double p, std::uint64_t seed, std::size_t reps, std::int64_t L, int workers) {
            DeltaOptions opt;
            opt.replications = reps;
            opt.lag_budget = L;
            opt.workers = workers;
            py::gil_scoped_release release;
            return estimate_profile(proc, p, Seed{seed, streams::panel, 0}, opt);
        },
        py::arg("process"), py::arg("p"), py::arg("seed") = 1, py::arg("replications") = 100000,
        py::arg("lag_budget") = 64, py::arg("workers") = 0);
    m.def("analytic_profile", &analytic_profile, py::arg("process"), py::arg("p"), py::arg("lag_budget"));

    py::class_<ThetaModel>(m, "ThetaModel")
        .def_static("geometric", &ThetaModel::geometric, py::arg("c"), py::arg("rho"))
        .def_static("power_log", &ThetaModel::power_log, py::arg("c"), py::arg("tau"), py::arg("A"))
        .def_static("constant", &ThetaModel::constant, py::arg("c"))
        .def_static("from_profile", &ThetaModel::from_profile, py::arg("profile"))
        .def("log_theta", &ThetaModel::log_theta)
        .def("describe", &ThetaModel::describe);

    py::class_<ConditionCheck>(m, "ConditionCheck")
        .def_readonly("label", &ConditionCheck::label)
        .def_readonly("passed", &ConditionCheck::pass)
        .def_readonly("evidence", &ConditionCheck::evidence);
    py::class_<ConditionReport>(m, "ConditionReport")
        .def_readonly("p", &ConditionReport::p)
        .def_readonly("alpha", &ConditionReport::alpha)
        .def_readonly("xi", &ConditionReport::xi)
        .def_readonly("checks", &ConditionReport::checks)
        .def_property_readonly("all_pass", &ConditionReport::all_pass)
        .def("text", &ConditionReport::text);
    m.def(
        "check_conditions",
        [](const ThetaModel& theta, double p, const std::string& c, std::optional<double> alpha) {
            auto sched = MkSchedule::named(parse_schedule_case(c), p, alpha);
            return check_theorem_conditions(theta, sched.alpha(), sched, p);
        },
        py::arg("theta"), py::arg("p"), py::arg("case") = "iii", py::arg("alpha") = std::nullopt);

    py::class_<TruncMomentReport>(m, "TruncMomentReport")
        .def_readonly("tail_terms", &TruncMomentReport::tail_terms)
        .def_readonly("moment_terms", &TruncMomentReport::moment_terms)
        .def_readonly("tail_sum", &TruncMomentReport::tail_sum)
        .def_readonly("moment_sum", &TruncMomentReport::moment_sum)
        .def_property_readonly("tail_verdict", [](const TruncMomentReport& r) { return verdict_name(r.tail_verdict); })
        .def_property_readonly("moment_verdict",
                               [](const TruncMomentReport& r) { return verdict_name(r.moment_verdict); })
        .def("text", &TruncMomentReport::text);
    m.def("truncated_moment_series", &lemma_truncmoment_check, py::arg("law"), py::arg("p"), py::arg("alpha"),
          py::arg("horizon") = 60);

    py::class_<CltResult>(m, "CltResult")
        .def_readonly("process", &CltResult::process)
        .def_readonly("sigma2", &CltResult::sigma2)
        .def_readonly("ks", &CltResult::ks)
        .def_readonly("critical", &CltResult::critical)
        .def_readonly("passed", &CltResult::pass);
    m.def(
        "clt_check",
        [](const CausalProcess& proc, std::int64_t n, int reps, std::uint64_t seed) {
            py::gil_scoped_release release;
            return clt_check(proc, n, reps, Seed{seed, streams::aux, 0});
        },
        py::arg("process"), py::arg("n"), py::arg("replications") = 2000, py::arg("seed") = 1);

    m.def("parse_n_grid", &parse_n_grid);

    py::class_<ExperimentConfig>(m, "ExperimentConfig")
        .def(py::init<>())
        .def_static("from_ini", &config_from_text, py::arg("text"))
        .def_static("load", [](const std::string& path) {
            auto cfg = load_config(path);
            validate(cfg);
            return cfg;
        })
        .def("to_ini", &config_to_text)
        .def_property(
            "process_kind", [](const ExperimentConfig& c) { return c.process.kind; },
            [](ExperimentConfig& c, const std::string& k) { c.process.kind = k; })
        .def_readwrite("p", &ExperimentConfig::p)
        .def_readwrite("alpha", &ExperimentConfig::alpha)
        .def_readwrite("n_grid", &ExperimentConfig::n_grid)
        .def_readwrite("replications", &ExperimentConfig::replications)
        .def_readwrite("seed", &ExperimentConfig::seed)
        .def_readwrite("out", &ExperimentConfig::out)
        .def_readwrite("workers", &ExperimentConfig::workers)
        .def_readwrite("schedule", &ExperimentConfig::schedule)
        .def_readwrite("schedule_m", &ExperimentConfig::schedule_m)
        .def_readwrite("theta_model", &ExperimentConfig::theta_model)
        .def_readwrite("inner_reps", &ExperimentConfig::inner_reps)
        .def_readwrite("block_law_samples", &ExperimentConfig::block_law_samples)
        .def_readwrite("dep_replications", &ExperimentConfig::dep_replications)
        .def_readwrite("dep_lag_budget", &ExperimentConfig::dep_lag_budget)
        .def("validate", [](const ExperimentConfig& c) { validate(c); });

    py::class_<RateFit>(m, "RateFit")
        .def_readonly("slope", &RateFit::slope)
        .def_readonly("intercept", &RateFit::intercept)
        .def_readonly("r2", &RateFit::r2)
        .def_readonly("n", &RateFit::n)
        .def_readonly("median", &RateFit::median)
        .def_readonly("note", &RateFit::note);

    py::class_<SipExperiment>(m, "SipExperiment")
        .def_readonly("rate_D", &SipExperiment::rate_D)
        .def_readonly("rate_D_prime", &SipExperiment::rate_D_prime)
        .def_readonly("rate_D_sip", &SipExperiment::rate_D_sip)
        .def_readonly("median_D_over_root", &SipExperiment::median_D_over_root)
        .def_readonly("sigma_zero", &SipExperiment::sigma_zero)
        .def_property_readonly("nu",
                               [](const SipExperiment& e) { return to_array(e.variance.nu); })
        .def("text", &SipExperiment::text, py::arg("p"));
    m.def(
        "run_sip_experiment",
        [](const ExperimentConfig& cfg) {
            py::gil_scoped_release release;
            return run_sip_experiment(cfg);
        },
        py::arg("config"));

    auto command = [](int (*fn)(const ExperimentConfig&, std::ostream&)) {
        return [fn](const ExperimentConfig& cfg) {
            std::ostringstream log;
            int rc;
            {
                py::gil_scoped_release release;
                rc = fn(cfg, log);
            }
            return py::make_tuple(rc, log.str());
        };
    };
    m.def("simulate", command(&cmd_simulate), py::arg("config"), "Returns (exit code, log).");
    m.def("depmeasure", command(&cmd_depmeasure), py::arg("config"));
    m.def("check_conditions_cmd", command(&cmd_check_conditions), py::arg("config"));
    m.def("sip_experiment", command(&cmd_sip_experiment), py::arg("config"));
    m.def("report", command(&cmd_report), py::arg("config"));
}
