// Acceptance checks 1-10. `acceptance` runs all of them; `acceptance N` runs one.
// Each prints a single "criterion N: PASS|FAIL ..." line; the exit code is the
// number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "kmtdep/harness.hpp"
#include "kmtdep/parallel.hpp"
#include "kmtdep/stats.hpp"

using namespace kmtdep;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double x, int prec = 4) {
    std::ostringstream os;
    os.precision(prec);
    os << x;
    return os.str();
}

// 1. Closed form of tau_p.
Outcome tau_closed_form() {
    Outcome o{true, ""};
    double worst = 0.0;
    for (double p : {2.5, 3.0, 4.0, 5.0, 6.0, 8.0}) worst = std::max(worst, std::abs(tau_residual(p, tau_p(p))));
    const bool exact4 = tau_p(4.0) == 1.0;
    o.pass = exact4 && worst < 1e-12;
    o.detail = "tau_p(4) = " + fmt(tau_p(4.0), 17) + ", max residual over p in {2.5,3,4,5,6,8} = " + fmt(worst, 3) +
               " (< 1e-12)";
    return o;
}

// 2. Dependence measure against the AR(1) oracle.
Outcome delta_oracle() {
    auto proc = make_ar1_linear(0.5);
    DeltaOptions opt;
    opt.replications = 100000;
    opt.lag_budget = 64;
    auto prof = estimate_profile(proc, 2.0, Seed{1, streams::panel, 0}, opt);
    double worst_z = 0.0;
    for (int j = 0; j <= 10; ++j) {
        const auto& d = prof.delta[static_cast<std::size_t>(j)];
        worst_z = std::max(worst_z, std::abs(d.delta - std::sqrt(2.0) * std::pow(0.5, j)) / d.se);
    }
    const double theta_z = std::abs(prof.theta[0] - 2.0 * std::sqrt(2.0)) / prof.theta_se[0];
    return {worst_z <= 3.0 && theta_z <= 3.0,
            "max |delta_j - sqrt2 0.5^j| / SE over j = 0..10: " + fmt(worst_z, 3) + "; Theta_0 = " +
                fmt(prof.theta[0], 6) + " (" + fmt(theta_z, 3) + " SE from 2 sqrt2); N = 1e5"};
}

bool check_passes(const ConditionReport& r, const std::string& label) {
    for (const auto& c : r.checks)
        if (c.label == label) return c.pass;
    return false;
}

// 3. Condition checker.
Outcome condition_checker() {
    auto ii = MkSchedule::named(ScheduleCase::ii, 4.0);
    auto geo_model = check_theorem_conditions(ThetaModel::geometric(1.0, 0.5), ii.alpha(), ii, 4.0);
    auto geo_profile = check_theorem_conditions(analytic_profile(make_ar1_linear(0.5), 4.0, 64), ii.alpha(), ii);
    auto flat = check_theorem_conditions(ThetaModel::constant(1.0), ii.alpha(), ii, 4.0);
    auto a1 = check_theorem_conditions(ThetaModel::power_log(1.0, 1.0, 1.0), ii.alpha(), ii, 4.0);
    auto a2 = check_theorem_conditions(ThetaModel::power_log(1.0, 1.0, 2.0), ii.alpha(), ii, 4.0);
    const bool ok = geo_model.all_pass() && geo_profile.all_pass() && !check_passes(flat, "theta_series") &&
                    !a1.all_pass() && a2.all_pass();
    auto yn = [](bool b) { return b ? std::string("pass") : std::string("fail"); };
    return {ok, "geometric Theta " + yn(geo_model.all_pass()) + ", AR(1) profile " + yn(geo_profile.all_pass()) +
                    ", constant Theta theta_series " + yn(check_passes(flat, "theta_series")) +
                    ", m^-1 (log m)^-1 " + yn(a1.all_pass()) + ", m^-1 (log m)^-2 " + yn(a2.all_pass()) +
                    " (case ii, p = 4, alpha = 6)"};
}

// 4. Pipeline exactness.
Outcome pipeline_exactness() {
    CounterRng rng(Seed{4, streams::aux, 0});
    auto proc = make_ar1_linear(0.5);
    PipelineOptions po;
    po.inner_reps = 16;
    po.centering_draws = 100000;
    int exact = 0, audited = 0;
    for (int t = 0; t < 100; ++t) {
        const double u = rng.uniform(t, 0);
        const auto n = static_cast<std::int64_t>(30 + std::floor(std::pow(19683.0 / 30.0, rng.uniform(t, 1)) * 30.0) - 30);
        MkSchedule sched = MkSchedule::constant(1, 3.0, 4.0);
        if (u < 0.25) {
            sched = MkSchedule::named(ScheduleCase::iii, 3.0);
        } else if (u < 0.5) {
            sched = MkSchedule::named(ScheduleCase::ii, 4.0);
        } else if (u < 0.75) {
            sched = MkSchedule::constant(1 + static_cast<std::int64_t>(rng.uniform(t, 2) * 5), 3.0, 4.0);
        } else {
            std::vector<std::int64_t> v;
            for (int k = 1; k <= 10; ++k) v.push_back(1 + static_cast<std::int64_t>(rng.uniform(t, 10 + k) * 4));
            sched = MkSchedule::explicit_values(v, 3.0, 4.0);
        }
        const std::int64_t nn = std::max<std::int64_t>(n, 30);
        audited += audit_windows(layout(nn, sched)).ok();
        PipelineContext ctx(proc, sched, sched.p(), nn, Seed{4, 0, static_cast<std::uint64_t>(t)}, po);
        auto d = decompose(ctx, Seed{4, streams::panel, static_cast<std::uint64_t>(t)}, nn);
        bool ok = true;
        for (const auto& b : d.blocks) {
            ExactSum s;
            for (std::int64_t i = b.window.start; i < b.window.end; ++i) s.add(d.xtilde[static_cast<std::size_t>(i)]);
            ok &= s.value() == b.value;
            for (std::int64_t i : {b.window.count_time - 1, b.window.count_time}) {
                if (i < 1 || i > nn) continue;
                ok &= d.diamond_from_blocks(i) == d.S_diamond[static_cast<std::size_t>(i)];
                ok &= d.diamond_from_xtilde(i) == d.S_diamond[static_cast<std::size_t>(i)];
            }
        }
        ok &= d.diamond_from_blocks(nn) == d.S_diamond[static_cast<std::size_t>(nn)];
        exact += ok;
    }
    // Negative control: m_k = 1 on AR(1) rho = 0.9.
    auto ar9 = make_ar1_linear(0.9);
    PipelineContext ctx(ar9, MkSchedule::constant(1, 3.0, 4.0), 3.0, 729, Seed{4, 0, 1000}, po);
    std::vector<BlockDecomposition> reps;
    for (std::uint64_t r = 0; r < 200; ++r) reps.push_back(decompose(ctx, Seed{4, streams::panel, 1000 + r}, 729));
    auto audit = block_independence_audit(reps);
    const bool detected = !audit.correlations_within && audit.max_pooled_abs > audit.band;
    return {exact == 100 && audited == 100 && detected,
            "bit-exact reconstruction " + std::to_string(exact) + "/100, window audit " + std::to_string(audited) +
                "/100; negative control max pooled |corr| " + fmt(audit.max_pooled_abs, 3) + " vs band " +
                fmt(audit.band, 3) + (detected ? " (detected)" : " (missed)")};
}

// 5. Variance machinery.
Outcome variance_machinery() {
    std::string detail;
    bool ok = true;
    const int k = 8;
    for (const auto& proc : {make_ma1(0.5), make_ar1_linear(0.5)}) {
        // Large m_k makes the block edge term 2 sum d gamma_d / (3 m) negligible.
        const std::int64_t m = 200;
        auto sched = MkSchedule::constant(m, 3.0, 4.0);
        PipelineContext ctx(proc, sched, 3.0, pow3(k), Seed{5, 0, 0});
        auto vm = build_variance_model(ctx, Seed{5, 0, 0});
        std::vector<double> b(10000);
        parallel_for(b.size(), 0, [&](std::size_t r) { b[r] = simulate_block(ctx, k, Seed{5, streams::block_law, r}); });
        const double mu = mean(b);
        std::vector<double> dev(b.size());
        for (std::size_t i = 0; i < b.size(); ++i) dev[i] = (b[i] - mu) * (b[i] - mu);
        const double est = variance(b) / (3.0 * static_cast<double>(m));
        const double se = sample_sd(dev) / std::sqrt(static_cast<double>(b.size())) / (3.0 * static_cast<double>(m));
        const double nu = vm.nu[static_cast<std::size_t>(k)];
        const double z = std::abs(nu - est) / std::hypot(se, vm.nu_se[static_cast<std::size_t>(k)]);
        ok &= z <= 3.0;
        detail += proc.name() + ": nu_" + std::to_string(k) + " = " + fmt(nu, 6) + " vs Var(B)/(3m) = " + fmt(est, 6) +
                  " (" + fmt(z, 3) + " SE, m = 200); ";
    }
    auto proc = make_ar1_linear(0.5);
    auto sched = MkSchedule::named(ScheduleCase::iii, 3.0);
    PipelineContext ctx(proc, sched, 3.0, pow3(10), Seed{5, 0, 1});
    auto vm = build_variance_model(ctx, Seed{5, 0, 1});
    const double rel = std::abs(vm.nu[10] - 4.0) / 4.0;
    ok &= rel < 0.02;
    detail += "AR(1) case iii: |nu_10 - sigma^2| / sigma^2 = " + fmt(rel, 3) + " (< 0.02)";
    return {ok, detail};
}

struct CouplingRun {
    std::vector<CoupledPaths> paths;
    std::vector<std::optional<BlockLaw>> laws;
};

CouplingRun run_coupling(const CausalProcess& proc, const MkSchedule& sched, std::int64_t n, std::size_t reps,
                         std::uint64_t seed) {
    PipelineOptions po;
    po.inner_reps = 64;
    PipelineContext ctx(proc, sched, sched.p(), n, Seed{seed, 0, 0}, po);
    auto vm = build_variance_model(ctx, Seed{seed, 0, 0});
    const auto lay = layout(n, sched);
    CouplingRun run;
    run.laws = build_block_laws(ctx, vm, lay.K0, lay.h, Seed{seed, 0, 0});
    run.paths.resize(reps);
    parallel_for(reps, 0, [&](std::size_t r) {
        auto d = decompose(ctx, Seed{seed, streams::panel, r}, n);
        run.paths[r] = couple_blocks(d, vm, run.laws, Seed{seed, streams::coupling, r});
    });
    return run;
}

// 6. Coupling law correctness.
Outcome coupling_laws() {
    const std::size_t R = 500;
    bool ok = true;
    std::string detail;
    double worst_construction = 0.0;
    struct Case {
        CausalProcess proc;
        MkSchedule sched;
    };
    std::vector<Case> cases{{make_ar1_linear(0.5), MkSchedule::named(ScheduleCase::iii, 3.0)},
                            {make_tar(0.6, -0.4), MkSchedule::named(ScheduleCase::iii, 3.0)},
                            {make_iid(InnovationLaw::rademacher()), MkSchedule::constant(1, 3.0, 4.0)}};
    for (const auto& c : cases) {
        auto run = run_coupling(c.proc, c.sched, 2187, R, 6);
        const auto& g0 = run.paths[0].grid;
        // One block per scale: j = 1 at each scale on the grid.
        std::map<int, std::size_t> first;
        for (std::size_t g = 0; g < g0.size(); ++g)
            if (!first.count(g0[g].k)) first[g0[g].k] = g;
        double worst_block = 0.0, worst_inc = 0.0, worst_u = 0.0;
        bool case_ok = true;
        for (const auto& [k, g] : first) {
            const auto& law = *run.laws[static_cast<std::size_t>(k)];
            std::vector<double> blocks, incs, us;
            for (const auto& p : run.paths) {
                const auto& gp = p.grid[g];
                blocks.push_back(gp.block);
                us.push_back(gp.uniform);
                incs.push_back(gp.gaussian_increment / std::sqrt(gp.phi_increment));
                worst_construction = std::max(
                    worst_construction,
                    std::abs(gp.gaussian_increment - std::sqrt(gp.phi_increment) * normal_quantile(gp.uniform)));
            }
            const double crit = ks_critical_value(R, 0.01);
            const double kb = law.is_discrete()
                                  ? ks_statistic_discrete(blocks, [&](double x) { return law.cdf(x); },
                                                          [&](double x) { return law.cdf_left(x); })
                                  : ks_statistic(blocks, [&](double x) { return law.cdf(x); });
            const double ki = ks_statistic(incs, normal_cdf);
            const double ku = ks_statistic(us, [](double x) { return std::clamp(x, 0.0, 1.0); });
            worst_u = std::max(worst_u, ku / crit);
            worst_block = std::max(worst_block, kb / crit);
            worst_inc = std::max(worst_inc, ki / crit);
            case_ok &= kb < crit && ki < crit && ku < crit;
        }
        ok &= case_ok;
        detail += c.proc.name() + ": max KS/crit blocks " +  fmt(worst_block, 3) + ", uniforms " + fmt(worst_u, 3) + ", increments " + fmt(worst_inc, 3) +
                  " over " + std::to_string(first.size()) + " scales; ";
    }
    ok &= worst_construction < 1e-12;
    detail += "max |increment - sqrt(dphi) Phi^-1(U)| = " + fmt(worst_construction, 3) + "; " + std::to_string(R) +
              " replications, 1% level";
    return {ok, detail};
}

// 7. Rate evidence.
Outcome rate_evidence() {
    ExperimentConfig iid;
    iid.process.kind = "iid";
    iid.schedule = "constant";
    iid.schedule_m = 1;
    iid.n_grid = parse_n_grid("3^6..3^10");
    iid.replications = 50;
    iid.seed = 7;
    auto ei = run_sip_experiment(iid);

    ExperimentConfig ar = iid;
    ar.process.kind = "ar1";
    ar.schedule = "iii";
    auto ea = run_sip_experiment(ar);
    const bool flat = ei.rate_D.slope <= 0.05;
    const bool ar_ok = ea.rate_D.slope <= 1.0 / 3.0 + 0.1;
    std::string med;
    for (double v : ei.rate_D.median) med += (med.empty() ? "" : " ") + fmt(v, 4);
    std::string amed;
    for (double v : ea.rate_D.median) amed += (amed.empty() ? "" : " ") + fmt(v, 4);
    return {flat && ar_ok, "iid normal m_k = 1: slope " + fmt(ei.rate_D.slope, 4) + " (<= 0.05: " +
                               (flat ? "yes" : "no") + "; medians " + med + "); AR(1) p = 3 case iii: slope " +
                               fmt(ea.rate_D.slope, 4) + " (<= 0.4333: " + (ar_ok ? "yes" : "no") + "; medians " +
                               amed + "); 50 seeds, n = 3^6..3^10"};
}

// 8. CLT cross-check.
Outcome clt() {
    bool ok = true;
    std::string detail;
    double worst = 0.0;
    for (const auto& proc : zoo()) {
        auto r = clt_check(proc, pow3(9), 2000, Seed{8, streams::aux, 0});
        ok &= r.pass;
        worst = std::max(worst, r.ks / r.critical);
        if (!r.pass) detail += proc.name() + " KS " + fmt(r.ks, 3) + " >= " + fmt(r.critical, 3) + "; ";
    }
    detail += std::to_string(zoo().size()) + " processes, n = 3^9, 2000 replications, max KS/crit " + fmt(worst, 3);
    return {ok, detail};
}

// 9. Truncated-moment series.
Outcome truncated_moments() {
    auto normal = lemma_truncmoment_check(InnovationLaw::standard_normal(), 3.0, 4.0, 60);
    auto rad = lemma_truncmoment_check(InnovationLaw::rademacher(), 3.0, 4.0, 60);
    auto par = lemma_truncmoment_check(InnovationLaw::centered_pareto(2.5), 3.0, 4.0, 60);
    const bool conv = normal.tail_verdict == SeriesVerdict::converges &&
                      normal.moment_verdict == SeriesVerdict::converges && rad.tail_verdict == SeriesVerdict::converges &&
                      rad.moment_verdict == SeriesVerdict::converges;
    const bool div = par.tail_verdict == SeriesVerdict::diverges;
    return {conv && div, "normal " + verdict_name(normal.tail_verdict) + "/" + verdict_name(normal.moment_verdict) +
                             " (ratios " + fmt(normal.tail_ratio, 4) + ", " + fmt(normal.moment_ratio, 4) +
                             "), rademacher " + verdict_name(rad.tail_verdict) + "/" +
                             verdict_name(rad.moment_verdict) + ", pareto(2.5) tail " +
                             verdict_name(par.tail_verdict) + "; p = 3, alpha = 4, i <= 60"};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// 10. Determinism across worker counts.
Outcome determinism() {
    ExperimentConfig cfg;
    cfg.process.kind = "tar";
    cfg.n_grid = parse_n_grid("3^5..3^8");
    cfg.replications = 12;
    cfg.dep_replications = 5000;
    cfg.dep_lag_budget = 32;
    cfg.inner_reps = 64;
    cfg.block_law_samples = 2000;
    cfg.variance_sim_length = 200000;
    cfg.clt_n = 729;
    cfg.clt_replications = 200;
    const auto base = std::filesystem::temp_directory_path() / "kmtdep_acceptance_determinism";
    std::filesystem::remove_all(base);
    std::ostringstream log;
    std::vector<std::string> dirs;
    for (int w : {1, 2, 4, 4}) {
        cfg.workers = w;
        dirs.push_back("run" + std::to_string(dirs.size()) + "_w" + std::to_string(w));
        cfg.out = (base / dirs.back()).string();
        cmd_report(cfg, log);
    }
    int files = 0, identical = 0;
    for (const auto& entry : std::filesystem::directory_iterator(base / dirs[0])) {
        if (entry.path().extension() != ".csv") continue;
        ++files;
        bool same = true;
        for (std::size_t d = 1; d < dirs.size(); ++d)
            same &= slurp(entry.path()) == slurp(base / dirs[d] / entry.path().filename());
        identical += same;
    }
    return {files > 0 && identical == files, std::to_string(identical) + "/" + std::to_string(files) +
                                                 " report CSVs byte-identical across workers 1, 2, 4 and a repeat"};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::function<Outcome()>> checks{tau_closed_form, delta_oracle,   condition_checker,
                                                       pipeline_exactness, variance_machinery, coupling_laws,
                                                       rate_evidence,   clt,            truncated_moments,
                                                       determinism};
    std::vector<int> which;
    for (int a = 1; a < argc; ++a) which.push_back(std::atoi(argv[a]));
    if (which.empty())
        for (int i = 1; i <= 10; ++i) which.push_back(i);
    int failures = 0;
    for (int i : which) {
        if (i < 1 || i > 10) {
            std::cerr << "unknown criterion " << i << "\n";
            return 64;
        }
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = checks[static_cast<std::size_t>(i - 1)]();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cout << "criterion " << i << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << "  [" << fmt(secs, 3)
                  << " s]" << std::endl;
        failures += !o.pass;
    }
    return failures;
}
