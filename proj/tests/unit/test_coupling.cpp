#include <doctest.h>

#include <cmath>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "kmtdep/gaussian_coupling.hpp"
#include "kmtdep/harness.hpp"
#include "kmtdep/stats.hpp"

using namespace kmtdep;

TEST_CASE("nu_k combinations") {
    CHECK(nu_k({1.7}, 1) == doctest::Approx(1.7));
    CHECK(nu_k({1.7, 0.0, 0.0}, 1) == doctest::Approx(1.7));
    const double th = 0.4;
    for (std::int64_t m : {2, 3, 7}) {
        std::vector<double> g(static_cast<std::size_t>(2 * m + 1), 0.0);
        g[0] = 1 + th * th;
        g[1] = th;
        CHECK(nu_k(g, m) == doctest::Approx((1 + th) * (1 + th)));
    }
    // Second sum: 2 (1 - 1/2) g_3 for m = 2.
    CHECK(nu_k({1.0, 0.0, 0.0, 0.5, 0.0}, 2) == doctest::Approx(1.5));
}

TEST_CASE("long-run variance") {
    CHECK(sigma2_longrun(make_iid(), Seed{1, 0, 0}).value == doctest::Approx(1.0));
    CHECK(sigma2_longrun(make_ar1_linear(0.5), Seed{1, 0, 0}).value == doctest::Approx(4.0).epsilon(1e-9));
    CHECK(sigma2_longrun(make_ma1(-1.0), Seed{1, 0, 0}).value == doctest::Approx(0.0));
    // Flat-top estimate on a process without an oracle: TAR with a_pos = a_neg is AR(1).
    auto est = sigma2_longrun(make_tar(0.5, 0.5, InnovationLaw::standard_normal(), 60), Seed{1, 0, 0});
    CHECK_FALSE(est.analytic);
    CHECK(std::abs(est.value - 4.0) <= 3.0 * est.se);
}

TEST_CASE("phi path") {
    const double v = 1.3;
    auto vm = VarianceModel::from_nu(std::vector<double>(8, v), v);
    for (std::int64_t n = 2; n <= 2000; ++n) CHECK(vm.phi(n) - vm.phi(n - 1) == doctest::Approx(v));
    CHECK(vm.phi(1) == 0.0);

    auto vs = VarianceModel::from_nu({0.0, 1.0, 2.0, 3.0, 4.0, 5.0}, 1.0);
    for (int h = 1; h <= 4; ++h) {
        CHECK(vs.phi(pow3(h)) - vs.phi(pow3(h) - 1) == doctest::Approx(h));
        CHECK(vs.phi(pow3(h) + 1) - vs.phi(pow3(h)) == doctest::Approx(h + 1));
    }
    auto path = phi_path(vs, 243);
    for (std::int64_t i = 0; i <= 243; ++i) CHECK(path[static_cast<std::size_t>(i)] == vs.phi(i));
}

TEST_CASE("phi of AR(1) tracks n sigma^2") {
    auto proc = make_ar1_linear(0.5);
    const std::int64_t n = pow3(10);
    auto sched = MkSchedule::named(ScheduleCase::iii, 3.0);
    PipelineContext ctx(proc, sched, 3.0, n, Seed{2, 0, 0});
    auto vm = build_variance_model(ctx, Seed{2, 0, 0});
    CHECK(std::abs(vm.phi(n) / static_cast<double>(n) - 4.0) < 0.02 * 4.0);
    CHECK(std::abs(vm.nu[10] - 4.0) < 0.02 * 4.0);
}

TEST_CASE("linearization residual") {
    const double s2 = 2.0;
    auto flat = VarianceModel::from_nu(std::vector<double>(12, s2), s2);
    auto lf = linearize(flat, pow3(11), 3.0);
    CHECK(lf.varsigma2 == 0.0);
    CHECK(lf.pass);

    std::vector<double> nu(12, 0.0);
    for (int k = 1; k < 12; ++k) nu[static_cast<std::size_t>(k)] = s2 * std::pow(1 + std::pow(3.0, -k), 2);
    auto geo = VarianceModel::from_nu(nu, s2);
    const std::int64_t n = pow3(11) - 100;
    double direct = 0.0;
    for (std::int64_t i = 2; i <= n; ++i) {
        const double b = std::sqrt(nu[static_cast<std::size_t>(scale_of(i))]) - std::sqrt(s2);
        direct += b * b;
    }
    auto lg = linearize(geo, n, 3.0);
    CHECK(lg.varsigma2 == doctest::Approx(direct).epsilon(1e-10));
    CHECK(lg.varsigma2 < s2);  // sum of 2 * 3^{k-1} 3^{-2k} s2 stays below s2
    CHECK(lg.pass);
    for (std::int64_t m = 3; m < n; m *= 2) CHECK(geo.varsigma2(m) >= geo.varsigma2(m - 1));

    auto off = VarianceModel::from_nu(std::vector<double>(12, s2 * 1.21), s2);
    auto lo = linearize(off, pow3(11), 3.0);
    CHECK(lo.varsigma2 == doctest::Approx((pow3(11) - 1) * s2 * 0.01).epsilon(1e-9));
    CHECK_FALSE(lo.pass);
}

TEST_CASE("Gaussian block law: the quantile coupling is the identity") {
    auto law = BlockLaw::gaussian(3.7);
    auto w = draw_window(Seed{3, streams::aux, 0}, InnovationLaw::standard_normal(), 999, 999);
    for (double z : w.values()) {
        const double x = std::sqrt(3.7) * z;
        CHECK(std::sqrt(3.7) * normal_quantile(law.pit(x, 0.5)) == doctest::Approx(x).epsilon(1e-9));
    }
}

TEST_CASE("Rademacher blocks: mean coupling error against quadrature") {
    // E|F^{-1}(U) - Phi^{-1}(U)| = 2 int_{1/2}^{1} |1 - Phi^{-1}(u)| du.
    auto f = [](double z) { return std::abs(1.0 - z) * normal_pdf(z); };
    const double exact =
        2.0 * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, 1.0, 10, 1e-14) +
        2.0 * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 1.0, std::numeric_limits<double>::infinity(), 10, 1e-14);
    auto law = BlockLaw::innovation(InnovationLaw::rademacher());
    CounterRng rng(Seed{4, streams::coupling, 0});
    const auto R = InnovationLaw::rademacher();
    std::vector<double> err;
    for (std::int64_t i = 0; i < 100000; ++i) {
        const double x = R.sample(rng, i, 0);
        const double u = law.pit(x, rng.uniform(i, 1));
        CHECK(law.quantile(u) == x);
        err.push_back(std::abs(x - normal_quantile(u)));
    }
    const double se = sample_sd(err) / std::sqrt(static_cast<double>(err.size()));
    CHECK(std::abs(mean(err) - exact) <= 3.0 * se);
}

TEST_CASE("empirical block law") {
    std::vector<double> ties;
    for (int i = 0; i < 1000; ++i) ties.push_back(static_cast<double>(i % 5));
    auto d = BlockLaw::empirical(ties);
    CHECK(d.is_discrete());
    CHECK(d.cdf(2.0) == doctest::Approx(0.6));
    CHECK(d.cdf_left(2.0) == doctest::Approx(0.4));

    auto w = draw_window(Seed{5, streams::aux, 0}, InnovationLaw::standard_normal(), 9999, 9999);
    auto e = BlockLaw::empirical(w.values());
    CHECK_FALSE(e.is_discrete());
    for (double u : {0.01, 0.1, 0.5, 0.9, 0.99}) CHECK(e.cdf(e.quantile(u)) == doctest::Approx(u).epsilon(1e-9));
    CHECK(e.quantile(1e-9) < e.quantile(1e-5));
    CHECK(e.quantile(1 - 1e-9) > e.quantile(1 - 1e-5));
}

TEST_CASE("randomized transform of a discrete law is uniform") {
    auto law = BlockLaw::discrete({-2.0, 0.0, 1.0, 3.0}, {0.1, 0.4, 0.3, 0.2});
    CounterRng rng(Seed{6, streams::coupling, 0});
    std::vector<double> u;
    for (std::int64_t i = 0; i < 20000; ++i) u.push_back(law.pit(law.quantile(rng.uniform(i, 0)), rng.uniform(i, 1)));
    CHECK(ks_statistic(u, [](double x) { return std::clamp(x, 0.0, 1.0); }) < ks_critical_value(u.size(), 0.01));
}

TEST_CASE("nu_k minus sigma^2 follows the Theta bound shape") {
    auto proc = make_ar1_linear(0.5);
    const std::int64_t n = pow3(10);
    auto sched = MkSchedule::named(ScheduleCase::iii, 3.0);
    PipelineContext ctx(proc, sched, 3.0, n, Seed{7, 0, 0});
    auto vm = build_variance_model(ctx, Seed{7, 0, 0});
    const auto lay = layout(n, sched);
    auto theta = ThetaModel::geometric(2.0 * std::sqrt(2.0), 0.5);
    auto bound = [&](int k) {
        return std::exp(theta.log_theta(static_cast<double>(sched(k)))) +
               std::exp(log_min_theta_plus_linear(theta, 3.0, k, 4096));
    };
    const double C = std::abs(vm.nu[static_cast<std::size_t>(lay.K0)] - vm.sigma2) / bound(lay.K0);
    for (int k = lay.K0; k <= 10; ++k) {
        const auto uk = static_cast<std::size_t>(k);
        INFO("k = " << k << " nu = " << vm.nu[uk] << " se " << vm.nu_se[uk]);
        CHECK(std::abs(vm.nu[uk] - vm.sigma2) <= C * bound(k) + 3.0 * vm.nu_se[uk]);
    }
}

TEST_CASE("AR(1) coupling error grows slower than n^{1/p}") {
    ExperimentConfig cfg;
    cfg.process.kind = "ar1";
    cfg.n_grid = {pow3(6), pow3(8), pow3(10)};
    cfg.replications = 50;
    cfg.seed = 8;
    cfg.clt_enabled = false;
    auto ex = run_sip_experiment(cfg);
    REQUIRE(ex.median_D_over_root.size() == 3);
    CHECK(ex.median_D_over_root[1] < ex.median_D_over_root[0]);
    CHECK(ex.median_D_over_root[2] < ex.median_D_over_root[1]);
}

TEST_CASE("degenerate sigma = 0 is flagged, not fatal") {
    ExperimentConfig cfg;
    cfg.process.kind = "ma1";
    cfg.process.theta = -1.0;
    cfg.n_grid = {81, 243, 729, 2187};
    cfg.replications = 4;
    auto ex = run_sip_experiment(cfg);
    CHECK(ex.sigma_zero);
    for (double x : ex.first_paths.linear) CHECK(x == 0.0);
}
