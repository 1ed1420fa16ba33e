#include <doctest.h>

#include <cmath>
#include <vector>

#include "kmtdep/pipeline.hpp"
#include "kmtdep/stats.hpp"

using namespace kmtdep;

TEST_CASE("truncation operator") {
    CHECK(truncate(2.0, 1.0) == 1.0);
    CHECK(truncate(-3.0, 1.0) == -1.0);
    CHECK(truncate(0.3, 5.0) == 0.3);
    auto w = draw_window(Seed{1, streams::aux, 0}, InnovationLaw::student_t(3), 999, 999);
    for (std::size_t i = 1; i < w.values().size(); ++i) {
        const double x = w.values()[i] * 4, y = w.values()[i - 1] * 4;
        CHECK(std::abs(truncate(x, 1.7) - truncate(y, 1.7)) <= std::abs(x - y));
    }
}

TEST_CASE("layout arithmetic") {
    auto one = MkSchedule::constant(1, 3.0, 4.0);
    CHECK(layout(10, one).h == 3);
    CHECK(layout(9, one).h == 2);
    CHECK(layout(27, one).h == 3);
    CHECK_THROWS(layout(1, one));

    auto six = MkSchedule::explicit_values({1, 1, 1, 1, 1, 3}, 3.0, 4.0);
    CHECK(layout(729, six).q[6] == 52);

    auto four = MkSchedule::explicit_values({1, 1, 1, 2}, 3.0, 4.0);
    auto l30 = layout(30, four);
    CHECK(l30.h == 4);
    CHECK(l30.tau == -2);
    CHECK(l30.blocks_in(4) == 0);
}

TEST_CASE("m-dependent approximation: exact when the window covers the memory") {
    auto proc = make_linear({1.0, 0.5, 0.25}, InnovationLaw::rademacher());
    auto sched = MkSchedule::constant(2, 3.0, 4.0);
    PipelineContext ctx(proc, sched, 3.0, 729, Seed{1, 0, 0});
    auto panel = draw_pipeline_panel(ctx, Seed{1, streams::panel, 0}, 729);
    // |X| <= 1.75 < 3^{k/3} for k >= 2; the centering is 0 by symmetry.
    for (int k = 2; k <= 6; ++k) {
        auto xt = ctx.xtilde(k, panel, pow3(k - 1) + 1, pow3(k));
        for (std::int64_t i = pow3(k - 1) + 1; i <= pow3(k); ++i)
            CHECK(xt[static_cast<std::size_t>(i - pow3(k - 1) - 1)] == proc.evaluate(panel, i, 2));
    }
}

TEST_CASE("m-dependent approximation: bounded i.i.d. data") {
    auto proc = make_iid(InnovationLaw::rademacher());
    PipelineContext ctx(proc, MkSchedule::constant(1, 3.0, 4.0), 3.0, 243, Seed{2, 0, 0});
    auto panel = draw_pipeline_panel(ctx, Seed{2, streams::panel, 0}, 243);
    auto xt = ctx.xtilde(5, panel, 82, 243);
    for (std::int64_t i = 82; i <= 243; ++i) CHECK(xt[static_cast<std::size_t>(i - 82)] == panel.at(i));
}

TEST_CASE("m-dependent approximation: AR(1) against the conditional mean") {
    const double rho = 0.5;
    const std::int64_t m = 3;
    auto proc = make_ar1_irf(rho, InnovationLaw::standard_normal(), 60);
    PipelineOptions opt;
    opt.inner_reps = 256;
    PipelineContext ctx(proc, MkSchedule::constant(m, 2.05, 3.0), 2.05, 6561, Seed{3, 0, 0}, opt);
    auto panel = draw_pipeline_panel(ctx, Seed{3, streams::panel, 0}, 6561);
    const int k = 8;
    std::vector<double> se;
    auto xt = ctx.xtilde(k, panel, 2188, 2300, &se);
    for (std::int64_t i = 2188; i <= 2300; ++i) {
        double closed = 0.0;
        for (std::int64_t l = 0; l <= m; ++l) closed += std::pow(rho, static_cast<double>(l)) * panel.at(i - l);
        const auto idx = static_cast<std::size_t>(i - 2188);
        CHECK(std::abs(xt[idx] - closed) <= 3.0 * se[idx]);
    }
    // Gaussian oracle for the finite linear version is exact.
    auto lin = make_ar1_linear(rho);
    PipelineContext lctx(lin, MkSchedule::constant(m, 2.05, 3.0), 2.05, 6561, Seed{3, 0, 0}, opt);
    CHECK(lctx.scale(k).engine == XtildeEngine::gaussian_oracle);
    auto lpanel = draw_pipeline_panel(lctx, Seed{3, streams::panel, 0}, 6561);
    auto lxt = lctx.xtilde(k, lpanel, 2188, 2200);
    for (std::int64_t i = 2188; i <= 2200; ++i) {
        double closed = 0.0;
        for (std::int64_t l = 0; l <= m; ++l) closed += std::pow(rho, static_cast<double>(l)) * lpanel.at(i - l);
        CHECK(lxt[static_cast<std::size_t>(i - 2188)] == doctest::Approx(closed).epsilon(1e-9));
    }
}

TEST_CASE("decompose: inactive truncation and centering") {
    auto proc = make_iid(InnovationLaw::rademacher());
    const std::int64_t n = 2187;
    PipelineContext ctx(proc, MkSchedule::constant(1, 3.0, 4.0), 3.0, n, Seed{4, 0, 0});
    auto d = decompose(ctx, Seed{4, streams::panel, 0}, n);
    // Index 1 belongs to no scale, so S-dagger misses X_1.
    for (std::int64_t i = 1; i <= n; ++i) {
        const auto u = static_cast<std::size_t>(i);
        CHECK(d.S_dag[u] == doctest::Approx(d.S[u] - d.X[1]).epsilon(1e-12));
    }
}

TEST_CASE("decompose: block reconstruction is bit-exact") {
    for (const auto& proc : {make_ar1_linear(0.5), make_tar(0.6, -0.4)}) {
        auto sched = MkSchedule::named(ScheduleCase::iii, 3.0);
        const std::int64_t n = 6561;
        PipelineOptions opt;
        opt.inner_reps = 32;
        opt.centering_draws = 20000;
        PipelineContext ctx(proc, sched, 3.0, n, Seed{5, 0, 0}, opt);
        for (std::uint64_t r = 0; r < 3; ++r) {
            auto d = decompose(ctx, Seed{5, streams::panel, r}, n - static_cast<std::int64_t>(r) * 1000);
            const std::int64_t top = d.layout.n;
            for (std::int64_t i : {std::int64_t{2}, top / 3, top / 2, top}) {
                CHECK(d.diamond_from_blocks(i) == d.S_diamond[static_cast<std::size_t>(i)]);
                CHECK(d.diamond_from_xtilde(i) == d.S_diamond[static_cast<std::size_t>(i)]);
            }
            for (const auto& b : d.blocks) {
                ExactSum s;
                for (std::int64_t i = b.window.start; i < b.window.end; ++i) s.add(d.xtilde[static_cast<std::size_t>(i)]);
                CHECK(s.value() == b.value);
            }
        }
    }
}

TEST_CASE("block windows are disjoint for every layout") {
    auto iii = MkSchedule::named(ScheduleCase::iii, 3.0);
    auto ii = MkSchedule::named(ScheduleCase::ii, 4.0);
    for (std::int64_t n : {30, 100, 729, 1000, 59049, 100000})
        for (const auto* s : {&iii, &ii}) CHECK(audit_windows(layout(n, *s)).ok());
}

TEST_CASE("independence audit: i.i.d. passes, undersized window is caught") {
    const std::int64_t n = 729;
    PipelineOptions opt;
    opt.inner_reps = 16;
    opt.centering_draws = 20000;
    {
        auto proc = make_iid();
        PipelineContext ctx(proc, MkSchedule::constant(1, 3.0, 4.0), 3.0, n, Seed{6, 0, 0}, opt);
        std::vector<BlockDecomposition> reps;
        for (std::uint64_t r = 0; r < 200; ++r) reps.push_back(decompose(ctx, Seed{6, streams::panel, r}, n));
        auto a = block_independence_audit(reps);
        CHECK(a.ok());
    }
    {
        auto proc = make_ar1_linear(0.9);
        PipelineContext ctx(proc, MkSchedule::constant(1, 3.0, 4.0), 3.0, n, Seed{7, 0, 0}, opt);
        std::vector<BlockDecomposition> reps;
        for (std::uint64_t r = 0; r < 200; ++r) reps.push_back(decompose(ctx, Seed{7, streams::panel, r}, n));
        auto a = block_independence_audit(reps);
        CHECK(a.windows.ok());
        CHECK_FALSE(a.correlations_within);
        CHECK(a.max_pooled_abs > a.band);
    }
}

TEST_CASE("S-tilde minus S-diamond shrinks relative to n^{1/p}") {
    auto proc = make_ar1_linear(0.5);
    auto sched = MkSchedule::named(ScheduleCase::iii, 3.0);
    PipelineOptions opt;
    opt.inner_reps = 32;
    PipelineContext ctx(proc, sched, 3.0, 6561, Seed{8, 0, 0}, opt);
    auto med = [&](std::int64_t n) {
        std::vector<double> v;
        for (std::uint64_t r = 0; r < 50; ++r) {
            auto d = decompose(ctx, Seed{8, streams::panel, r}, n);
            double mx = 0.0;
            for (std::int64_t i = 1; i <= n; ++i)
                mx = std::max(mx, std::abs(d.S_tilde[static_cast<std::size_t>(i)] - d.S_diamond[static_cast<std::size_t>(i)]));
            v.push_back(mx / std::cbrt(static_cast<double>(n)));
        }
        return median(v);
    };
    CHECK(med(6561) < med(729));
}
