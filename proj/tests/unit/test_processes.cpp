#include <doctest.h>

#include <cmath>
#include <vector>

#include "kmtdep/depmeasure.hpp"
#include "kmtdep/processes.hpp"
#include "kmtdep/stats.hpp"

using namespace kmtdep;

namespace {

double lag1_autocorrelation(const std::vector<double>& x) {
    std::vector<double> a(x.begin(), x.end() - 1), b(x.begin() + 1, x.end());
    return sample_correlation(a, b);
}

}  // namespace

TEST_CASE("identity linear process returns the innovations") {
    auto proc = make_linear({1.0});
    const Seed s{2, streams::panel, 0};
    auto x = evaluate_path(proc, s, 4, 0);
    auto panel = draw_panel(proc, s, 4, 0);
    REQUIRE(x.size() == 4);
    for (int i = 1; i <= 4; ++i) CHECK(x[static_cast<std::size_t>(i - 1)] == panel.at(i));
}

TEST_CASE("AR(1) by iteration has lag-1 autocorrelation 0.5") {
    auto proc = make_ar1_irf(0.5, InnovationLaw::standard_normal(), 60);
    auto x = evaluate_path(proc, Seed{4, streams::panel, 0}, 1000000, proc.min_lag());
    CHECK(std::abs(lag1_autocorrelation(x) - 0.5) < 0.005);
}

TEST_CASE("Haar mother path recodes the leading bits") {
    auto proc = make_doubling_haar_mother();
    const Seed s{9, streams::panel, 0};
    const std::int64_t L = proc.min_lag();
    auto x = evaluate_path(proc, s, 200, L);
    auto panel = draw_panel(proc, s, 200, L);
    for (int i = 1; i <= 200; ++i) CHECK(x[static_cast<std::size_t>(i - 1)] == (panel.at(i) == 0.0 ? 1.0 : -1.0));
}

TEST_CASE("evaluate_path rejects a short lag budget") {
    auto proc = make_ma1(0.5);
    CHECK_THROWS(evaluate_path(proc, Seed{1, 1, 0}, 10, 0));
    CHECK_NOTHROW(evaluate_path(proc, Seed{1, 1, 0}, 10, 1));
}

TEST_CASE("volterra Q_{n,k}") {
    VolterraSpec lin;
    lin.terms = {{{0}, 1.0}, {{1}, 0.5}, {{2}, 0.25}};
    CHECK(volterra_Qnk(lin, 1, 1) == doctest::Approx(0.25));
    CHECK(volterra_Qnk(lin, 7, 1) == 0.0);
    VolterraSpec quad;
    quad.terms = {{{0, 1}, 2.0}, {{1, 3}, 1.0}};
    CHECK(volterra_Qnk(quad, 1, 2) == doctest::Approx(5.0));
    CHECK(volterra_Qnk(quad, 2, 2) == 0.0);
}

TEST_CASE("volterra delta bound") {
    const double a = 0.7;
    VolterraSpec lin;
    lin.terms = {{{3}, a}};
    const auto normal = InnovationLaw::standard_normal();
    // Linear kernel: the bound with c_2 = 2 equals the exact delta^2 = 2 a^2.
    CHECK(volterra_delta_bound(lin, normal, 3, 2.0, 2.0) == doctest::Approx(2.0 * a * a));
    auto proc = make_volterra(lin);
    CHECK(std::pow(*proc.delta_oracle(3, 2.0), 2) == doctest::Approx(2.0 * a * a));

    VolterraSpec zero;
    zero.terms = {{{0}, 0.0}, {{0, 1}, 0.0}};
    CHECK(volterra_delta_bound(zero, normal, 0, 2.0) == 0.0);
    CHECK_THROWS(volterra_delta_bound(lin, normal, 3, 3.0));

    VolterraSpec two;
    two.terms = {{{0}, 1.0}, {{1}, 0.5}, {{0, 1}, 0.4}};
    auto vp = make_volterra(two);
    DeltaOptions opt;
    opt.replications = 100000;
    opt.lag_budget = 4;
    for (std::int64_t n : {0, 1}) {
        auto est = estimate_delta(vp, n, 2.0, Seed{21, streams::panel, static_cast<std::uint64_t>(n)}, opt);
        const double bound = volterra_delta_bound(two, normal, n, 2.0);
        // delta^2 upper 3-SE limit stays below the bound.
        CHECK(std::pow(est.delta - 3.0 * est.se, 2) <= bound);
    }
}

TEST_CASE("doubling map delta formula") {
    auto haar = make_doubling_haar_mother();
    const auto& hs = std::get<DoublingMapSpec>(haar.spec());
    for (int i = 1; i <= 6; ++i) CHECK(doubling_delta_formula(hs, i, 2.0).bit_flip == doctest::Approx(0.0));
    CHECK(doubling_delta_formula(hs, 0, 2.0).bit_flip > 0.0);

    auto ident = make_doubling_identity();
    const auto& is = std::get<DoublingMapSpec>(ident.spec());
    REQUIRE(is.lipschitz);
    const double C = *is.lipschitz;
    for (double p : {2.0, 3.0})
        for (int i = 0; i <= 8; ++i)
            CHECK(doubling_delta_formula(is, i, p).bit_flip <= std::pow(C, p) * std::pow(2.0, -i * p) * (1 + 1e-9));

    auto zero = make_doubling([](double) { return 0.0; }, 0.0);
    const auto& zs = std::get<DoublingMapSpec>(zero.spec());
    CHECK(doubling_delta_formula(zs, 3, 2.0).bit_flip == 0.0);
    CHECK(doubling_delta_formula(zs, 3, 2.0).printed == 0.0);
    CHECK(std::abs(doubling_mean(is)) < 1e-6);
}

TEST_CASE("Haar delta bound") {
    DoublingMapSpec s;
    s.haar = HaarExpansion{{{1.0}}};
    CHECK(haar_delta_bound(s, 0, 2.0) == doctest::Approx(1.0));
    s.haar = HaarExpansion{{{1.0}, {0.0, 0.0}}};
    CHECK(haar_delta_bound(s, 1, 2.0) == 0.0);
    for (int i = 1; i <= 5; ++i) {
        HaarExpansion h;
        for (int l = 0; l <= i; ++l) h.levels.emplace_back(std::size_t{1} << l, l == i ? std::pow(2.0, -i) : 0.0);
        s.haar = h;
        CHECK(haar_delta_bound(s, i, 2.0) == doctest::Approx(std::pow(2.0, -i)));
    }
}

TEST_CASE("stationarity of mean, variance and lag-1 autocovariance") {
    const std::int64_t n = 100000, shift = 50000;
    for (const auto& proc : {make_ar1_irf(0.5, InnovationLaw::standard_normal(), 60), make_tar(0.6, -0.4)}) {
        auto x = evaluate_path(proc, Seed{31, streams::panel, 0}, n + shift, std::max<std::int64_t>(proc.min_lag(), 60));
        std::vector<double> a(x.begin(), x.begin() + n), b(x.begin() + shift, x.end());
        // Batch-means SE accounts for the serial dependence.
        auto batch = [](const std::vector<double>& v, auto stat) {
            std::vector<double> out;
            const std::size_t B = 50, len = v.size() / B;
            for (std::size_t i = 0; i < B; ++i) {
                std::vector<double> s(v.begin() + static_cast<std::ptrdiff_t>(i * len),
                                      v.begin() + static_cast<std::ptrdiff_t>((i + 1) * len));
                out.push_back(stat(s));
            }
            return out;
        };
        auto m = [](const std::vector<double>& v) { return mean(v); };
        auto var = [](const std::vector<double>& v) { return variance(v); };
        auto acf = [](const std::vector<double>& v) { return lag1_autocorrelation(v) * variance(v); };
        for (auto stat : {std::function<double(const std::vector<double>&)>(m),
                          std::function<double(const std::vector<double>&)>(var),
                          std::function<double(const std::vector<double>&)>(acf)}) {
            auto ba = batch(a, stat), bb = batch(b, stat);
            const double se = std::hypot(batch_means_se(ba), batch_means_se(bb));
            INFO(proc.name());
            CHECK(std::abs(mean(ba) - mean(bb)) <= 3.0 * se);
        }
    }
}

TEST_CASE("contraction certificates") {
    for (const auto& proc : {make_ar1_irf(0.5), make_tar(0.6, -0.4), make_arch1(1.0, 0.3)}) {
        for (double p : {2.0, 3.0}) {
            auto cert = contraction_certificate(proc, p, 100, 2000, Seed{41, streams::aux, 0});
            INFO(proc.name() << " p=" << p << " declared " << cert.declared << " estimated " << cert.estimated_sup);
            CHECK(cert.estimated_sup <= cert.declared * 1.02);
            CHECK(cert.holds);
        }
    }
}

TEST_CASE("tail bound dominates the truncation error") {
    auto proc = make_ar1_irf(0.5, InnovationLaw::standard_normal(), 0);
    const std::int64_t full = 80;
    for (std::int64_t L : {2, 4, 8, 16}) {
        std::vector<double> d2;
        for (std::uint64_t r = 0; r < 10000; ++r) {
            auto w = draw_window(Seed{51, streams::panel, r}, proc.law(), 0, full);
            const double e = proc.evaluate(w, 0, full) - proc.evaluate(w, 0, L);
            d2.push_back(e * e);
        }
        const double est = std::sqrt(mean(d2));
        const double se = sample_sd(d2) / std::sqrt(static_cast<double>(d2.size())) / (2.0 * est);
        CHECK(est - 3.0 * se <= proc.tail_bound(L));
    }
}

TEST_CASE("contractive map delta decays at the contraction rate") {
    auto proc = make_ar1_irf(0.5, InnovationLaw::standard_normal(), 0);
    DeltaOptions opt;
    opt.replications = 20000;
    opt.lag_budget = proc.min_lag();
    auto prof = estimate_profile(proc, 2.0, Seed{61, streams::panel, 0}, opt);
    std::vector<double> y, x;
    for (const auto& d : prof.delta) {
        if (d.j > 10) break;
        y.push_back(std::log(d.delta));
        x.push_back(static_cast<double>(d.j));
    }
    auto fit = least_squares(y, {x});
    const double target = std::log(*proc.contraction(2.0));
    CHECK(std::abs(fit.coef[1] - target) <= 0.1 * std::abs(target));
}
