#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "kmtdep/harness.hpp"
#include "kmtdep/stats.hpp"

using namespace kmtdep;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

ExperimentConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

std::string config_error_key(const std::string& text) {
    try {
        parse(text);
    } catch (const ConfigError& e) {
        return e.key();
    }
    return "";
}

}  // namespace

TEST_CASE("fit_rate on exact power laws") {
    std::vector<std::pair<std::int64_t, double>> pw, cst;
    for (int k = 6; k <= 10; ++k) {
        pw.emplace_back(pow3(k), std::pow(static_cast<double>(pow3(k)), 0.2));
        cst.emplace_back(pow3(k), 4.2);
    }
    CHECK(std::abs(fit_rate(pw).slope - 0.2) < 1e-9);
    CHECK(fit_rate(pw).r2 == doctest::Approx(1.0));
    CHECK(std::abs(fit_rate(cst).slope) < 1e-9);
}

TEST_CASE("fit_rate with 1% noise") {
    std::vector<std::pair<std::int64_t, double>> pts;
    CounterRng rng(Seed{1, streams::aux, 0});
    std::vector<double> y, x;
    for (int k = 6; k <= 10; ++k) {
        const double n = static_cast<double>(pow3(k));
        const double e = std::cbrt(n) * (1.0 + 0.01 * rng.normal(k));
        pts.emplace_back(pow3(k), e);
        x.push_back(std::log(n));
        y.push_back(std::log(e));
    }
    const auto fit = fit_rate(pts);
    // Oracle: direct refit by the normal equations.
    const double xm = mean(x), ym = mean(y);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - xm) * (y[i] - ym);
        sxx += (x[i] - xm) * (x[i] - xm);
    }
    CHECK(fit.slope == doctest::Approx(sxy / sxx).epsilon(1e-9));
    CHECK(std::abs(fit.slope - 1.0 / 3.0) < 0.02);
}

TEST_CASE("fit_rate edge cases") {
    CHECK_THROWS(fit_rate({{729, 1.0}, {2187, 2.0}, {6561, 3.0}}));
    auto f = fit_rate({{729, 1.0}, {2187, 0.0}, {6561, 3.0}, {19683, 4.0}});
    CHECK(std::isinf(f.slope));
    CHECK(f.slope < 0);
    CHECK_FALSE(f.note.empty());
    auto few = fit_rate_samples({729, 2187}, {{1.0, 2.0}, {2.0, 3.0}});
    CHECK(std::isnan(few.slope));
    CHECK_FALSE(few.note.empty());
}

TEST_CASE("truncated-moment series: bounded law") {
    auto r = lemma_truncmoment_check(InnovationLaw::rademacher(), 3.0, 4.0, 40);
    CHECK(r.tail_terms[0] == 1.0);
    for (std::size_t i = 1; i < r.tail_terms.size(); ++i) CHECK(r.tail_terms[i] == 0.0);
    CHECK(r.tail_sum == 1.0);
    CHECK(r.tail_verdict == SeriesVerdict::converges);
    CHECK(r.moment_verdict == SeriesVerdict::converges);
    // Moment summand: 3^i min(3^{-4i/3}, 3^{-2i/3}) = 3^{-i/3}.
    for (std::size_t i = 0; i < r.moment_terms.size(); ++i)
        CHECK(r.moment_terms[i] == doctest::Approx(std::pow(3.0, -static_cast<double>(i) / 3.0)));
}

TEST_CASE("truncated-moment series: standard normal") {
    const double p = 3.0, alpha = 4.0;
    auto r = lemma_truncmoment_check(InnovationLaw::standard_normal(), p, alpha, 60);
    CHECK(r.tail_verdict == SeriesVerdict::converges);
    CHECK(r.moment_verdict == SeriesVerdict::converges);
    CHECK(r.finite_moment);
    CHECK(r.moment_p == doctest::Approx(2.0 * std::sqrt(2.0 / M_PI)));
    // Oracle: quadrature of the Gaussian density.
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    const double inf = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 12; ++i) {
        const double a = std::pow(3.0, i / p);
        const double tail = std::pow(3.0, i) * 2.0 * GK::integrate(normal_pdf, a, inf, 15, 1e-14);
        const double mom = std::pow(3.0, i) * 2.0 *
                           (GK::integrate([&](double x) { return std::pow(x / a, alpha) * normal_pdf(x); }, 0.0, a, 15, 1e-14) +
                            GK::integrate([&](double x) { return (x / a) * (x / a) * normal_pdf(x); }, a, inf, 15, 1e-14));
        CHECK(r.tail_terms[static_cast<std::size_t>(i)] == doctest::Approx(tail).epsilon(1e-9));
        CHECK(r.moment_terms[static_cast<std::size_t>(i)] == doctest::Approx(mom).epsilon(1e-9));
    }
    // Summand ratios below 1 from i = 5 on, and monotone after.
    for (const auto* t : {&r.tail_terms, &r.moment_terms}) {
        for (std::size_t i = 5; i < t->size(); ++i) {
            if ((*t)[i - 1] == 0.0) break;
            CHECK((*t)[i] / (*t)[i - 1] < 1.0);
        }
    }
    CHECK(r.tail_decay_from <= 5);
    CHECK(r.moment_decay_from <= 5);
}

TEST_CASE("truncated-moment series: Pareto negative control") {
    auto r = lemma_truncmoment_check(InnovationLaw::centered_pareto(2.5), 3.0, 4.0, 60);
    CHECK_FALSE(r.finite_moment);
    CHECK(r.tail_verdict == SeriesVerdict::diverges);
    // Oracle: P(|X| >= x) = x^{-2.5}, so the summand is 3^{i/6}.
    for (int i = 0; i <= 60; ++i)
        CHECK(r.tail_terms[static_cast<std::size_t>(i)] == doctest::Approx(std::pow(3.0, i / 6.0)).epsilon(1e-12));
    CHECK_THROWS(lemma_truncmoment_check(InnovationLaw::standard_normal(), 3.0, 3.0, 60));
    CHECK_THROWS(lemma_truncmoment_check(InnovationLaw::standard_normal(), 2.0, 3.0, 60));
}

TEST_CASE("config parsing") {
    auto c = parse("[process]\nkind = ma1\ntheta = -0.25\n[experiment]\np = 3.5\nn_grid = 3^5..3^7\nseed = 42\n"
                   "[schedule]\ncase = constant\nm = 2\n");
    CHECK(c.process.kind == "ma1");
    CHECK(c.process.theta == -0.25);
    CHECK(c.n_grid == std::vector<std::int64_t>{243, 729, 2187});
    CHECK(c.seed == 42);
    CHECK(build_schedule(c)(5) == 2);
    CHECK(build_schedule(c).alpha() == 4.5);

    CHECK(parse_n_grid("729, 3^7") == std::vector<std::int64_t>{729, 2187});
    CHECK_THROWS(parse_n_grid("729, 243"));
    CHECK_THROWS(parse_n_grid("2^5..2^7"));
}

TEST_CASE("config errors name the key") {
    CHECK(config_error_key("[process]\nrho = abc\n") == "process.rho");
    CHECK(config_error_key("[process]\nbogus = 1\n") == "process.bogus");
    CHECK(config_error_key("[experiment]\np = 1.5\n") == "experiment.p");
    CHECK(config_error_key("[experiment]\nalpha = 2.5\n") == "experiment.alpha");
    CHECK(config_error_key("[experiment]\nn_grid = 729, 243\n") == "experiment.n_grid");
    CHECK(config_error_key("[schedule]\ncase = iv\n") == "schedule.case");
    CHECK(config_error_key("[experiment]\np = 3\n[schedule]\ncase = ii\n") == "schedule.case");
    CHECK(config_error_key("[process]\nkind = garch\n") == "process.kind");
    CHECK(config_error_key("[process]\nlaw = cauchy\n") == "process.law");
    CHECK(config_error_key("[clt]\nenabled = maybe\n") == "clt.enabled");
    CHECK(config_error_key("[process\nkind = ar1\n") == "config");
}

TEST_CASE("config round trip") {
    ExperimentConfig c;
    c.process.kind = "tar";
    c.process.coefficients = {1.0, -0.1, 1e-20};
    c.alpha = 3.75;
    c.n_grid = {81, 243, 729, 2187};
    c.schedule = "explicit";
    c.schedule_values = {1, 2, 3};
    std::ostringstream os;
    write_config(c, os);
    auto back = parse(os.str());
    std::ostringstream os2;
    write_config(back, os2);
    CHECK(os.str() == os2.str());
    CHECK(back.process.coefficients == c.process.coefficients);
    CHECK(back.alpha == c.alpha);
}

TEST_CASE("CSV helpers") {
    CHECK(csv_field("plain") == "plain");
    CHECK(csv_field("a,b") == "\"a,b\"");
    CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
    CHECK(csv_field("two\nlines") == "\"two\nlines\"");
    CHECK(csv_number(0.1) == "0.1");
    CHECK(std::stod(csv_number(1.0 / 3.0)) == 1.0 / 3.0);
    CHECK(csv_number(std::nan("")) == "nan");
    CHECK(csv_number(-std::numeric_limits<double>::infinity()) == "-inf");
}

TEST_CASE("process construction from config") {
    ProcessConfig pc;
    for (const char* kind : {"iid", "ma1", "ar1", "ar1_irf", "linear", "tar", "arch1", "doubling_identity",
                             "doubling_haar_mother"}) {
        pc.kind = kind;
        CHECK_NOTHROW(build_process(pc));
    }
    const auto dir = std::filesystem::temp_directory_path() / "kmtdep_proc_cfg";
    std::filesystem::create_directories(dir);
    {
        std::ofstream k(dir / "kernel.csv");
        k << "lag1,lag2,value\n0,,1.0\n";
    }
    pc.kind = "volterra";
    pc.kernel_csv = (dir / "kernel.csv").string();
    CHECK_THROWS_AS(build_process(pc), ConfigError);
    {
        std::ofstream k(dir / "kernel.csv");
        k << "# order-2 kernel\n0,1.0\n1,0.5\n0,1,0.4\n";
    }
    auto v = build_process(pc);
    CHECK(std::get<VolterraSpec>(v.spec()).terms.size() == 3);
    {
        std::ofstream h(dir / "haar.csv");
        h << "i,j,value\n0,1,1.0\n2,4,0.25\n";
    }
    pc.kind = "doubling_haar";
    pc.haar_csv = (dir / "haar.csv").string();
    auto d = build_process(pc);
    CHECK(std::get<DoublingMapSpec>(d.spec()).haar->levels[2][3] == 0.25);
    {
        std::ofstream h(dir / "haar.csv");
        h << "2,5,0.25\n";
    }
    CHECK_THROWS_AS(build_process(pc), ConfigError);
}

TEST_CASE("condition check exit codes") {
    ExperimentConfig ar1;
    ar1.theta_model = "geometric";
    ar1.theta_c = 2.0 * std::sqrt(2.0);
    ar1.theta_rho = 0.5;
    ar1.out = (std::filesystem::temp_directory_path() / "kmtdep_cond_ar1").string();
    std::ostringstream log;
    CHECK(cmd_check_conditions(ar1, log) == kExitOk);
    auto stub = ar1;
    stub.theta_model = "constant";
    stub.theta_c = 1.0;
    stub.out = (std::filesystem::temp_directory_path() / "kmtdep_cond_stub").string();
    CHECK(cmd_check_conditions(stub, log) == kExitConditions);
}

TEST_CASE("i.i.d. normal rate stays below 1/p + 0.1") {
    ExperimentConfig cfg;
    cfg.process.kind = "iid";
    cfg.schedule = "constant";
    cfg.schedule_m = 1;
    cfg.n_grid = parse_n_grid("3^6..3^10");
    cfg.replications = 50;
    auto ex = run_sip_experiment(cfg);
    CHECK(ex.rate_D.slope <= 1.0 / cfg.p + 0.1);
}

TEST_CASE("CLT cross-check on AR(1)") {
    auto r = clt_check(make_ar1_linear(0.5), 2187, 500, Seed{3, streams::aux, 0});
    CHECK(r.sigma2_analytic);
    CHECK(r.sigma2 == doctest::Approx(4.0));
    CHECK(r.pass);
}

TEST_CASE("report is byte-identical across worker counts") {
    ExperimentConfig cfg;
    cfg.process.kind = "tar";
    cfg.n_grid = {81, 243, 729, 2187};
    cfg.replications = 6;
    cfg.dep_replications = 2000;
    cfg.dep_lag_budget = 16;
    cfg.inner_reps = 16;
    cfg.centering_draws = 20000;
    cfg.block_law_samples = 500;
    cfg.variance_sim_length = 40000;
    cfg.sigma2_path = 1 << 14;
    cfg.clt_n = 243;
    cfg.clt_replications = 50;
    const auto base = std::filesystem::temp_directory_path() / "kmtdep_det";
    std::ostringstream log;
    for (int w : {1, 3}) {
        cfg.workers = w;
        cfg.out = (base / ("w" + std::to_string(w))).string();
        cmd_report(cfg, log);
    }
    int compared = 0;
    for (const auto& entry : std::filesystem::directory_iterator(base / "w1")) {
        if (entry.path().extension() != ".csv") continue;
        CHECK(slurp(entry.path()) == slurp(base / "w3" / entry.path().filename()));
        ++compared;
    }
    CHECK(compared >= 7);
}
