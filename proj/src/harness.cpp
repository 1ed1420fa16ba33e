#include "kmtdep/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "kmtdep/parallel.hpp"

namespace kmtdep {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string trim(std::string s) {
    auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!s.empty() && ws(static_cast<unsigned char>(s.back()))) s.pop_back();
    std::size_t i = 0;
    while (i < s.size() && ws(static_cast<unsigned char>(s[i]))) ++i;
    return s.substr(i);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(trim(cur));
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw ConfigError(key, "expected a number, got '" + v + "'");
    }
    if (trim(v.substr(pos)) != "") throw ConfigError(key, "expected a number, got '" + v + "'");
    return x;
}

std::int64_t to_int(const std::string& key, const std::string& v) {
    std::int64_t x = 0;
    auto s = trim(v);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError(key, "expected an integer, got '" + v + "'");
    return x;
}

bool to_bool(const std::string& key, const std::string& v) {
    auto s = trim(v);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError(key, "expected true or false, got '" + v + "'");
}

template <class T, class F>
std::vector<T> to_list(const std::string& key, const std::string& v, F conv) {
    std::vector<T> out;
    if (trim(v).empty()) return out;
    for (const auto& part : split(v, ',')) out.push_back(conv(key, part));
    return out;
}

std::int64_t parse_grid_point(const std::string& s) {
    auto t = trim(s);
    auto caret = t.find('^');
    if (caret == std::string::npos) {
        std::int64_t x = 0;
        auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
        if (ec != std::errc() || ptr != t.data() + t.size()) throw std::invalid_argument("bad grid point '" + s + "'");
        return x;
    }
    if (trim(t.substr(0, caret)) != "3") throw std::invalid_argument("grid powers must be of 3: '" + s + "'");
    auto e = trim(t.substr(caret + 1));
    int k = 0;
    auto [ptr, ec] = std::from_chars(e.data(), e.data() + e.size(), k);
    if (ec != std::errc() || ptr != e.data() + e.size()) throw std::invalid_argument("bad exponent in '" + s + "'");
    return pow3(k);
}

std::string join_numbers(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + csv_number(v[i]);
    return s;
}

std::string join_ints(const std::vector<std::int64_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + std::to_string(v[i]);
    return s;
}

std::vector<std::vector<std::string>> read_csv_rows(const std::string& key, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(key, "cannot open '" + path + "'");
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        auto cells = split(line, ',');
        // A header row has a non-numeric first cell.
        if (rows.empty() && !cells.empty()) {
            char c = cells[0].empty() ? 'x' : cells[0][0];
            if (!(std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.')) continue;
        }
        rows.push_back(std::move(cells));
    }
    return rows;
}

std::filesystem::path prepare_out(const ExperimentConfig& cfg) {
    std::filesystem::path dir(cfg.out);
    std::filesystem::create_directories(dir);
    std::ofstream os(dir / "config_used.ini");
    write_config(cfg, os);
    return dir;
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream os(p);
    if (!os) throw std::runtime_error("cannot write '" + p.string() + "'");
    return os;
}

// E[|X|^r ; |X| <= a] and E[X^2 ; |X| > a] for the innovation laws.
struct TruncatedMoments {
    double inner = 0.0;
    double outer = 0.0;
};

TruncatedMoments truncated_moments(const InnovationLaw& law, double r, double a) {
    using boost::math::gamma_p;
    using boost::math::gamma_q;
    switch (law.kind()) {
        case LawKind::standard_normal:
            return {normal_abs_moment(r) * gamma_p((r + 1.0) / 2.0, a * a / 2.0), gamma_q(1.5, a * a / 2.0)};
        case LawKind::rademacher:
            return a >= 1.0 ? TruncatedMoments{1.0, 0.0} : TruncatedMoments{0.0, 1.0};
        case LawKind::bernoulli_half:
            return a >= 1.0 ? TruncatedMoments{0.5, 0.0} : TruncatedMoments{0.0, 0.5};
        case LawKind::uniform01: {
            const double b = std::min(a, 1.0);
            return {std::pow(b, r + 1.0) / (r + 1.0), (1.0 - b * b * b) / 3.0};
        }
        case LawKind::centered_pareto: {
            const double t = law.param();
            if (a < 1.0) return {0.0, t > 2.0 ? t / (t - 2.0) : kInf};
            const double inner = r == t ? t * std::log(a) : t * (std::pow(a, r - t) - 1.0) / (r - t);
            const double outer = t > 2.0 ? t * std::pow(a, 2.0 - t) / (t - 2.0) : kInf;
            return {inner, outer};
        }
        case LawKind::student_t: {
            const double nu = law.param();
            boost::math::students_t_distribution<double> dist(nu);
            auto f_inner = [&](double x) { return std::pow(x, r) * boost::math::pdf(dist, x); };
            auto f_sq = [&](double x) { return x * x * boost::math::pdf(dist, x); };
            const double inner = 2.0 * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f_inner, 0.0, a, 12, 1e-12);
            double outer = kInf;
            if (nu > 2.0) {
                outer = 2.0 * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
                                  f_sq, a, std::numeric_limits<double>::infinity(), 12, 1e-12);
            }
            return {inner, outer};
        }
    }
    return {};
}

SeriesVerdict judge_terms(const std::vector<double>& t, int* decay_from) {
    const int n = static_cast<int>(t.size());
    *decay_from = -1;
    for (double x : t)
        if (!std::isfinite(x)) return SeriesVerdict::diverges;
    int last_nonzero = -1;
    for (int i = 0; i < n; ++i)
        if (t[static_cast<std::size_t>(i)] > 0.0) last_nonzero = i;
    if (last_nonzero < 0) {
        *decay_from = 0;
        return SeriesVerdict::converges;
    }
    // Summands strictly decreasing from decay_from on (zeros count as decreasing).
    int from = n - 1;
    while (from > 0 && t[static_cast<std::size_t>(from)] < t[static_cast<std::size_t>(from - 1)]) --from;
    if (last_nonzero < n - 1) {
        from = std::min(from, last_nonzero);
        int f = last_nonzero;
        while (f > 0 && t[static_cast<std::size_t>(f)] < t[static_cast<std::size_t>(f - 1)]) --f;
        *decay_from = f;
        return SeriesVerdict::converges;
    }
    *decay_from = from < n - 1 ? from : -1;
    const int q = std::max(2, n / 4);
    double rmax = 0.0, rmin = kInf;
    for (int i = n - q; i < n; ++i) {
        double r = t[static_cast<std::size_t>(i)] / t[static_cast<std::size_t>(i - 1)];
        rmax = std::max(rmax, r);
        rmin = std::min(rmin, r);
    }
    if (rmax <= 1.0 - 1e-3) return SeriesVerdict::converges;
    if (rmin >= 1.0) return SeriesVerdict::diverges;
    return SeriesVerdict::inconclusive;
}

double process_mean(const CausalProcess& proc, const Seed& seed) {
    if (proc.symmetric()) return 0.0;
    const auto& law = proc.law();
    if (const auto* a = proc.linear_coefficients()) return law.mean() * std::accumulate(a->begin(), a->end(), 0.0);
    if (const auto* v = std::get_if<VolterraSpec>(&proc.spec())) {
        double s = 0.0;
        for (const auto& t : v->terms) s += t.value * std::pow(law.mean(), static_cast<double>(t.lags.size()));
        return s;
    }
    if (const auto* d = std::get_if<DoublingMapSpec>(&proc.spec())) return doubling_mean(*d);
    // Iterated maps without a symmetry: long-path average.
    auto x = evaluate_path(proc, Seed{seed.master, streams::aux, 0xFFFFFFFFULL}, std::int64_t{1} << 22,
                           std::max<std::int64_t>(proc.min_lag(), 0));
    return mean(x);
}

}  // namespace

// Config

std::vector<std::int64_t> parse_n_grid(const std::string& text) {
    std::vector<std::int64_t> out;
    auto t = trim(text);
    auto dots = t.find("..");
    if (dots != std::string::npos) {
        auto a = trim(t.substr(0, dots)), b = trim(t.substr(dots + 2));
        if (a.rfind("3^", 0) != 0 || b.rfind("3^", 0) != 0)
            throw std::invalid_argument("range grid must be written 3^a..3^b");
        int ka = std::stoi(a.substr(2)), kb = std::stoi(b.substr(2));
        for (int k = ka; k <= kb; ++k) out.push_back(pow3(k));
    } else {
        for (const auto& part : split(t, ','))
            if (!part.empty()) out.push_back(parse_grid_point(part));
    }
    if (out.empty()) throw std::invalid_argument("empty n grid");
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i] < 2) throw std::invalid_argument("grid points must be >= 2");
        if (i && out[i] <= out[i - 1]) throw std::invalid_argument("n grid must be strictly increasing");
    }
    return out;
}

std::string format_n_grid(const std::vector<std::int64_t>& grid) { return join_ints(grid); }

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open '" + path + "'");
    return parse_config(in);
}

ExperimentConfig parse_config(std::istream& in) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("config", std::string("malformed ini: ") + e.message() + " at line " + std::to_string(e.line()));
    }
    ExperimentConfig c;
    auto& P = c.process;
    using Setter = std::function<void(const std::string&, const std::string&)>;
    auto dbl = [](double& f) { return Setter([&f](const std::string& k, const std::string& v) { f = to_double(k, v); }); };
    auto i64 = [](std::int64_t& f) { return Setter([&f](const std::string& k, const std::string& v) { f = to_int(k, v); }); };
    auto i32 = [](int& f) {
        return Setter([&f](const std::string& k, const std::string& v) { f = static_cast<int>(to_int(k, v)); });
    };
    auto str = [](std::string& f) { return Setter([&f](const std::string&, const std::string& v) { f = trim(v); }); };
    const std::map<std::string, Setter> setters{
        {"process.kind", str(P.kind)},
        {"process.law", str(P.law)},
        {"process.law_param", dbl(P.law_param)},
        {"process.rho", dbl(P.rho)},
        {"process.theta", dbl(P.theta)},
        {"process.coefficients",
         [&P](const std::string& k, const std::string& v) { P.coefficients = to_list<double>(k, v, to_double); }},
        {"process.a_pos", dbl(P.a_pos)},
        {"process.a_neg", dbl(P.a_neg)},
        {"process.omega", dbl(P.omega)},
        {"process.a", dbl(P.a)},
        {"process.burn_in", i64(P.burn_in)},
        {"process.kernel_csv", str(P.kernel_csv)},
        {"process.haar_csv", str(P.haar_csv)},
        {"process.bit_depth", i32(P.bit_depth)},
        {"experiment.p", dbl(c.p)},
        {"experiment.alpha",
         [&c](const std::string& k, const std::string& v) {
             if (trim(v).empty() || trim(v) == "default") c.alpha.reset();
             else c.alpha = to_double(k, v);
         }},
        {"experiment.n_grid",
         [&c](const std::string& k, const std::string& v) {
             try {
                 c.n_grid = parse_n_grid(v);
             } catch (const std::exception& e) {
                 throw ConfigError(k, e.what());
             }
         }},
        {"experiment.replications", i32(c.replications)},
        {"experiment.seed",
         [&c](const std::string& k, const std::string& v) { c.seed = static_cast<std::uint64_t>(to_int(k, v)); }},
        {"experiment.out", str(c.out)},
        {"experiment.workers", i32(c.workers)},
        {"schedule.case", str(c.schedule)},
        {"schedule.m", i64(c.schedule_m)},
        {"schedule.values",
         [&c](const std::string& k, const std::string& v) { c.schedule_values = to_list<std::int64_t>(k, v, to_int); }},
        {"schedule.log_base", str(c.log_base)},
        {"depmeasure.source", str(c.profile_source)},
        {"depmeasure.replications", i64(c.dep_replications)},
        {"depmeasure.lag_budget", i64(c.dep_lag_budget)},
        {"theta.model", str(c.theta_model)},
        {"theta.c", dbl(c.theta_c)},
        {"theta.rho", dbl(c.theta_rho)},
        {"theta.tau", dbl(c.theta_tau)},
        {"theta.A", dbl(c.theta_A)},
        {"pipeline.inner_reps", i32(c.inner_reps)},
        {"pipeline.centering_draws", i64(c.centering_draws)},
        {"coupling.block_law_samples", i64(c.block_law_samples)},
        {"coupling.variance_sim_length", i64(c.variance_sim_length)},
        {"coupling.sigma2_path", i64(c.sigma2_path)},
        {"truncation.law", str(c.truncation_law)},
        {"truncation.law_param", dbl(c.truncation_law_param)},
        {"truncation.horizon", i32(c.truncation_horizon)},
        {"clt.enabled", [&c](const std::string& k, const std::string& v) { c.clt_enabled = to_bool(k, v); }},
        {"clt.n", i64(c.clt_n)},
        {"clt.replications", i32(c.clt_replications)},
    };
    for (const auto& [section, child] : tree) {
        if (child.empty()) throw ConfigError(section, "keys must sit inside a [section]");
        for (const auto& [key, value] : child) {
            const std::string full = section + "." + key;
            auto it = setters.find(full);
            if (it == setters.end()) throw ConfigError(full, "unknown key");
            it->second(full, value.get_value<std::string>());
        }
    }
    validate(c);
    return c;
}

void validate(const ExperimentConfig& c) {
    if (!(c.p > 2.0)) throw ConfigError("experiment.p", "p must exceed 2");
    if (c.alpha && !(*c.alpha > c.p)) throw ConfigError("experiment.alpha", "alpha must exceed p");
    if (c.replications < 1) throw ConfigError("experiment.replications", "must be >= 1");
    if (c.n_grid.empty()) throw ConfigError("experiment.n_grid", "empty grid");
    for (std::size_t i = 0; i < c.n_grid.size(); ++i)
        if (c.n_grid[i] < 2 || (i && c.n_grid[i] <= c.n_grid[i - 1]))
            throw ConfigError("experiment.n_grid", "must be strictly increasing with n >= 2");
    try {
        (void)parse_schedule_case(c.schedule);
    } catch (const std::exception& e) {
        throw ConfigError("schedule.case", e.what());
    }
    try {
        (void)parse_log_base(c.log_base);
    } catch (const std::exception& e) {
        throw ConfigError("schedule.log_base", e.what());
    }
    try {
        (void)build_schedule(c);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError("schedule.case", e.what());
    }
    if (c.profile_source != "estimate" && c.profile_source != "analytic")
        throw ConfigError("depmeasure.source", "expected estimate or analytic");
    if (c.theta_model != "profile" && c.theta_model != "geometric" && c.theta_model != "power_log" &&
        c.theta_model != "constant")
        throw ConfigError("theta.model", "expected profile, geometric, power_log or constant");
    if (c.dep_replications < 2) throw ConfigError("depmeasure.replications", "must be >= 2");
    if (c.dep_lag_budget < 0) throw ConfigError("depmeasure.lag_budget", "must be >= 0");
    if (c.inner_reps < 1) throw ConfigError("pipeline.inner_reps", "must be >= 1");
    if (c.block_law_samples < 20) throw ConfigError("coupling.block_law_samples", "must be >= 20");
    if (c.sigma2_path < 1024) throw ConfigError("coupling.sigma2_path", "must be >= 1024");
    if (c.clt_n < 1) throw ConfigError("clt.n", "must be >= 1");
    if (c.clt_replications < 2) throw ConfigError("clt.replications", "must be >= 2");
    try {
        (void)InnovationLaw::parse(c.process.law, c.process.law_param);
    } catch (const std::exception& e) {
        throw ConfigError("process.law", e.what());
    }
    try {
        (void)InnovationLaw::parse(c.truncation_law, c.truncation_law_param);
    } catch (const std::exception& e) {
        throw ConfigError("truncation.law", e.what());
    }
    static const char* kinds[] = {"iid",     "ma1",    "ar1",      "ar1_irf",           "linear",
                                  "tar",     "arch1",  "volterra", "doubling_identity", "doubling_haar_mother",
                                  "doubling_haar"};
    if (std::find(std::begin(kinds), std::end(kinds), c.process.kind) == std::end(kinds))
        throw ConfigError("process.kind", "unknown process kind '" + c.process.kind + "'");
}

void write_config(const ExperimentConfig& c, std::ostream& os) {
    const auto& P = c.process;
    os << "[process]\n";
    os << "kind = " << P.kind << "\n";
    os << "law = " << P.law << "\n";
    os << "law_param = " << csv_number(P.law_param) << "\n";
    os << "rho = " << csv_number(P.rho) << "\n";
    os << "theta = " << csv_number(P.theta) << "\n";
    os << "coefficients = " << join_numbers(P.coefficients) << "\n";
    os << "a_pos = " << csv_number(P.a_pos) << "\n";
    os << "a_neg = " << csv_number(P.a_neg) << "\n";
    os << "omega = " << csv_number(P.omega) << "\n";
    os << "a = " << csv_number(P.a) << "\n";
    os << "burn_in = " << P.burn_in << "\n";
    os << "kernel_csv = " << P.kernel_csv << "\n";
    os << "haar_csv = " << P.haar_csv << "\n";
    os << "bit_depth = " << P.bit_depth << "\n\n";
    os << "[experiment]\n";
    os << "p = " << csv_number(c.p) << "\n";
    os << "alpha = " << (c.alpha ? csv_number(*c.alpha) : std::string("default")) << "\n";
    os << "n_grid = " << format_n_grid(c.n_grid) << "\n";
    os << "replications = " << c.replications << "\n";
    os << "seed = " << c.seed << "\n";
    os << "out = " << c.out << "\n";
    os << "workers = " << c.workers << "\n\n";
    os << "[schedule]\n";
    os << "case = " << c.schedule << "\n";
    os << "m = " << c.schedule_m << "\n";
    os << "values = " << join_ints(c.schedule_values) << "\n";
    os << "log_base = " << c.log_base << "\n\n";
    os << "[depmeasure]\n";
    os << "source = " << c.profile_source << "\n";
    os << "replications = " << c.dep_replications << "\n";
    os << "lag_budget = " << c.dep_lag_budget << "\n\n";
    os << "[theta]\n";
    os << "model = " << c.theta_model << "\n";
    os << "c = " << csv_number(c.theta_c) << "\n";
    os << "rho = " << csv_number(c.theta_rho) << "\n";
    os << "tau = " << csv_number(c.theta_tau) << "\n";
    os << "A = " << csv_number(c.theta_A) << "\n\n";
    os << "[pipeline]\n";
    os << "inner_reps = " << c.inner_reps << "\n";
    os << "centering_draws = " << c.centering_draws << "\n\n";
    os << "[coupling]\n";
    os << "block_law_samples = " << c.block_law_samples << "\n";
    os << "variance_sim_length = " << c.variance_sim_length << "\n";
    os << "sigma2_path = " << c.sigma2_path << "\n\n";
    os << "[truncation]\n";
    os << "law = " << c.truncation_law << "\n";
    os << "law_param = " << csv_number(c.truncation_law_param) << "\n";
    os << "horizon = " << c.truncation_horizon << "\n\n";
    os << "[clt]\n";
    os << "enabled = " << (c.clt_enabled ? "true" : "false") << "\n";
    os << "n = " << c.clt_n << "\n";
    os << "replications = " << c.clt_replications << "\n";
}

CausalProcess build_process(const ProcessConfig& pc) {
    const auto law = InnovationLaw::parse(pc.law, pc.law_param);
    if (pc.kind == "iid") return make_iid(law);
    if (pc.kind == "ma1") return make_ma1(pc.theta, law);
    if (pc.kind == "ar1") return make_ar1_linear(pc.rho, law);
    if (pc.kind == "ar1_irf") return make_ar1_irf(pc.rho, law, pc.burn_in);
    if (pc.kind == "linear") {
        if (pc.coefficients.empty()) throw ConfigError("process.coefficients", "linear process needs coefficients");
        return make_linear(pc.coefficients, law);
    }
    if (pc.kind == "tar") return make_tar(pc.a_pos, pc.a_neg, law, pc.burn_in);
    if (pc.kind == "arch1") return make_arch1(pc.omega, pc.a, law, pc.burn_in);
    if (pc.kind == "volterra") {
        if (pc.kernel_csv.empty()) throw ConfigError("process.kernel_csv", "volterra needs a kernel CSV");
        VolterraSpec spec;
        for (const auto& row : read_csv_rows("process.kernel_csv", pc.kernel_csv)) {
            if (row.size() < 2) throw ConfigError("process.kernel_csv", "each row needs lags and a value");
            VolterraTerm t;
            for (std::size_t i = 0; i + 1 < row.size(); ++i) t.lags.push_back(to_int("process.kernel_csv", row[i]));
            t.value = to_double("process.kernel_csv", row.back());
            for (std::size_t i = 1; i < t.lags.size(); ++i)
                if (t.lags[i] <= t.lags[i - 1])
                    throw ConfigError("process.kernel_csv", "lags in a row must be strictly increasing");
            if (t.lags[0] < 0) throw ConfigError("process.kernel_csv", "lags must be >= 0");
            spec.terms.push_back(std::move(t));
        }
        return make_volterra(std::move(spec), law);
    }
    if (pc.kind == "doubling_identity") return make_doubling_identity(pc.bit_depth);
    if (pc.kind == "doubling_haar_mother") return make_doubling_haar_mother(pc.bit_depth);
    if (pc.kind == "doubling_haar") {
        if (pc.haar_csv.empty()) throw ConfigError("process.haar_csv", "doubling_haar needs a coefficient CSV");
        HaarExpansion h;
        for (const auto& row : read_csv_rows("process.haar_csv", pc.haar_csv)) {
            if (row.size() != 3) throw ConfigError("process.haar_csv", "rows must be i, j, value");
            auto i = to_int("process.haar_csv", row[0]), j = to_int("process.haar_csv", row[1]);
            if (i < 0 || i > 30 || j < 1 || j > (std::int64_t{1} << i))
                throw ConfigError("process.haar_csv", "index (" + row[0] + ", " + row[1] + ") outside 1 <= j <= 2^i");
            while (static_cast<std::int64_t>(h.levels.size()) <= i)
                h.levels.emplace_back(std::size_t{1} << h.levels.size(), 0.0);
            h.levels[static_cast<std::size_t>(i)][static_cast<std::size_t>(j - 1)] = to_double("process.haar_csv", row[2]);
        }
        return make_doubling_haar(std::move(h), pc.bit_depth);
    }
    throw ConfigError("process.kind", "unknown process kind '" + pc.kind + "'");
}

MkSchedule build_schedule(const ExperimentConfig& c) {
    const auto sc = parse_schedule_case(c.schedule);
    const auto base = parse_log_base(c.log_base);
    switch (sc) {
        case ScheduleCase::constant: return MkSchedule::constant(c.schedule_m, c.p, c.alpha.value_or(c.p + 1.0));
        case ScheduleCase::explicit_values:
            if (c.schedule_values.empty()) throw ConfigError("schedule.values", "explicit schedule needs values");
            return MkSchedule::explicit_values(c.schedule_values, c.p, c.alpha.value_or(c.p + 1.0));
        default: return MkSchedule::named(sc, c.p, c.alpha, base);
    }
}

std::vector<CausalProcess> zoo() {
    VolterraSpec vol;
    vol.terms = {{{0}, 1.0}, {{1}, 0.5}, {{0, 1}, 0.4}, {{0, 2}, 0.2}};
    return {
        make_iid(),
        make_iid(InnovationLaw::rademacher()),
        make_ma1(0.5),
        make_ar1_linear(0.5),
        make_ar1_irf(0.5),
        make_tar(0.6, -0.4),
        make_arch1(1.0, 0.3),
        make_volterra(vol, InnovationLaw::standard_normal(), "volterra2"),
        make_doubling_identity(),
        make_doubling_haar_mother(),
    };
}

// CSV

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

std::string csv_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

// Rates

RateFit fit_rate(const std::vector<std::pair<std::int64_t, double>>& medians) {
    if (medians.size() < 4) throw std::invalid_argument("fit_rate: need at least 4 grid points");
    RateFit f;
    for (const auto& [n, m] : medians) {
        f.n.push_back(n);
        f.median.push_back(m);
    }
    f.q25 = f.q75 = f.median;
    for (const auto& [n, m] : medians) {
        if (!(m > 0.0)) {
            f.slope = -kInf;
            f.intercept = std::nan("");
            f.r2 = std::nan("");
            f.note = "nonpositive median at n = " + std::to_string(n) + " (exact coupling); slope is the -inf sentinel";
            return f;
        }
    }
    std::vector<double> y, x;
    for (const auto& [n, m] : medians) {
        x.push_back(std::log(static_cast<double>(n)));
        y.push_back(std::log(m));
    }
    auto fit = least_squares(y, {x});
    f.intercept = fit.coef[0];
    f.slope = fit.coef[1];
    f.r2 = fit.r2;
    return f;
}

RateFit fit_rate_samples(const std::vector<std::int64_t>& n, const std::vector<std::vector<double>>& samples) {
    if (n.size() != samples.size()) throw std::invalid_argument("fit_rate_samples: size mismatch");
    std::vector<std::pair<std::int64_t, double>> med;
    std::vector<double> q25, q75;
    for (std::size_t i = 0; i < n.size(); ++i) {
        med.emplace_back(n[i], median(samples[i]));
        q25.push_back(quantile(samples[i], 0.25));
        q75.push_back(quantile(samples[i], 0.75));
    }
    RateFit f;
    if (n.size() >= 4) {
        f = fit_rate(med);
    } else {
        for (const auto& [k, m] : med) {
            f.n.push_back(k);
            f.median.push_back(m);
        }
        f.slope = f.intercept = f.r2 = std::nan("");
        f.note = "fewer than 4 grid points; no slope fitted";
    }
    f.q25 = q25;
    f.q75 = q75;
    return f;
}

void write_rate_csv(const RateFit& f, std::ostream& os) {
    os << "n,median_D,q25,q75,fitted_slope\n";
    for (std::size_t i = 0; i < f.n.size(); ++i)
        os << f.n[i] << ',' << csv_number(f.median[i]) << ',' << csv_number(f.q25[i]) << ',' << csv_number(f.q75[i])
           << ',' << csv_number(f.slope) << '\n';
}

// Truncated-moment series

std::string verdict_name(SeriesVerdict v) {
    switch (v) {
        case SeriesVerdict::converges: return "converges";
        case SeriesVerdict::diverges: return "diverges";
        case SeriesVerdict::inconclusive: return "inconclusive";
    }
    return "?";
}

TruncMomentReport lemma_truncmoment_check(const InnovationLaw& law, double p, double alpha, int horizon) {
    if (!(p > 2.0)) throw std::invalid_argument("lemma_truncmoment_check: p must exceed 2");
    if (!(alpha > p)) throw std::invalid_argument("lemma_truncmoment_check: alpha must exceed p");
    if (horizon < 8) throw std::invalid_argument("lemma_truncmoment_check: horizon must be >= 8");
    TruncMomentReport r;
    r.law = law.name();
    r.p = p;
    r.alpha = alpha;
    r.horizon = horizon;
    for (int i = 0; i <= horizon; ++i) {
        const double three_i = std::pow(3.0, i);
        const double a = std::pow(3.0, i / p);
        r.tail_terms.push_back(three_i * law.abs_tail(a));
        // min(|x/a|^alpha, |x/a|^2) is the alpha-power inside [-a, a], the square outside.
        auto tm = truncated_moments(law, alpha, a);
        r.moment_terms.push_back(three_i * (tm.inner * std::pow(a, -alpha) + tm.outer / (a * a)));
    }
    ExactSum s1, s2;
    for (double x : r.tail_terms) s1.add(x);
    for (double x : r.moment_terms) s2.add(x);
    r.tail_sum = s1.value();
    r.moment_sum = s2.value();
    if (!std::isfinite(r.tail_sum) || std::isnan(r.tail_sum)) r.tail_sum = kInf;
    if (!std::isfinite(r.moment_sum) || std::isnan(r.moment_sum)) r.moment_sum = kInf;
    r.tail_verdict = judge_terms(r.tail_terms, &r.tail_decay_from);
    r.moment_verdict = judge_terms(r.moment_terms, &r.moment_decay_from);
    r.moment_p = p < law.p_max() ? std::pow(law.lp_norm(p), p) : kInf;
    r.finite_moment = std::isfinite(r.moment_p);
    r.tail_ratio = r.finite_moment ? r.tail_sum / r.moment_p : std::nan("");
    r.moment_ratio = r.finite_moment ? r.moment_sum / r.moment_p : std::nan("");
    return r;
}

std::string TruncMomentReport::text() const {
    std::ostringstream os;
    os << "Truncated-moment series, law " << law << ", p = " << p << ", alpha = " << alpha << ", i = 0.." << horizon
       << "\n";
    os << "  E|X|^p = " << (finite_moment ? csv_number(moment_p) : std::string("inf (negative control)")) << "\n";
    auto line = [&](const char* name, double sum, SeriesVerdict v, int from, double ratio) {
        os << "  " << name << ": partial sum " << csv_number(sum) << ", " << verdict_name(v);
        if (from >= 0) os << ", summands decreasing from i = " << from;
        if (finite_moment) os << ", partial sum / E|X|^p = " << csv_number(ratio);
        os << "\n";
    };
    line("sum 3^i P(|X| >= 3^{i/p})", tail_sum, tail_verdict, tail_decay_from, tail_ratio);
    line("sum 3^i E min(|X/3^{i/p}|^alpha, |X/3^{i/p}|^2)", moment_sum, moment_verdict, moment_decay_from, moment_ratio);
    return os.str();
}

void TruncMomentReport::write_csv(std::ostream& os) const {
    os << "i,tail_term,moment_term\n";
    for (std::size_t i = 0; i < tail_terms.size(); ++i)
        os << i << ',' << csv_number(tail_terms[i]) << ',' << csv_number(moment_terms[i]) << '\n';
}

// CLT

CltResult clt_check(const CausalProcess& proc, std::int64_t n, int replications, const Seed& seed, int workers) {
    CltResult r;
    r.process = proc.name();
    r.n = n;
    r.replications = replications;
    if (auto s = proc.sigma2_oracle()) {
        r.sigma2 = *s;
        r.sigma2_analytic = true;
    } else {
        r.sigma2 = sigma2_longrun(proc, seed).value;
    }
    r.mean = process_mean(proc, seed);
    const std::int64_t lag = proc.memory() >= 0 ? proc.memory() : std::max<std::int64_t>(proc.min_lag(), 0);
    std::vector<double> z(static_cast<std::size_t>(replications));
    const double scale = std::sqrt(static_cast<double>(n) * r.sigma2);
    parallel_for(z.size(), workers, [&](std::size_t i) {
        auto x = evaluate_path(proc, Seed{seed.master, streams::aux, i}, n, lag);
        ExactSum s;
        for (double v : x) s.add(v - r.mean);
        z[i] = s.value() / scale;
    });
    r.ks = ks_statistic(z, [](double x) { return normal_cdf(x); });
    r.critical = ks_critical_value(z.size(), 0.01);
    r.pass = r.ks < r.critical;
    return r;
}

// Profiles and conditions

DependenceProfile build_profile(const ExperimentConfig& cfg, const CausalProcess& proc) {
    if (cfg.profile_source == "analytic") return analytic_profile(proc, 2.0, cfg.dep_lag_budget);
    DeltaOptions opt;
    opt.replications = static_cast<std::size_t>(cfg.dep_replications);
    opt.lag_budget = cfg.dep_lag_budget;
    opt.workers = cfg.workers;
    return estimate_profile(proc, 2.0, Seed{cfg.seed, streams::panel, 0}, opt);
}

ThetaModel build_theta(const ExperimentConfig& cfg, const CausalProcess& proc,
                       std::optional<DependenceProfile>* profile_out) {
    if (cfg.theta_model == "geometric") return ThetaModel::geometric(cfg.theta_c, cfg.theta_rho);
    if (cfg.theta_model == "power_log") return ThetaModel::power_log(cfg.theta_c, cfg.theta_tau, cfg.theta_A);
    if (cfg.theta_model == "constant") return ThetaModel::constant(cfg.theta_c);
    auto prof = build_profile(cfg, proc);
    if (profile_out) *profile_out = prof;
    return ThetaModel::from_profile(std::move(prof));
}

ConditionReport run_check_conditions(const ExperimentConfig& cfg) {
    auto schedule = build_schedule(cfg);
    auto proc = build_process(cfg.process);
    auto theta = build_theta(cfg, proc);
    return check_theorem_conditions(theta, schedule.alpha(), schedule, cfg.p);
}

void write_profile_csv(const DependenceProfile& prof, std::ostream& os) {
    os << "j,delta,se,theta,theta_se,beyond_window\n";
    for (std::size_t j = 0; j < prof.delta.size(); ++j) {
        const auto& d = prof.delta[j];
        os << d.j << ',' << csv_number(d.delta) << ',' << csv_number(d.se) << ','
           << csv_number(j < prof.theta.size() ? prof.theta[j] : std::nan("")) << ','
           << csv_number(j < prof.theta_se.size() ? prof.theta_se[j] : std::nan("")) << ','
           << (d.beyond_window ? 1 : 0) << '\n';
    }
}

// SIP experiment

SipExperiment run_sip_experiment(const ExperimentConfig& cfg) {
    SipExperiment ex;
    auto proc = build_process(cfg.process);
    auto schedule = build_schedule(cfg);
    const std::int64_t n_max = cfg.n_grid.back();
    PipelineOptions po;
    po.inner_reps = cfg.inner_reps;
    po.centering_draws = static_cast<std::size_t>(cfg.centering_draws);
    po.workers = cfg.workers;
    const Seed base{cfg.seed, 0, 0};
    PipelineContext ctx(proc, schedule, cfg.p, n_max, base, po);

    std::optional<DependenceProfile> profile;
    if (!proc.sigma2_oracle()) profile = build_profile(cfg, proc);
    VarianceOptions vo;
    vo.sim_length = cfg.variance_sim_length;
    vo.sigma2_path = cfg.sigma2_path;
    vo.workers = cfg.workers;
    ex.variance = build_variance_model(ctx, base, vo, profile ? &*profile : nullptr);
    ex.top_layout = layout(n_max, schedule);
    ex.phi_gap = phi_block_variance_gap(ex.variance, ex.top_layout);
    ex.linearization = linearize(ex.variance, n_max, cfg.p);

    BlockLawOptions bo;
    bo.samples = static_cast<std::size_t>(cfg.block_law_samples);
    bo.workers = cfg.workers;
    auto laws = build_block_laws(ctx, ex.variance, ex.top_layout.K0, ex.top_layout.h, base, bo);
    ex.block_laws.assign(laws.size(), "");
    for (std::size_t k = 0; k < laws.size(); ++k)
        if (laws[k]) ex.block_laws[k] = laws[k]->describe();

    const auto R = static_cast<std::size_t>(cfg.replications);
    const std::size_t G = cfg.n_grid.size();
    std::vector<SipRow> rows(R * G);
    parallel_for(R, cfg.workers, [&](std::size_t r) {
        auto d = decompose(ctx, Seed{cfg.seed, streams::panel, r}, n_max);
        auto c = couple_blocks(d, ex.variance, laws, Seed{cfg.seed, streams::coupling, r});
        for (std::size_t g = 0; g < G; ++g) {
            const auto n = static_cast<std::size_t>(cfg.n_grid[g]);
            rows[r * G + g] = {r, cfg.n_grid[g], c.D[n], c.D_prime[n], c.D_sip[n], c.law_error[n], c.grid_error[n]};
        }
        if (r == 0) ex.first_paths = std::move(c);
    });
    ex.rows = std::move(rows);
    ex.sigma_zero = ex.first_paths.sigma_zero;

    std::vector<std::vector<double>> D(G), Dp(G), Ds(G);
    for (const auto& row : ex.rows) {
        auto g = static_cast<std::size_t>(std::find(cfg.n_grid.begin(), cfg.n_grid.end(), row.n) - cfg.n_grid.begin());
        D[g].push_back(row.D);
        Dp[g].push_back(row.D_prime);
        Ds[g].push_back(row.D_sip);
    }
    ex.rate_D = fit_rate_samples(cfg.n_grid, D);
    ex.rate_D_prime = fit_rate_samples(cfg.n_grid, Dp);
    ex.rate_D_sip = fit_rate_samples(cfg.n_grid, Ds);
    for (std::size_t g = 0; g < G; ++g)
        ex.median_D_over_root.push_back(ex.rate_D.median[g] / std::pow(static_cast<double>(cfg.n_grid[g]), 1.0 / cfg.p));
    return ex;
}

void SipExperiment::write_rows_csv(std::ostream& os) const {
    os << "replication,n,D,D_prime,D_sip,law_error,grid_error\n";
    for (const auto& r : rows)
        os << r.replication << ',' << r.n << ',' << csv_number(r.D) << ',' << csv_number(r.D_prime) << ','
           << csv_number(r.D_sip) << ',' << csv_number(r.law_error) << ',' << csv_number(r.grid_error) << '\n';
}

void SipExperiment::write_variance_csv(std::ostream& os) const {
    os << "k,m,nu,nu_se,gamma_exact,sigma2,block_law\n";
    for (int k = 1; k <= variance.max_scale(); ++k) {
        const auto uk = static_cast<std::size_t>(k);
        os << k << ',' << variance.m[uk] << ',' << csv_number(variance.nu[uk]) << ',' << csv_number(variance.nu_se[uk])
           << ',' << (variance.gamma_exact[uk] ? 1 : 0) << ',' << csv_number(variance.sigma2) << ','
           << csv_field(uk < block_laws.size() ? block_laws[uk] : std::string()) << '\n';
    }
}

std::string SipExperiment::text(double p) const {
    std::ostringstream os;
    os << "Strong approximation experiment\n";
    os << "  sigma^2 = " << csv_number(variance.sigma2);
    if (variance.sigma2_se > 0.0) os << " (SE " << csv_number(variance.sigma2_se) << ")";
    if (variance.long_range) os << " [long-range dependence flagged]";
    os << "\n";
    if (sigma_zero) os << "  sigma = 0: the Gaussian side is the zero path (degenerate case)\n";
    os << "  layout at n = " << top_layout.n << ": h = " << top_layout.h << ", K0 = " << top_layout.K0 << "\n";
    os << "  phi vs block-sum variance: max gap " << csv_number(phi_gap.max_gap) << ", 3 max m_k nu_k = "
       << csv_number(phi_gap.one_scale_bound) << ", cumulative bound " << csv_number(phi_gap.cumulative_bound)
       << " (reported, not asserted)\n";
    os << "  linearization: varsigma_n^2 = " << csv_number(linearization.varsigma2) << ", "
       << (linearization.pass ? "PASS" : "FAIL") << " (" << linearization.evidence << ")\n";
    auto rate = [&](const char* name, const RateFit& f) {
        os << "  " << name << ": slope " << csv_number(f.slope) << " (target <= 1/p + 0.1 = " << csv_number(1.0 / p + 0.1)
           << "), R^2 " << csv_number(f.r2);
        if (!f.note.empty()) os << "; " << f.note;
        os << "\n";
        for (std::size_t i = 0; i < f.n.size(); ++i)
            os << "    n = " << f.n[i] << ": median " << csv_number(f.median[i]) << " [" << csv_number(f.q25[i]) << ", "
               << csv_number(f.q75[i]) << "]\n";
    };
    rate("D_n = max |S_diamond - B(phi)|", rate_D);
    rate("D'_n = max |S_diamond - sigma B''|", rate_D_prime);
    rate("max |S - sigma B''|", rate_D_sip);
    os << "  median D_n / n^{1/p}:";
    for (double v : median_D_over_root) os << " " << csv_number(v);
    os << "\n";
    // Error decomposition on the block grid, medians at the largest n.
    std::vector<double> law_e, grid_e;
    const std::int64_t n_top = rows.empty() ? 0 : std::max_element(rows.begin(), rows.end(), [](auto& a, auto& b) {
                                                      return a.n < b.n;
                                                  })->n;
    for (const auto& r : rows)
        if (r.n == n_top) {
            law_e.push_back(r.law_error);
            grid_e.push_back(r.grid_error);
        }
    if (!law_e.empty())
        os << "  coupling error at n = " << n_top << ": block-law mismatch median " << csv_number(median(law_e))
           << ", variance-grid mismatch median " << csv_number(median(grid_e)) << "\n";
    return os.str();
}

// Commands

int cmd_simulate(const ExperimentConfig& cfg, std::ostream& log) {
    auto dir = prepare_out(cfg);
    auto proc = build_process(cfg.process);
    auto schedule = build_schedule(cfg);
    const std::int64_t n = cfg.n_grid.back();
    PipelineOptions po;
    po.inner_reps = cfg.inner_reps;
    po.centering_draws = static_cast<std::size_t>(cfg.centering_draws);
    po.workers = cfg.workers;
    PipelineContext ctx(proc, schedule, cfg.p, n, Seed{cfg.seed, 0, 0}, po);
    auto d = decompose(ctx, Seed{cfg.seed, streams::panel, 0}, n);
    {
        auto os = open_out(dir / "paths.csv");
        d.write_paths_csv(os);
    }
    {
        auto os = open_out(dir / "blocks.csv");
        d.write_blocks_csv(os);
    }
    log << "simulate: " << proc.name() << ", n = " << n << ", " << d.blocks.size() << " blocks, schedule "
        << schedule.id() << "\n";
    log << "wrote " << (dir / "paths.csv").string() << ", " << (dir / "blocks.csv").string() << "\n";
    return kExitOk;
}

int cmd_depmeasure(const ExperimentConfig& cfg, std::ostream& log) {
    auto dir = prepare_out(cfg);
    auto proc = build_process(cfg.process);
    auto prof = build_profile(cfg, proc);
    {
        auto os = open_out(dir / "profile.csv");
        write_profile_csv(prof, os);
    }
    std::ostringstream txt;
    txt << "Dependence profile, " << proc.name() << ", p = " << prof.p << ", lags 0.." << prof.L << "\n";
    txt << "  Theta_0 = " << csv_number(prof.theta.empty() ? std::nan("") : prof.theta[0]);
    if (!prof.theta_se.empty()) txt << " (SE " << csv_number(prof.theta_se[0]) << ")";
    txt << "\n  tail beyond L: " << csv_number(prof.tail) << (prof.tail_analytic ? " (analytic)" : "") << "\n";
    txt << "  decay fit: " << (prof.fit ? prof.fit->describe() : std::string("none")) << "\n";
    if (prof.long_range) txt << "  long-range dependence flagged\n";
    {
        auto os = open_out(dir / "profile.txt");
        os << txt.str();
    }
    log << txt.str();
    return kExitOk;
}

int cmd_check_conditions(const ExperimentConfig& cfg, std::ostream& log) {
    auto dir = prepare_out(cfg);
    auto rep = run_check_conditions(cfg);
    {
        auto os = open_out(dir / "conditions.csv");
        rep.write_csv(os);
    }
    {
        auto os = open_out(dir / "conditions.txt");
        os << rep.text();
    }
    log << rep.text();
    return rep.all_pass() ? kExitOk : kExitConditions;
}

int cmd_sip_experiment(const ExperimentConfig& cfg, std::ostream& log) {
    auto dir = prepare_out(cfg);
    auto ex = run_sip_experiment(cfg);
    {
        auto os = open_out(dir / "coupled_paths.csv");
        ex.first_paths.write_csv(os);
    }
    {
        auto os = open_out(dir / "sip_errors.csv");
        ex.write_rows_csv(os);
    }
    {
        auto os = open_out(dir / "rate_summary.csv");
        write_rate_csv(ex.rate_D, os);
    }
    {
        auto os = open_out(dir / "variance.csv");
        ex.write_variance_csv(os);
    }
    const auto txt = ex.text(cfg.p);
    {
        auto os = open_out(dir / "sip.txt");
        os << txt;
    }
    log << txt;
    return kExitOk;
}

int cmd_report(const ExperimentConfig& cfg, std::ostream& log) {
    auto dir = prepare_out(cfg);
    auto proc = build_process(cfg.process);
    auto schedule = build_schedule(cfg);
    std::ostringstream rep;
    rep << "Report\n";
    rep << "  process " << proc.name() << ", law " << proc.law().name() << ", p = " << cfg.p << ", alpha = "
        << schedule.alpha() << "\n";
    rep << "  schedule " << schedule.id() << ", n grid " << format_n_grid(cfg.n_grid) << ", replications "
        << cfg.replications << ", seed " << cfg.seed << "\n\n";

    std::optional<DependenceProfile> prof;
    auto theta = build_theta(cfg, proc, &prof);
    if (prof) {
        auto os = open_out(dir / "profile.csv");
        write_profile_csv(*prof, os);
    }
    auto cond = check_theorem_conditions(theta, schedule.alpha(), schedule, cfg.p);
    {
        auto os = open_out(dir / "conditions.csv");
        cond.write_csv(os);
    }
    rep << cond.text() << "\n";

    auto ex = run_sip_experiment(cfg);
    {
        auto os = open_out(dir / "coupled_paths.csv");
        ex.first_paths.write_csv(os);
    }
    {
        auto os = open_out(dir / "sip_errors.csv");
        ex.write_rows_csv(os);
    }
    {
        auto os = open_out(dir / "rate_summary.csv");
        write_rate_csv(ex.rate_D, os);
    }
    {
        auto os = open_out(dir / "variance.csv");
        ex.write_variance_csv(os);
    }
    rep << ex.text(cfg.p) << "\n";

    auto series = lemma_truncmoment_check(InnovationLaw::parse(cfg.truncation_law, cfg.truncation_law_param), cfg.p,
                                         schedule.alpha(), cfg.truncation_horizon);
    {
        auto os = open_out(dir / "truncated_moments.csv");
        series.write_csv(os);
    }
    rep << series.text() << "\n";

    if (cfg.clt_enabled) {
        auto clt = clt_check(proc, cfg.clt_n, cfg.clt_replications, Seed{cfg.seed, streams::aux, 0}, cfg.workers);
        {
            auto os = open_out(dir / "clt.csv");
            os << "process,n,replications,sigma2,sigma2_analytic,mean,ks,critical_1pct,pass\n";
            os << csv_field(clt.process) << ',' << clt.n << ',' << clt.replications << ',' << csv_number(clt.sigma2)
               << ',' << (clt.sigma2_analytic ? 1 : 0) << ',' << csv_number(clt.mean) << ',' << csv_number(clt.ks)
               << ',' << csv_number(clt.critical) << ',' << (clt.pass ? 1 : 0) << '\n';
        }
        rep << "CLT cross-check: KS of S_n / sqrt(n sigma^2) at n = " << clt.n << " over " << clt.replications
            << " replications = " << csv_number(clt.ks) << " vs 1% critical " << csv_number(clt.critical) << ": "
            << (clt.pass ? "PASS" : "FAIL") << "\n";
    }
    {
        auto os = open_out(dir / "report.txt");
        os << rep.str();
    }
    log << rep.str();
    return cond.all_pass() ? kExitOk : kExitConditions;
}

}  // namespace kmtdep
