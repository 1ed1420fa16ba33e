#include "kmtdep/innovations.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

#include "kmtdep/stats.hpp"

namespace kmtdep {

namespace {

constexpr std::uint64_t fmix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

std::uint64_t derive_stream(std::uint64_t base, std::uint64_t label) {
    return fmix(fmix(base + 0x9E3779B97F4A7C15ULL) ^ fmix(label + 0x632BE59BD9B4E019ULL)) | (1ULL << 63);
}

CounterRng::CounterRng(const Seed& seed) {
    std::uint64_t k = fmix(seed.master + 0x9E3779B97F4A7C15ULL);
    k = fmix(k ^ (seed.stream_id + 0xD1B54A32D192ED03ULL));
    k = fmix(k ^ (seed.replication_id + 0x8CB92BA72F3D8DD7ULL));
    key_ = k;
}

std::uint64_t CounterRng::bits(std::int64_t t, std::uint32_t slot) const {
    std::uint64_t h = fmix(key_ ^ (static_cast<std::uint64_t>(t) * 0xD6E8FEB86659FD93ULL));
    return fmix(h ^ (static_cast<std::uint64_t>(slot) * 0xA0761D6478BD642FULL + 0xE7037ED1A0B428DBULL));
}

double CounterRng::uniform(std::int64_t t, std::uint32_t slot) const {
    return (static_cast<double>(bits(t, slot) >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal(std::int64_t t, std::uint32_t slot) const { return normal_quantile(uniform(t, slot)); }

InnovationLaw InnovationLaw::student_t(double df) {
    if (!(df > 0.0)) throw std::invalid_argument("student_t: df must be positive");
    return {LawKind::student_t, df};
}

InnovationLaw InnovationLaw::centered_pareto(double tail_index) {
    if (!(tail_index > 0.0)) throw std::invalid_argument("centered_pareto: tail_index must be positive");
    return {LawKind::centered_pareto, tail_index};
}

InnovationLaw InnovationLaw::parse(const std::string& name, double param) {
    if (name == "standard_normal" || name == "normal") return standard_normal();
    if (name == "rademacher") return rademacher();
    if (name == "uniform01") return uniform01();
    if (name == "bernoulli_half") return bernoulli_half();
    if (name == "student_t") return student_t(param);
    if (name == "centered_pareto") return centered_pareto(param);
    throw std::invalid_argument("unknown innovation law '" + name + "'");
}

std::string InnovationLaw::name() const {
    switch (kind_) {
        case LawKind::standard_normal: return "standard_normal";
        case LawKind::rademacher: return "rademacher";
        case LawKind::uniform01: return "uniform01";
        case LawKind::bernoulli_half: return "bernoulli_half";
        case LawKind::student_t: return "student_t";
        case LawKind::centered_pareto: return "centered_pareto";
    }
    return "?";
}

double InnovationLaw::p_max() const {
    switch (kind_) {
        case LawKind::student_t:
        case LawKind::centered_pareto: return param_;
        default: return kInf;
    }
}

bool InnovationLaw::centered() const {
    return kind_ != LawKind::uniform01 && kind_ != LawKind::bernoulli_half;
}

bool InnovationLaw::discrete() const {
    return kind_ == LawKind::rademacher || kind_ == LawKind::bernoulli_half;
}

bool InnovationLaw::symmetric() const { return centered(); }

double InnovationLaw::mean() const { return centered() ? 0.0 : 0.5; }

double InnovationLaw::variance() const {
    switch (kind_) {
        case LawKind::standard_normal:
        case LawKind::rademacher: return 1.0;
        case LawKind::uniform01: return 1.0 / 12.0;
        case LawKind::bernoulli_half: return 0.25;
        case LawKind::student_t: return param_ > 2.0 ? param_ / (param_ - 2.0) : kInf;
        case LawKind::centered_pareto: return param_ > 2.0 ? param_ / (param_ - 2.0) : kInf;
    }
    return kInf;
}

double InnovationLaw::lp_norm(double p) const {
    if (!(p > 0.0)) throw std::invalid_argument("lp_norm: p must be positive");
    switch (kind_) {
        case LawKind::standard_normal: return std::pow(normal_abs_moment(p), 1.0 / p);
        case LawKind::rademacher: return 1.0;
        case LawKind::uniform01: return std::pow(1.0 / (p + 1.0), 1.0 / p);
        case LawKind::bernoulli_half: return std::pow(0.5, 1.0 / p);
        case LawKind::student_t: {
            double df = param_;
            if (p >= df) return kInf;
            double log_m = 0.5 * p * std::log(df) + std::lgamma((p + 1.0) / 2.0) + std::lgamma((df - p) / 2.0) -
                           0.5 * std::log(std::numbers::pi) - std::lgamma(df / 2.0);
            return std::exp(log_m / p);
        }
        case LawKind::centered_pareto: {
            double a = param_;
            if (p >= a) return kInf;
            return std::pow(a / (a - p), 1.0 / p);
        }
    }
    return kInf;
}

std::optional<double> InnovationLaw::coupled_difference_norm(double p) const {
    switch (kind_) {
        case LawKind::standard_normal: return std::sqrt(2.0) * lp_norm(p);
        case LawKind::rademacher: return 2.0 * std::pow(0.5, 1.0 / p);
        case LawKind::bernoulli_half: return std::pow(0.5, 1.0 / p);
        case LawKind::uniform01: return std::pow(2.0 / ((p + 1.0) * (p + 2.0)), 1.0 / p);
        default: return std::nullopt;
    }
}

double InnovationLaw::cdf(double x) const {
    switch (kind_) {
        case LawKind::standard_normal: return normal_cdf(x);
        case LawKind::rademacher: return x < -1.0 ? 0.0 : (x < 1.0 ? 0.5 : 1.0);
        case LawKind::uniform01: return std::clamp(x, 0.0, 1.0);
        case LawKind::bernoulli_half: return x < 0.0 ? 0.0 : (x < 1.0 ? 0.5 : 1.0);
        case LawKind::student_t: return boost::math::cdf(boost::math::students_t_distribution<double>(param_), x);
        case LawKind::centered_pareto: {
            double a = param_;
            if (x <= -1.0) return 0.5 * std::pow(-x, -a);
            if (x < 1.0) return 0.5;
            return 1.0 - 0.5 * std::pow(x, -a);
        }
    }
    return 0.0;
}

double InnovationLaw::cdf_left(double x) const {
    switch (kind_) {
        case LawKind::rademacher: return x <= -1.0 ? 0.0 : (x <= 1.0 ? 0.5 : 1.0);
        case LawKind::bernoulli_half: return x <= 0.0 ? 0.0 : (x <= 1.0 ? 0.5 : 1.0);
        default: return cdf(x);
    }
}

double InnovationLaw::quantile(double u) const {
    switch (kind_) {
        case LawKind::standard_normal: return normal_quantile(u);
        case LawKind::rademacher: return u < 0.5 ? -1.0 : 1.0;
        case LawKind::uniform01: return u;
        case LawKind::bernoulli_half: return u < 0.5 ? 0.0 : 1.0;
        case LawKind::student_t:
            return boost::math::quantile(boost::math::students_t_distribution<double>(param_), u);
        case LawKind::centered_pareto: {
            double a = param_;
            return u < 0.5 ? -std::pow(2.0 * u, -1.0 / a) : std::pow(2.0 * (1.0 - u), -1.0 / a);
        }
    }
    return 0.0;
}

double InnovationLaw::abs_tail(double t) const {
    if (t <= 0.0) return 1.0;
    switch (kind_) {
        case LawKind::standard_normal: return std::erfc(t / std::numbers::sqrt2);
        case LawKind::rademacher: return t <= 1.0 ? 1.0 : 0.0;
        case LawKind::uniform01: return t <= 1.0 ? 1.0 - t : 0.0;
        case LawKind::bernoulli_half: return t <= 1.0 ? 0.5 : 0.0;
        case LawKind::student_t:
            return 2.0 * boost::math::cdf(boost::math::complement(boost::math::students_t_distribution<double>(param_), t));
        case LawKind::centered_pareto: return t <= 1.0 ? 1.0 : std::pow(t, -param_);
    }
    return 0.0;
}

InnovationWindow draw_window(const Seed& seed, const InnovationLaw& law, std::int64_t origin, std::int64_t L) {
    if (L < 0) throw std::invalid_argument("draw_window: negative lag budget");
    CounterRng rng(seed);
    std::vector<double> values(static_cast<std::size_t>(L + 1));
    for (std::int64_t t = origin - L; t <= origin; ++t) values[static_cast<std::size_t>(t - origin + L)] = law.sample(rng, t);
    return {origin, std::move(values)};
}

InnovationWindow couple_at(const InnovationWindow& window, std::int64_t j, const Seed& seed_prime,
                           const InnovationLaw& law) {
    if (!window.contains(j))
        throw std::out_of_range("couple_at: index " + std::to_string(j) + " outside window [" +
                                std::to_string(window.first()) + ", " + std::to_string(window.origin()) + "]");
    InnovationWindow out = window;
    out.at(j) = law.sample(CounterRng(seed_prime), j);
    return out;
}

}  // namespace kmtdep
