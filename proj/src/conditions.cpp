#include "kmtdep/conditions.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace kmtdep {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
const double kLn3 = std::log(3.0);
const double kLog2p53 = 53.0 * std::log(2.0);

double logaddexp(double a, double b) {
    if (a == -kInf) return b;
    if (b == -kInf) return a;
    double m = std::max(a, b);
    if (m == kInf) return kInf;
    return m + std::log1p(std::exp(-std::abs(a - b)));
}

std::string fmt(double x, int prec = 6) {
    std::ostringstream os;
    os << std::setprecision(prec) << x;
    return os.str();
}

std::string case_name(ScheduleCase c) {
    switch (c) {
        case ScheduleCase::i: return "i";
        case ScheduleCase::ii: return "ii";
        case ScheduleCase::iii: return "iii";
        case ScheduleCase::constant: return "constant";
        case ScheduleCase::explicit_values: return "explicit";
    }
    return "?";
}

std::string base_name(LogBase b) {
    switch (b) {
        case LogBase::natural: return "ln";
        case LogBase::base2: return "log2";
        case LogBase::base10: return "log10";
    }
    return "?";
}

void require_alpha(double p, double alpha) {
    if (!(alpha > p)) throw std::invalid_argument("alpha = " + fmt(alpha) + " must exceed p = " + fmt(p));
}

}  // namespace

double tau_p(double p) {
    if (!(p >= 2.0)) throw std::invalid_argument("tau_p: p = " + fmt(p) + " must be at least 2");
    return (p * p - 4.0 + (p - 2.0) * std::sqrt(p * p + 20.0 * p + 4.0)) / (8.0 * p);
}

double tau_residual(double p, double tau) {
    double lhs = (tau - (0.5 - 1.0 / p)) / (tau / p - 0.25 + 1.0 / (2.0 * p));
    double rhs = (2.0 / 3.0) * (1.0 + p + p * tau);
    return lhs - rhs;
}

ScheduleCase parse_schedule_case(const std::string& s) {
    if (s == "i") return ScheduleCase::i;
    if (s == "ii") return ScheduleCase::ii;
    if (s == "iii") return ScheduleCase::iii;
    if (s == "constant") return ScheduleCase::constant;
    if (s == "explicit") return ScheduleCase::explicit_values;
    throw std::invalid_argument("unknown schedule case '" + s + "' (expected i, ii, iii, constant or explicit)");
}

LogBase parse_log_base(const std::string& s) {
    if (s == "natural" || s == "ln" || s == "e") return LogBase::natural;
    if (s == "2" || s == "log2") return LogBase::base2;
    if (s == "10" || s == "log10") return LogBase::base10;
    throw std::invalid_argument("unknown log base '" + s + "' (expected natural, 2 or 10)");
}

MkSchedule MkSchedule::named(ScheduleCase c, double p, std::optional<double> alpha, LogBase base) {
    MkSchedule s;
    s.kind_ = c;
    s.p_ = p;
    s.base_ = base;
    switch (c) {
        case ScheduleCase::i:
            if (!(p > 4.0)) throw std::invalid_argument("schedule case i requires p > 4, got p = " + fmt(p));
            s.alpha_ = alpha.value_or((2.0 / 3.0) * (1.0 + p + p * tau_p(p)));
            break;
        case ScheduleCase::ii:
            if (p != 4.0) throw std::invalid_argument("schedule case ii requires p = 4, got p = " + fmt(p));
            s.alpha_ = alpha.value_or(6.0);
            break;
        case ScheduleCase::iii: {
            if (!(p > 2.0 && p < 4.0))
                throw std::invalid_argument("schedule case iii requires 2 < p < 4, got p = " + fmt(p));
            double lo = (2.0 + p) / (3.0 - p / 2.0), hi = (2.0 + 4.0 * p) / 3.0;
            s.alpha_ = alpha.value_or(0.5 * (lo + hi));
            if (!(s.alpha_ > lo))
                throw std::invalid_argument("schedule case iii requires alpha > (2+p)/(3-p/2) = " + fmt(lo) +
                                            ", got " + fmt(s.alpha_));
            if (!(s.alpha_ < hi))
                throw std::invalid_argument("schedule case iii requires alpha < (2+4p)/3 = " + fmt(hi) + ", got " +
                                            fmt(s.alpha_));
            break;
        }
        default: throw std::invalid_argument("MkSchedule::named: use constant() or explicit_values()");
    }
    require_alpha(p, s.alpha_);
    return s;
}

MkSchedule MkSchedule::constant(std::int64_t m, double p, double alpha) {
    if (m < 1) throw std::invalid_argument("constant schedule requires m >= 1");
    require_alpha(p, alpha);
    MkSchedule s;
    s.kind_ = ScheduleCase::constant;
    s.p_ = p;
    s.alpha_ = alpha;
    s.m_ = m;
    return s;
}

MkSchedule MkSchedule::explicit_values(std::vector<std::int64_t> m, double p, double alpha) {
    if (m.empty()) throw std::invalid_argument("explicit schedule needs at least one value");
    for (auto v : m)
        if (v < 1) throw std::invalid_argument("explicit schedule values must be >= 1");
    require_alpha(p, alpha);
    MkSchedule s;
    s.kind_ = ScheduleCase::explicit_values;
    s.p_ = p;
    s.alpha_ = alpha;
    s.values_ = std::move(m);
    return s;
}

double MkSchedule::log_of(double x) const {
    switch (base_) {
        case LogBase::natural: return std::log(x);
        case LogBase::base2: return std::log2(x);
        case LogBase::base10: return std::log10(x);
    }
    return std::log(x);
}

// log of the unfloored formula; -inf where it is zero or undefined.
double MkSchedule::log_raw(std::int64_t k) const {
    const double kk = static_cast<double>(k);
    switch (kind_) {
        case ScheduleCase::i: {
            double lk = log_of(kk);
            if (!(lk > 0.0)) return -kInf;
            double a = alpha_, p = p_;
            return kk * kLn3 * (a / p - 1.0) / (a / 2.0 - 1.0) - std::log(kk) / (a / 2.0 - 1.0) -
                   std::log(lk) / (p / 2.0 - 1.0);
        }
        case ScheduleCase::ii: return kk * kLn3 / 4.0 - std::log(kk);
        case ScheduleCase::iii: {
            double lk = log_of(kk);
            if (!(lk > 0.0)) return -kInf;
            return kk * kLn3 * (0.5 - 1.0 / p_) + std::log(lk);
        }
        case ScheduleCase::constant: return std::log(static_cast<double>(m_));
        case ScheduleCase::explicit_values: {
            auto idx = static_cast<std::size_t>(std::clamp<std::int64_t>(k, 1, static_cast<std::int64_t>(values_.size())) - 1);
            return std::log(static_cast<double>(values_[idx]));
        }
    }
    return -kInf;
}

std::int64_t MkSchedule::operator()(std::int64_t k) const {
    if (kind_ == ScheduleCase::constant) return m_;
    if (kind_ == ScheduleCase::explicit_values)
        return values_[static_cast<std::size_t>(std::clamp<std::int64_t>(k, 1, static_cast<std::int64_t>(values_.size())) - 1)];
    if (k < 2) return 1;
    double lr = log_raw(k);
    if (lr >= kLog2p53) throw std::overflow_error("m_k overflows at k = " + std::to_string(k));
    if (lr == -kInf) return 1;
    const double kk = static_cast<double>(k);
    double x;
    switch (kind_) {
        case ScheduleCase::ii: x = std::pow(3.0, kk / 4.0) / kk; break;
        case ScheduleCase::iii: x = std::pow(3.0, kk * (0.5 - 1.0 / p_)) * log_of(kk); break;
        default: x = std::exp(lr); break;
    }
    double f = std::floor(x);
    if (x - f > 1.0 - 1e-12) f += 1.0;  // guard values one ulp below an integer
    return std::max<std::int64_t>(1, static_cast<std::int64_t>(f));
}

double MkSchedule::log_value(std::int64_t k) const {
    if (kind_ == ScheduleCase::constant || kind_ == ScheduleCase::explicit_values) return log_raw(k);
    if (k < 2) return 0.0;
    double lr = log_raw(k);
    if (lr < kLog2p53) return std::log(static_cast<double>((*this)(k)));
    return lr;  // the floor is invisible at this size
}

std::string MkSchedule::id() const {
    std::ostringstream os;
    os << "case=" << case_name(kind_) << " p=" << p_ << " alpha=" << alpha_;
    if (kind_ == ScheduleCase::i || kind_ == ScheduleCase::iii) os << " log=" << base_name(base_);
    if (kind_ == ScheduleCase::constant) os << " m=" << m_;
    if (kind_ == ScheduleCase::explicit_values) os << " values=" << values_.size();
    return os.str();
}

std::int64_t mk_schedule(ScheduleCase c, double p, double alpha, std::int64_t k, LogBase base) {
    if (k < 2) throw std::invalid_argument("mk_schedule: k = " + std::to_string(k) + " must be at least 2");
    return MkSchedule::named(c, p, alpha, base)(k);
}

ThetaModel ThetaModel::geometric(double c, double rho) {
    if (!(c > 0.0) || !(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("geometric Theta needs c > 0, 0 < rho < 1");
    ThetaModel t;
    t.family_ = Family::geometric;
    t.c_ = c;
    t.rho_ = rho;
    return t;
}

ThetaModel ThetaModel::power_log(double c, double tau, double A) {
    if (!(c > 0.0) || !(tau > 0.0)) throw std::invalid_argument("power-log Theta needs c > 0, tau > 0");
    ThetaModel t;
    t.family_ = Family::power_log;
    t.c_ = c;
    t.tau_ = tau;
    t.A_ = A;
    return t;
}

ThetaModel ThetaModel::constant(double c) {
    if (!(c >= 0.0)) throw std::invalid_argument("constant Theta needs c >= 0");
    ThetaModel t;
    t.family_ = Family::constant;
    t.c_ = c;
    return t;
}

ThetaModel ThetaModel::from_profile(DependenceProfile profile) {
    if (profile.theta.size() != static_cast<std::size_t>(profile.L + 2))
        throw std::invalid_argument("ThetaModel::from_profile: profile has no Theta sequence");
    ThetaModel t;
    t.family_ = Family::profile;
    t.profile_ = std::move(profile);
    return t;
}

double ThetaModel::log_theta(double m) const {
    if (family_ == Family::profile) return log_theta_extrapolated(*profile_, m);
    return log_theta_at_log(m > 0.0 ? std::log(m) : -kInf);
}

double ThetaModel::log_theta_at_log(double log_m) const {
    switch (family_) {
        case Family::geometric: return std::log(c_) + std::exp(log_m) * std::log(rho_);
        case Family::power_log: {
            double lm = std::max(log_m, std::log(3.0));
            return std::log(c_) - tau_ * lm - A_ * std::log(lm);
        }
        case Family::constant: return c_ > 0.0 ? std::log(c_) : -kInf;
        case Family::profile: return log_theta_extrapolated_log(*profile_, log_m);
    }
    return kNaN;
}

double ThetaModel::log_delta(double j) const {
    if (j < 0.0) return -kInf;
    switch (family_) {
        case Family::geometric: return std::log(c_) + j * std::log(rho_) + std::log1p(-rho_);
        case Family::power_log: {
            if (j + 1.0 <= 3.0) return -kInf;
            double lt = log_theta(std::max(j, 3.0));
            double x = std::max(j, 3.0);
            double step = -tau_ * std::log1p(1.0 / x) - A_ * std::log1p(std::log1p(1.0 / x) / std::log(x));
            if (j < 3.0) step = log_theta(j + 1.0) - lt;
            return lt + std::log(-std::expm1(step));
        }
        case Family::constant: return -kInf;
        case Family::profile: return log_delta_extrapolated(*profile_, j);
    }
    return kNaN;
}

std::int64_t ThetaModel::measured_lag() const { return family_ == Family::profile ? profile_->L : -1; }

std::string ThetaModel::describe() const {
    std::ostringstream os;
    switch (family_) {
        case Family::geometric: os << "Theta_m = " << c_ << " * " << rho_ << "^m"; break;
        case Family::power_log: os << "Theta_m = " << c_ << " * m^-" << tau_ << " (log m)^-" << A_; break;
        case Family::constant: os << "Theta_m = " << c_ << " (no decay)"; break;
        case Family::profile:
            os << "measured profile '" << profile_->process << "' p=" << profile_->p << " L=" << profile_->L
               << ", tail beyond L = " << profile_->tail << (profile_->tail_analytic ? " (analytic)" : " (fitted)");
            if (profile_->fit) os << ", fit: " << profile_->fit->describe();
            break;
    }
    return os.str();
}

SeriesResult test_series(const std::function<double(double)>& log_term, std::int64_t start, std::int64_t horizon,
                         const std::array<double, 3>& far) {
    if (horizon < start + 8) throw std::invalid_argument("test_series: horizon too short");
    SeriesResult res;
    res.truncation = horizon;
    const std::int64_t q0 = start + 3 * (horizon - start) / 4;
    std::vector<double> tail;
    tail.reserve(static_cast<std::size_t>(horizon - q0 + 1));
    // Streaming log-sum-exp.
    double lmax = -kInf, acc = 0.0;
    for (std::int64_t x = start; x <= horizon; ++x) {
        double lt = log_term(static_cast<double>(x));
        if (std::isnan(lt)) throw std::runtime_error("test_series: NaN term at " + std::to_string(x));
        if (x >= q0) tail.push_back(lt);
        if (lt == -kInf) continue;
        if (lt > lmax) {
            acc = (lmax == -kInf ? 0.0 : acc * std::exp(lmax - lt)) + 1.0;
            lmax = lt;
        } else {
            acc += std::exp(lt - lmax);
        }
    }
    double log_partial = lmax == -kInf ? -kInf : lmax + std::log(acc);
    res.partial_sum = std::exp(log_partial);

    res.max_ratio = -kInf;
    res.min_ratio = kInf;
    bool any_finite = false;
    for (std::size_t i = 0; i + 1 < tail.size(); ++i) {
        if (tail[i] == -kInf || tail[i + 1] == -kInf) continue;
        any_finite = true;
        double r = tail[i + 1] - tail[i];
        res.max_ratio = std::max(res.max_ratio, r);
        res.min_ratio = std::min(res.min_ratio, r);
    }
    if (!any_finite) {
        bool last_zero = tail.back() == -kInf;
        res.converges = last_zero;
        res.max_ratio = res.min_ratio = 0.0;
        res.evidence = last_zero ? "terms vanish beyond the support; exact finite sum"
                                 : "isolated nonzero terms in the last quarter; inconclusive";
        return res;
    }
    res.max_ratio = std::exp(res.max_ratio);
    res.min_ratio = std::exp(res.min_ratio);
    if (res.max_ratio < 1.0 - 1e-3) {
        res.converges = true;
        res.tail_estimate = std::exp(tail.back()) * res.max_ratio / (1.0 - res.max_ratio);
        res.evidence = "ratio test: successive ratios <= " + fmt(res.max_ratio) + " < 1 on the last quarter";
        return res;
    }
    if (res.min_ratio > 1.0 + 1e-3) {
        res.converges = false;
        res.tail_estimate = kInf;
        res.evidence = "ratio test: successive ratios >= " + fmt(res.min_ratio) + " > 1 on the last quarter";
        return res;
    }

    // Ratios tend to 1: integral test on c - e log x - B log log x.
    std::array<double, 3> y{};
    for (int i = 0; i < 3; ++i) y[static_cast<std::size_t>(i)] = log_term(far[static_cast<std::size_t>(i)]);
    if (std::all_of(y.begin(), y.end(), [](double v) { return v == -kInf; })) {
        res.converges = true;
        res.evidence = "ratios near 1 but terms vanish far out";
        return res;
    }
    double a[3][4];
    for (int i = 0; i < 3; ++i) {
        double lx = std::log(far[static_cast<std::size_t>(i)]);
        a[i][0] = 1.0;
        a[i][1] = -lx;
        a[i][2] = -std::log(lx);
        a[i][3] = y[static_cast<std::size_t>(i)];
    }
    for (int c = 0; c < 3; ++c) {
        int piv = c;
        for (int r = c + 1; r < 3; ++r)
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        for (int k = 0; k < 4; ++k) std::swap(a[c][k], a[piv][k]);
        for (int r = 0; r < 3; ++r) {
            if (r == c) continue;
            double f = a[r][c] / a[c][c];
            for (int k = 0; k < 4; ++k) a[r][k] -= f * a[c][k];
        }
    }
    double c0 = a[0][3] / a[0][0], e = a[1][3] / a[1][1], B = a[2][3] / a[2][2];
    res.exponent = e;
    res.log_power = B;
    constexpr double band = 0.05;
    std::ostringstream ev;
    ev << "integral test on fitted x^(" << fmt(-e, 4) << ") (log x)^(" << fmt(-B, 4) << "): ";
    const double H = static_cast<double>(horizon), lH = std::log(H);
    if (e > 1.0 + band) {
        res.converges = true;
        res.tail_estimate = std::exp(c0 + (1.0 - e) * lH - B * std::log(lH)) / (e - 1.0);
        ev << "exponent > 1";
    } else if (e >= 1.0 - band && B > 1.0) {
        res.converges = true;
        res.tail_estimate = std::exp(c0 + (1.0 - e) * lH + (1.0 - B) * std::log(lH)) / (B - 1.0);
        ev << "exponent ~ 1 and log power > 1";
    } else {
        res.converges = false;
        res.tail_estimate = kInf;
        ev << (e < 1.0 - band ? "exponent < 1" : "exponent ~ 1 and log power <= 1");
    }
    res.evidence = ev.str();
    return res;
}

XiResult xi_alpha_p(const ThetaModel& theta, double p, double alpha, std::int64_t measured_lag) {
    require_alpha(p, alpha);
    const double w = 0.5 - 1.0 / alpha, e = p / alpha;
    auto term = [&](double j) {
        double ld = theta.log_delta(j);
        return ld == -kInf ? -kInf : w * std::log(j) + e * ld;
    };
    XiResult out;
    out.L = measured_lag;
    const std::int64_t H = std::int64_t{1} << 20;
    out.series = test_series(term, 1, H, {1e6, 1e12, 1e24});
    // j = 0 contributes 0^{1/2 - 1/alpha} = 0.
    if (measured_lag >= 0) {
        double s = 0.0;
        for (std::int64_t j = 1; j <= std::min(measured_lag, H); ++j) s += std::exp(term(static_cast<double>(j)));
        out.measured = s;
    }
    out.finite = out.series.converges;
    if (out.finite) {
        out.value = out.series.partial_sum + out.series.tail_estimate;
        out.extrapolated = out.value - out.measured;
    } else {
        out.value = kInf;
        out.extrapolated = kInf;
    }
    return out;
}

XiResult xi_alpha_p(const DependenceProfile& profile, double alpha) {
    return xi_alpha_p(ThetaModel::from_profile(profile), profile.p, alpha, profile.L);
}

double log_min_theta_plus_linear(const ThetaModel& theta, double p, std::int64_t k, std::int64_t l_scan,
                                 double* argmin) {
    const double log_s = static_cast<double>(k) * kLn3 * (2.0 / p - 1.0);
    const double log_U = static_cast<double>(k) * kLn3;
    auto obj_log = [&](double u) { return logaddexp(theta.log_theta_at_log(u), u + log_s); };
    std::int64_t scan_end = std::max(l_scan, theta.measured_lag() + 1);
    if (log_U < std::log(static_cast<double>(scan_end))) scan_end = static_cast<std::int64_t>(std::llround(std::exp(log_U)));
    double best = theta.log_theta(0.0);
    double best_l = 0.0;
    for (std::int64_t l = 1; l <= scan_end; ++l) {
        double v = logaddexp(theta.log_theta(static_cast<double>(l)), std::log(static_cast<double>(l)) + log_s);
        if (v < best) {
            best = v;
            best_l = static_cast<double>(l);
        }
    }
    double lo = std::log(static_cast<double>(std::max<std::int64_t>(scan_end, 1)));
    if (log_U > lo) {
        // Golden-section search in log l; objective is decreasing-plus-linear, hence unimodal.
        const double g = 0.5 * (std::sqrt(5.0) - 1.0);
        double a = lo, b = log_U;
        double c = b - g * (b - a), d = a + g * (b - a);
        double fc = obj_log(c), fd = obj_log(d);
        for (int it = 0; it < 200 && b - a > 1e-12 * std::max(1.0, b); ++it) {
            if (fc < fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = obj_log(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = obj_log(d);
            }
        }
        double u = 0.5 * (a + b);
        std::vector<double> cand{u, log_U};
        if (u < kLog2p53) {
            double l = std::exp(u);
            cand = {std::log(std::max(1.0, std::floor(l))), std::log(std::ceil(l)), log_U};
        }
        for (double uc : cand) {
            double v = obj_log(uc);
            if (v < best) {
                best = v;
                best_l = std::exp(uc);
            }
        }
    }
    if (argmin) *argmin = best_l;
    return best;
}

ConditionReport check_theorem_conditions(const ThetaModel& theta, double alpha, const MkSchedule& schedule, double p,
                                         const ConditionOptions& opt) {
    if (!(p > 2.0)) throw std::invalid_argument("check_theorem_conditions: p must exceed 2");
    require_alpha(p, alpha);
    ConditionReport rep;
    rep.p = p;
    rep.alpha = alpha;
    rep.schedule_id = schedule.id();
    rep.theta_description = theta.describe();
    rep.measured_lag = theta.measured_lag();

    auto xi = xi_alpha_p(theta, p, alpha, theta.measured_lag());
    rep.xi = xi.value;
    {
        ConditionCheck c;
        c.label = "xi_finite";
        c.pass = xi.finite;
        c.partial_sum = xi.series.partial_sum;
        c.truncation = xi.series.truncation;
        std::ostringstream ev;
        ev << "Xi partial sum over j <= " << c.truncation << " = " << fmt(c.partial_sum);
        if (xi.finite) ev << ", tail estimate " << fmt(xi.series.tail_estimate);
        if (rep.measured_lag >= 0) ev << ", measured part (j <= " << rep.measured_lag << ") " << fmt(xi.measured);
        ev << "; " << xi.series.evidence;
        c.evidence = ev.str();
        rep.checks.push_back(c);
    }

    const double ln3 = kLn3;
    auto term_mk = [&](double k) {
        auto kk = static_cast<std::int64_t>(k);
        return k * ln3 * (1.0 - alpha / p) + (alpha / 2.0 - 1.0) * schedule.log_value(kk);
    };
    auto term_theta = [&](double k) {
        auto kk = static_cast<std::int64_t>(k);
        double lt = theta.log_theta_at_log(schedule.log_value(kk));
        return lt == -kInf ? -kInf : k * ln3 * (p / 2.0 - 1.0) + p * lt;
    };
    const double K = static_cast<double>(opt.k_series);
    const std::array<double, 3> far{K / 16.0, K / 4.0, K};
    for (int which = 0; which < 2; ++which) {
        auto s = test_series(which == 0 ? std::function<double(double)>(term_mk) : std::function<double(double)>(term_theta),
                             1, opt.k_series, far);
        ConditionCheck c;
        c.label = which == 0 ? "mk_series" : "theta_series";
        c.pass = s.converges;
        c.partial_sum = s.partial_sum;
        c.truncation = s.truncation;
        c.evidence = std::string(which == 0 ? "M_{alpha,p}" : "sum 3^{kp/2} Theta_{m_k}^p / 3^k") +
                     " partial sum over k <= " + std::to_string(s.truncation) + " = " + fmt(s.partial_sum) + "; " +
                     s.evidence;
        rep.checks.push_back(c);
    }

    // Little-o quotient.
    const std::int64_t K7 = opt.k_quotient;
    std::vector<double> lq(static_cast<std::size_t>(K7 + 1), kNaN);
    for (std::int64_t k = 1; k <= K7; ++k) {
        ConditionRow row;
        row.k = k;
        row.log_mk = schedule.log_value(k);
        row.log_theta_mk = theta.log_theta_at_log(row.log_mk);
        row.log_summand_mk = term_mk(static_cast<double>(k));
        row.log_summand_theta = term_theta(static_cast<double>(k));
        row.quotient = kNaN;
        if (k >= 2) {
            double argmin = 0.0;
            double lmin = log_min_theta_plus_linear(theta, p, k, opt.l_scan, &argmin);
            double num = logaddexp(row.log_theta_mk, lmin);
            double den = static_cast<double>(k) * ln3 * (1.0 / p - 0.5) - 0.5 * std::log(std::log(static_cast<double>(k)));
            lq[static_cast<std::size_t>(k)] = num - den;
            row.quotient = std::exp(num - den);
            row.argmin_l = argmin;
        }
        rep.rows.push_back(row);
    }
    {
        ConditionCheck c;
        c.label = "little_o";
        c.truncation = K7;
        bool all_zero = true;
        for (std::int64_t k = 2; k <= K7; ++k)
            if (lq[static_cast<std::size_t>(k)] != -kInf) all_zero = false;
        if (all_zero) {
            c.pass = true;
            rep.k0 = 2;
            c.evidence = "quotient identically 0";
        } else {
            std::int64_t k0 = K7;
            while (k0 > 2 && lq[static_cast<std::size_t>(k0 - 1)] > lq[static_cast<std::size_t>(k0)]) --k0;
            rep.k0 = k0;
            double first = lq[static_cast<std::size_t>(k0)], last = lq[static_cast<std::size_t>(K7)];
            bool early = k0 <= 3 * K7 / 4;
            bool halved = last < first + std::log(0.5);
            c.pass = early && halved;
            c.partial_sum = std::exp(last);
            std::ostringstream ev;
            ev << "quotient strictly decreasing on k in [" << k0 << ", " << K7 << "]";
            ev << ", q(k0) = " << fmt(std::exp(first)) << ", q(" << K7 << ") = " << fmt(std::exp(last));
            if (!early) ev << "; fails: decreasing run starts after 3K/4 = " << 3 * K7 / 4;
            if (!halved) ev << "; fails: last value not below half of q(k0)";
            c.evidence = ev.str();
        }
        rep.checks.push_back(c);
    }
    return rep;
}

ConditionReport check_theorem_conditions(const DependenceProfile& profile, double alpha, const MkSchedule& schedule,
                                         const ConditionOptions& opt) {
    return check_theorem_conditions(ThetaModel::from_profile(profile), alpha, schedule, profile.p, opt);
}

bool ConditionReport::all_pass() const {
    return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const ConditionCheck& c) { return c.pass; });
}

std::string ConditionReport::text() const {
    std::ostringstream os;
    os << "Summability conditions\n";
    os << "  p = " << p << ", alpha = " << alpha << "\n";
    os << "  schedule: " << schedule_id << "\n";
    os << "  Theta: " << theta_description << "\n";
    if (measured_lag >= 0)
        os << "  lags 0.." << measured_lag << " measured, beyond extrapolated\n";
    os << "  Xi_{alpha,p} = " << (std::isfinite(xi) ? fmt(xi) : std::string("inf")) << "\n";
    for (const auto& c : checks) os << "  " << c.label << " " << (c.pass ? "PASS" : "FAIL") << ": " << c.evidence << "\n";
    os << "  overall: " << (all_pass() ? "PASS" : "FAIL") << "\n";
    os << "  Finite-horizon evidence only: convergence and little-o are judged on the computed range.\n";
    return os.str();
}

void ConditionReport::write_csv(std::ostream& os) const {
    os << "k,log_m_k,log_theta_m_k,log_summand_mk,log_summand_theta,little_o_quotient,argmin_l\n";
    os << std::setprecision(17);
    for (const auto& r : rows) {
        os << r.k << ',' << r.log_mk << ',' << r.log_theta_mk << ',' << r.log_summand_mk << ',' << r.log_summand_theta
           << ',';
        if (!std::isnan(r.quotient)) os << r.quotient;
        os << ',' << r.argmin_l << '\n';
    }
}

}  // namespace kmtdep
