#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "kmtdep/depmeasure.hpp"

namespace kmtdep {

/// (p^2 - 4 + (p - 2) sqrt(p^2 + 20p + 4)) / (8p). Rejects p < 2.
double tau_p(double p);
/// LHS - RHS of (tau - (1/2 - 1/p)) / (tau/p - 1/4 + 1/(2p)) = (2/3)(1 + p + p tau).
double tau_residual(double p, double tau);

enum class ScheduleCase { i, ii, iii, constant, explicit_values };
enum class LogBase { natural, base2, base10 };

ScheduleCase parse_schedule_case(const std::string& s);
LogBase parse_log_base(const std::string& s);

/// m_k generator. k = 1 (and anything the formula leaves undefined) maps to 1.
class MkSchedule {
  public:
    static MkSchedule named(ScheduleCase c, double p, std::optional<double> alpha = std::nullopt,
                                LogBase base = LogBase::natural);
    static MkSchedule constant(std::int64_t m, double p, double alpha);
    static MkSchedule explicit_values(std::vector<std::int64_t> m, double p, double alpha);

    ScheduleCase kind() const { return kind_; }
    double p() const { return p_; }
    double alpha() const { return alpha_; }
    LogBase log_base() const { return base_; }

    /// m_k clamped to >= 1; throws when it does not fit in int64.
    std::int64_t operator()(std::int64_t k) const;
    /// log m_k, valid for any k.
    double log_value(std::int64_t k) const;
    std::string id() const;

  private:
    double log_raw(std::int64_t k) const;
    double log_of(double x) const;
    ScheduleCase kind_ = ScheduleCase::constant;
    double p_ = 0.0;
    double alpha_ = 0.0;
    LogBase base_ = LogBase::natural;
    std::int64_t m_ = 1;
    std::vector<std::int64_t> values_;
};

/// Single schedule value; rejects k < 2 and inadmissible (case, p, alpha).
std::int64_t mk_schedule(ScheduleCase c, double p, double alpha, std::int64_t k, LogBase base = LogBase::natural);

/// Theta_{m,p} as a function of real m, in log space.
class ThetaModel {
  public:
    enum class Family { geometric, power_log, constant, profile };

    /// Theta_m = c rho^m.
    static ThetaModel geometric(double c, double rho);
    /// Theta_m = c m^{-tau} (log m)^{-A}, with m clamped below at 3.
    static ThetaModel power_log(double c, double tau, double A);
    /// Theta_m = c, delta identically 0.
    static ThetaModel constant(double c);
    static ThetaModel from_profile(DependenceProfile profile);

    Family family() const { return family_; }
    double log_theta(double m) const;
    double log_theta_at_log(double log_m) const;
    double log_delta(double j) const;
    /// Largest lag whose Theta is measured rather than extrapolated; -1 for analytic models.
    std::int64_t measured_lag() const;
    std::string describe() const;

  private:
    Family family_ = Family::constant;
    double c_ = 0.0, rho_ = 0.0, tau_ = 0.0, A_ = 0.0;
    std::optional<DependenceProfile> profile_;
};

struct SeriesResult {
    bool converges = false;
    double partial_sum = 0.0;   // sum of the first `truncation` terms
    double tail_estimate = 0.0; // beyond truncation, when convergent
    std::int64_t truncation = 0;
    double max_ratio = 0.0;     // over the last quarter
    double min_ratio = 0.0;
    std::optional<double> exponent;   // e in term ~ x^{-e} (log x)^{-B}
    std::optional<double> log_power;  // B
    std::string evidence;
};

/// Convergence evidence for sum_{x >= start} exp(log_term(x)). Ratio test on the
/// last quarter of [start, horizon]; when inconclusive, fits c - e log x - B log log x
/// at `far` and applies the integral test.
SeriesResult test_series(const std::function<double(double)>& log_term, std::int64_t start, std::int64_t horizon,
                         const std::array<double, 3>& far);

struct XiResult {
    double value = 0.0;  // +inf when the series diverges
    double measured = 0.0;
    double extrapolated = 0.0;
    std::int64_t L = 0;
    bool finite = true;
    SeriesResult series;
};

/// Xi_{alpha,p} = sum_j |j|^{1/2 - 1/alpha} delta_{j,p}^{p/alpha}.
XiResult xi_alpha_p(const DependenceProfile& profile, double alpha);
XiResult xi_alpha_p(const ThetaModel& theta, double p, double alpha, std::int64_t measured_lag = -1);

struct ConditionCheck {
    std::string label;
    bool pass = false;
    double partial_sum = 0.0;
    std::int64_t truncation = 0;
    std::string evidence;
};

struct ConditionRow {
    std::int64_t k = 0;
    double log_mk = 0.0;
    double log_theta_mk = 0.0;
    double log_summand_mk = 0.0;     // M_{alpha,p} summand
    double log_summand_theta = 0.0;  // 3^{kp/2} Theta^p / 3^k
    double quotient = 0.0;           // little-o quotient, NaN past its horizon
    double argmin_l = 0.0;
};

struct ConditionReport {
    double p = 0.0;
    double alpha = 0.0;
    double xi = 0.0;
    std::string schedule_id;
    std::string theta_description;
    std::int64_t measured_lag = -1;
    std::int64_t k0 = 0;
    std::vector<ConditionCheck> checks;  // xi_finite, mk_series, theta_series, little_o
    std::vector<ConditionRow> rows;
    bool all_pass() const;
    std::string text() const;
    void write_csv(std::ostream& os) const;
};

struct ConditionOptions {
    std::int64_t k_series = 4096;   // horizon for the two k-series
    std::int64_t k_quotient = 256;  // horizon for the little-o quotient
    std::int64_t j_series = std::int64_t{1} << 20;
    std::int64_t l_scan = 4096;     // exact scan of the min over l for analytic models
};

ConditionReport check_theorem_conditions(const ThetaModel& theta, double alpha, const MkSchedule& schedule, double p,
                                         const ConditionOptions& opt = {});
ConditionReport check_theorem_conditions(const DependenceProfile& profile, double alpha, const MkSchedule& schedule,
                                         const ConditionOptions& opt = {});

/// log of min_{0 <= l <= 3^k} (Theta_l + l 3^{k(2/p - 1)}); argmin returned in `argmin`.
double log_min_theta_plus_linear(const ThetaModel& theta, double p, std::int64_t k, std::int64_t l_scan,
                                 double* argmin = nullptr);

}  // namespace kmtdep
