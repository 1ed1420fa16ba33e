#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kmtdep/conditions.hpp"
#include "kmtdep/depmeasure.hpp"
#include "kmtdep/gaussian_coupling.hpp"
#include "kmtdep/pipeline.hpp"
#include "kmtdep/processes.hpp"

namespace kmtdep {

/// Malformed configuration; key() names the offending entry as "section.key".
class ConfigError : public std::runtime_error {
  public:
    ConfigError(std::string key, const std::string& what)
        : std::runtime_error("config key '" + key + "': " + what), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

  private:
    std::string key_;
};

struct ProcessConfig {
    std::string kind = "ar1";  // iid, ma1, ar1, ar1_irf, linear, tar, arch1, volterra,
                               // doubling_identity, doubling_haar_mother, doubling_haar
    std::string law = "standard_normal";
    double law_param = 0.0;
    double rho = 0.5;
    double theta = 0.5;
    std::vector<double> coefficients{1.0, 0.5};
    double a_pos = 0.6, a_neg = -0.4;
    double omega = 1.0, a = 0.3;
    std::int64_t burn_in = 0;
    std::string kernel_csv;  // volterra: rows "lag_1, ..., lag_k, value"
    std::string haar_csv;    // doubling_haar: rows "i, j, value"
    int bit_depth = 53;
};

struct ExperimentConfig {
    ProcessConfig process;
    double p = 3.0;
    /// Unset: the named case's default, p + 1 for constant and explicit schedules.
    std::optional<double> alpha;
    std::vector<std::int64_t> n_grid{729, 2187, 6561, 19683, 59049};
    int replications = 50;
    std::uint64_t seed = 1;
    std::string out = "out";
    int workers = 0;

    std::string schedule = "iii";
    std::int64_t schedule_m = 1;
    std::vector<std::int64_t> schedule_values;
    std::string log_base = "natural";

    std::string profile_source = "estimate";  // estimate | analytic
    std::int64_t dep_replications = 100'000;
    std::int64_t dep_lag_budget = 512;

    std::string theta_model = "profile";  // profile | geometric | power_log | constant
    double theta_c = 1.0, theta_rho = 0.5, theta_tau = 1.0, theta_A = 2.0;

    int inner_reps = 256;
    std::int64_t centering_draws = 1'000'000;
    std::int64_t block_law_samples = 10'000;
    std::int64_t variance_sim_length = 1'000'000;
    std::int64_t sigma2_path = 1 << 20;

    std::string truncation_law = "standard_normal";
    double truncation_law_param = 0.0;
    int truncation_horizon = 60;

    std::int64_t clt_n = 19683;
    int clt_replications = 2000;
    bool clt_enabled = true;
};

/// Parses "3^6..3^10", "729, 2187", "3^6, 3^8"; result strictly increasing, each >= 2.
std::vector<std::int64_t> parse_n_grid(const std::string& text);
std::string format_n_grid(const std::vector<std::int64_t>& grid);

/// INI file (`key = value`, `[section]`); unknown keys and bad values throw ConfigError.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(std::istream& in);
/// Every setting, defaults included, in the same format load_config reads.
void write_config(const ExperimentConfig& cfg, std::ostream& os);
void validate(const ExperimentConfig& cfg);

CausalProcess build_process(const ProcessConfig& pc);
MkSchedule build_schedule(const ExperimentConfig& cfg);

/// Named processes used by the cross-checks.
std::vector<CausalProcess> zoo();

/// RFC-4180 field quoting.
std::string csv_field(const std::string& s);
/// Shortest round-trip decimal; "nan", "inf", "-inf" for non-finite values.
std::string csv_number(double x);

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    std::vector<std::int64_t> n;
    std::vector<double> median, q25, q75;
    std::string note;
};

/// Least squares of log median on log n over >= 4 points. Any nonpositive
/// median gives slope -inf with a note.
RateFit fit_rate(const std::vector<std::pair<std::int64_t, double>>& medians);
/// Medians and quartiles per n, then fit_rate.
RateFit fit_rate_samples(const std::vector<std::int64_t>& n, const std::vector<std::vector<double>>& samples);
void write_rate_csv(const RateFit& fit, std::ostream& os);

enum class SeriesVerdict { converges, diverges, inconclusive };
std::string verdict_name(SeriesVerdict v);

struct TruncMomentReport {
    std::string law;
    double p = 0.0, alpha = 0.0;
    int horizon = 0;
    std::vector<double> tail_terms;    // 3^i P(|X| >= 3^{i/p})
    std::vector<double> moment_terms;  // 3^i E min(|X/3^{i/p}|^alpha, |X/3^{i/p}|^2)
    double tail_sum = 0.0, moment_sum = 0.0;
    SeriesVerdict tail_verdict = SeriesVerdict::inconclusive;
    SeriesVerdict moment_verdict = SeriesVerdict::inconclusive;
    int tail_decay_from = -1;    // first i after which summand ratios stay < 1 and nonincreasing
    int moment_decay_from = -1;
    double moment_p = 0.0;       // E|X|^p, +inf when infinite
    double tail_ratio = 0.0;     // tail_sum / E|X|^p
    double moment_ratio = 0.0;
    bool finite_moment = true;
    std::string text() const;
    void write_csv(std::ostream& os) const;
};

/// Partial sums i = 0..horizon of the two truncated-moment series, with ratio
/// evidence. Rejects alpha <= p or p <= 2.
TruncMomentReport lemma_truncmoment_check(const InnovationLaw& law, double p, double alpha, int horizon);

struct CltResult {
    std::string process;
    std::int64_t n = 0;
    int replications = 0;
    double sigma2 = 0.0;
    bool sigma2_analytic = false;
    double mean = 0.0;  // subtracted per index
    double ks = 0.0;
    double critical = 0.0;  // 1% level
    bool pass = false;
};

/// KS distance of (S_n - n mean) / sqrt(n sigma^2) from N(0, 1).
CltResult clt_check(const CausalProcess& proc, std::int64_t n, int replications, const Seed& seed, int workers = 0);

struct SipRow {
    std::uint64_t replication = 0;
    std::int64_t n = 0;
    double D = 0.0, D_prime = 0.0, D_sip = 0.0, law_error = 0.0, grid_error = 0.0;
};

struct SipExperiment {
    VarianceModel variance;
    TriadicLayout top_layout;
    PhiGap phi_gap;
    LinearizeResult linearization;
    std::vector<std::string> block_laws;  // index k, description
    std::vector<SipRow> rows;             // sorted by (replication, n)
    RateFit rate_D, rate_D_prime, rate_D_sip;
    std::vector<double> median_D_over_root;  // median D_n / n^{1/p} per grid point
    CoupledPaths first_paths;                // replication 0
    bool sigma_zero = false;

    void write_rows_csv(std::ostream& os) const;
    void write_variance_csv(std::ostream& os) const;
    std::string text(double p) const;
};

SipExperiment run_sip_experiment(const ExperimentConfig& cfg);

/// Profile per the config: analytic (closed-form delta) or estimated.
DependenceProfile build_profile(const ExperimentConfig& cfg, const CausalProcess& proc);
/// Theta model per the config (`profile` uses build_profile).
ThetaModel build_theta(const ExperimentConfig& cfg, const CausalProcess& proc,
                       std::optional<DependenceProfile>* profile_out = nullptr);
ConditionReport run_check_conditions(const ExperimentConfig& cfg);

void write_profile_csv(const DependenceProfile& profile, std::ostream& os);

/// Exit codes shared by the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitConditions = 2;

/// CLI subcommands; each writes into cfg.out and returns an exit code.
int cmd_simulate(const ExperimentConfig& cfg, std::ostream& log);
int cmd_depmeasure(const ExperimentConfig& cfg, std::ostream& log);
int cmd_check_conditions(const ExperimentConfig& cfg, std::ostream& log);
int cmd_sip_experiment(const ExperimentConfig& cfg, std::ostream& log);
int cmd_report(const ExperimentConfig& cfg, std::ostream& log);

}  // namespace kmtdep
