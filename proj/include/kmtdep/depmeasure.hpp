#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kmtdep/processes.hpp"

namespace kmtdep {

struct DeltaEstimate {
    std::int64_t j = 0;
    double delta = 0.0;
    double se = 0.0;
    std::size_t n_reps = 0;
    bool beyond_window = false;
};

enum class CouplingMode {
    common_random_numbers,  // coupled copy shares every innovation except eps_0
    independent,            // coupled copy redraws every innovation (variance comparison only)
};

struct DeltaOptions {
    std::size_t replications = 100000;
    std::int64_t lag_budget = 512;
    CouplingMode mode = CouplingMode::common_random_numbers;
    int workers = 0;
};

/// delta_{j,p} = ||X_j - X_{j,{0}}||_p by Monte Carlo, SE by the delta method.
DeltaEstimate estimate_delta(const CausalProcess& proc, std::int64_t j, double p, const Seed& seed,
                             const DeltaOptions& opt = {});

enum class DecayFamily { none, zero, geometric, power_log };

/// log delta_j ~ log_c + slope * j (geometric) or log_c - beta log j - A log log j (power_log).
struct DecayFit {
    DecayFamily family = DecayFamily::none;
    double log_c = 0.0;
    double slope = 0.0;  // geometric: log rho
    double beta = 0.0;   // power_log
    double A = 0.0;      // power_log
    double aicc = 0.0;
    double aicc_other = 0.0;
    std::size_t points = 0;
    std::string describe() const;
};

struct DependenceProfile {
    std::string process;
    double p = 2.0;
    std::int64_t L = 0;
    std::vector<DeltaEstimate> delta;  // j = 0..L
    std::vector<double> theta;         // Theta_m for m = 0..L+1; theta[L+1] is the tail beyond L
    std::vector<double> theta_se;
    double tail = 0.0;
    bool tail_analytic = false;
    std::optional<DecayFit> fit;
    bool long_range = false;
};

/// Estimates delta_{j,p} for j = 0..L from one coupled pair of paths per replication.
DependenceProfile estimate_profile(const CausalProcess& proc, double p, const Seed& seed, const DeltaOptions& opt = {});

/// Profile built from the process's closed-form delta (no sampling error).
DependenceProfile analytic_profile(const CausalProcess& proc, double p, std::int64_t L);

/// Picks geometric or power-log decay for the significant delta values by AICc.
std::optional<DecayFit> fit_decay(const std::vector<DeltaEstimate>& delta, double z_min = 2.0);

/// Theta_{m,p} = sum_{j >= m} delta_j: measured part plus the declared tail.
double theta_tail(const DependenceProfile& profile, std::int64_t m);

/// log Theta_{m,p} for any real m >= 0, continuing past L with the fitted
/// decay shape scaled to the declared tail.
double log_theta_extrapolated(const DependenceProfile& profile, double m);
/// Same, taking log m (for m beyond double range).
double log_theta_extrapolated_log(const DependenceProfile& profile, double log_m);
/// log delta_{j,p}, measured up to L and from the same continuation beyond.
double log_delta_extrapolated(const DependenceProfile& profile, double j);

/// ||E(X_i|G_0) - E(X_i|G_{-1})||_2 for a linear process: |a_i| sigma_eps.
std::optional<double> predictive_measure(const CausalProcess& proc, std::int64_t i);

}  // namespace kmtdep
