#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "kmtdep/innovations.hpp"

namespace kmtdep {

/// X_i = sum_{j <= J} a_j eps_{i-j}.
struct LinearSpec {
    std::vector<double> coefficients;
};

/// X_i = G(X_{i-1}, eps_i).
struct IRFSpec {
    std::function<double(double x, double eps)> map;
    /// l_p as a function of p; empty when unknown.
    std::function<double(double p)> contraction;
    std::int64_t burn_in = 0;
};

struct VolterraTerm {
    std::vector<std::int64_t> lags;  // strictly increasing, lags[0] >= 0
    double value = 0.0;
};

/// X_n = sum over terms of g(j_1..j_k) eps_{n-j_1} ... eps_{n-j_k}.
struct VolterraSpec {
    std::vector<VolterraTerm> terms;
    int max_order() const;
    std::int64_t max_lag() const;
};

/// Haar coefficients, levels[i][j-1] = c_{i,j} for j = 1..2^i. Basis function
/// (i, j) is supported on [(j-1)/2^i, j/2^i).
struct HaarExpansion {
    std::vector<std::vector<double>> levels;
    double evaluate(double u) const;
    /// Evaluates from the top bits of a bit_depth-bit dyadic numerator.
    double evaluate_bits(std::uint64_t w, int bit_depth) const;
};

/// X_i = g(U_i), U_i = sum_{l >= 0} eps_{i-l} / 2^{l+1}, eps Bernoulli(1/2).
struct DoublingMapSpec {
    std::function<double(double)> g;
    std::optional<double> lipschitz;
    std::optional<HaarExpansion> haar;
    int bit_depth = 53;
};

struct ProcessOracles {
    std::function<double(std::int64_t j, double p)> delta;
    std::function<double(std::int64_t h)> autocov;
    /// ||E(X_i|G_0) - E(X_i|G_{-1})||_2.
    std::function<double(std::int64_t i)> predictive;
    std::optional<double> sigma2;
    std::optional<double> second_moment;
    bool symmetric = false;
};

class CausalProcess {
  public:
    using Spec = std::variant<LinearSpec, IRFSpec, VolterraSpec, DoublingMapSpec>;

    CausalProcess(std::string name, InnovationLaw law, Spec spec, ProcessOracles oracles = {});

    const std::string& name() const { return name_; }
    const InnovationLaw& law() const { return law_; }
    const Spec& spec() const { return spec_; }
    const ProcessOracles& oracles() const { return oracles_; }

    /// Largest lag that can influence X_i; -1 for infinite memory.
    std::int64_t memory() const;
    /// Smallest admissible lag budget.
    std::int64_t min_lag() const;
    /// Upper bound on ||X_i - X_i^{(L)}||_2.
    double tail_bound(std::int64_t L) const;

    /// X_t from eps_{t-L..t} of `w` (innovations older than t-L treated as absent).
    double evaluate(const InnovationWindow& w, std::int64_t t, std::int64_t L) const;
    /// X_t for t in [t0, t1], evaluated over the whole panel. Bounded-memory
    /// processes use exactly their memory; recursive ones start at panel.first().
    std::vector<double> evaluate_range(const InnovationWindow& panel, std::int64_t t0, std::int64_t t1) const;

    std::optional<double> delta_oracle(std::int64_t j, double p) const;
    std::optional<double> autocov_oracle(std::int64_t h) const;
    std::optional<double> sigma2_oracle() const;
    std::optional<double> contraction(double p) const;
    std::optional<double> second_moment() const;
    bool symmetric() const { return oracles_.symmetric; }
    /// Finite linear process with standard normal innovations.
    bool linear_gaussian() const;
    const std::vector<double>* linear_coefficients() const;

  private:
    std::string name_;
    InnovationLaw law_;
    Spec spec_;
    ProcessOracles oracles_;
};

/// Stationary path X_1..X_n from a single panel eps_{1-L..n}.
std::vector<double> evaluate_path(const CausalProcess& proc, const Seed& seed, std::int64_t n, std::int64_t L);
InnovationWindow draw_panel(const CausalProcess& proc, const Seed& seed, std::int64_t n, std::int64_t L);
void check_lag_budget(const CausalProcess& proc, std::int64_t L);

// Factories.
CausalProcess make_linear(std::vector<double> coefficients, InnovationLaw law = InnovationLaw::standard_normal(),
                          std::string name = "linear");
CausalProcess make_iid(InnovationLaw law = InnovationLaw::standard_normal());
CausalProcess make_ma1(double theta, InnovationLaw law = InnovationLaw::standard_normal());
/// AR(1) as a finite linear process, truncated where the coefficient tail is below tol.
CausalProcess make_ar1_linear(double rho, InnovationLaw law = InnovationLaw::standard_normal(), double tol = 1e-15);
CausalProcess make_ar1_irf(double rho, InnovationLaw law = InnovationLaw::standard_normal(),
                           std::int64_t burn_in = 0);
/// Threshold AR: x -> a_pos max(x, 0) + a_neg min(x, 0) + eps.
CausalProcess make_tar(double a_pos, double a_neg, InnovationLaw law = InnovationLaw::standard_normal(),
                       std::int64_t burn_in = 0);
/// ARCH(1): x -> sqrt(omega + a x^2) eps.
CausalProcess make_arch1(double omega, double a, InnovationLaw law = InnovationLaw::standard_normal(),
                         std::int64_t burn_in = 0);
CausalProcess make_volterra(VolterraSpec spec, InnovationLaw law = InnovationLaw::standard_normal(),
                            std::string name = "volterra");
CausalProcess make_doubling(std::function<double(double)> g, std::optional<double> lipschitz, int bit_depth = 53,
                            std::string name = "doubling");
CausalProcess make_doubling_haar(HaarExpansion haar, int bit_depth = 53, std::string name = "doubling_haar");
/// g(u) = u - 1/2.
CausalProcess make_doubling_identity(int bit_depth = 53);
/// g = Haar mother wavelet.
CausalProcess make_doubling_haar_mother(int bit_depth = 53);

/// Default burn-in ceil(60 / |log l_p|).
std::int64_t default_burn_in(double contraction);

double volterra_Qnk(const VolterraSpec& spec, std::int64_t n, int k);
/// c_p sum_k ||eps||_p^{2k} Q_{n,k}; bounds delta_{n,p}^2. Rejects odd p.
double volterra_delta_bound(const VolterraSpec& spec, const InnovationLaw& law, std::int64_t n, double p,
                            std::optional<double> c_p = std::nullopt);
double volterra_default_cp(double p);

struct DoublingDelta {
    /// Cell-indexed sum as printed, cells whose argument leaves [0, 1) skipped.
    double printed = 0.0;
    /// Flip of bit i: (1/2) 2^{-i} sum over the 2^i prefixes.
    double bit_flip = 0.0;
    int skipped_cells = 0;
};
/// Both readings of delta_{i,p}^p for the doubling map.
DoublingDelta doubling_delta_formula(const DoublingMapSpec& spec, int i, double p, int panels_per_cell = 64);
/// 2^{i(p/2-1)} sum_j |c_{i,j}|^p.
double haar_delta_bound(const DoublingMapSpec& spec, int i, double p);
/// int_0^1 g, by the same quadrature.
double doubling_mean(const DoublingMapSpec& spec, int panels = 4096);

struct ContractionCertificate {
    double declared = 0.0;
    double estimated_sup = 0.0;
    bool holds = false;
};
/// Monte Carlo sup over random (x, x') pairs of ||G(x, eps) - G(x', eps)||_p / |x - x'|.
ContractionCertificate contraction_certificate(const CausalProcess& proc, double p, int pairs, int reps,
                                               const Seed& seed);

}  // namespace kmtdep
