#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "kmtdep/depmeasure.hpp"
#include "kmtdep/pipeline.hpp"

namespace kmtdep {

/// Sum_{|i| <= m} gt_i + 2 sum_{i=1}^{m} (1 - i/m) gt_{m+i}; gamma_tilde[i] for i = 0..2m
/// (missing entries count as 0).
double nu_k(const std::vector<double>& gamma_tilde, std::int64_t m);

struct LongRunVariance {
    double value = 0.0;
    double se = 0.0;
    bool analytic = false;
    bool long_range = false;
    std::int64_t bandwidth = 0;
    std::string method;
};

/// sigma^2 = sum_i gamma_i: the process oracle when available, else a flat-top
/// kernel estimate on a simulated path. The bandwidth comes from the profile's
/// Theta decay when one is given, else from the autocorrelation cut-off rule.
LongRunVariance sigma2_longrun(const CausalProcess& proc, const Seed& seed, std::int64_t path_length = 1 << 20,
                               const DependenceProfile* profile = nullptr);

struct VarianceModel {
    double sigma2 = 0.0;
    double sigma2_se = 0.0;
    bool long_range = false;
    std::vector<std::int64_t> m;                   // index k
    std::vector<std::vector<double>> gamma_tilde;  // [k][0..2m_k]
    std::vector<bool> gamma_exact;
    std::vector<double> nu;                        // index k, k = 1..H
    std::vector<double> nu_se;

    /// Model from given nu_k (k = 1..nu.size()-1; nu[0] unused).
    static VarianceModel from_nu(std::vector<double> nu, double sigma2, std::vector<std::int64_t> m = {});

    int max_scale() const { return static_cast<int>(nu.size()) - 1; }
    /// phi_n = sum_{k < h_n} (3^k - 3^{k-1}) nu_k + (n - 3^{h_n - 1}) nu_{h_n}; phi_0 = phi_1 = 0.
    double phi(std::int64_t n) const;
    /// b_i = nu_{h_i}^{1/2} - sigma, i >= 2.
    double b(std::int64_t i) const;
    /// sum_{i=2}^{n} b_i^2.
    double varsigma2(std::int64_t n) const;
};

std::vector<double> phi_path(const VarianceModel& vm, std::int64_t n);

struct VarianceOptions {
    std::int64_t sim_length = 1'000'000;  // X-tilde path length for simulated autocovariances
    int batches = 50;
    std::int64_t sigma2_path = 1 << 20;
    int workers = 0;
};

/// nu_k for k = 1..max scale of the context. Autocovariances are exact for a
/// finite linear process whose truncation is inactive, simulated otherwise.
VarianceModel build_variance_model(const PipelineContext& ctx, const Seed& seed, const VarianceOptions& opt = {},
                                   const DependenceProfile* profile = nullptr);

/// True when T_{level}(X) = X for every attainable X (or up to < 1e-16 probability
/// for normal innovations).
bool truncation_inactive(const CausalProcess& proc, double level);

/// max_{i <= n} |phi_i - sigma_i^2| where sigma_i^2 is the variance of the block sum
/// process, against the one-scale bound 3 max m_k nu_k and the cumulative bound.
struct PhiGap {
    double max_gap = 0.0;
    double one_scale_bound = 0.0;
    double cumulative_bound = 0.0;
};
PhiGap phi_block_variance_gap(const VarianceModel& vm, const TriadicLayout& layout);

struct LinearizeResult {
    double varsigma2 = 0.0;
    bool pass = false;
    int k0 = 0;
    std::vector<double> quotient;  // at n = 3^k, k = 1..h_n (index k)
    std::string evidence;
};

/// varsigma_n^2 and the decreasing-quotient verdict for
/// varsigma_n^2 max(log log n, 1) = o(n^{2/p}) on the grid n = 3^k.
LinearizeResult linearize(const VarianceModel& vm, std::int64_t n, double p);

/// Law of B_{k,j}; discrete laws use a randomized probability integral transform.
class BlockLaw {
  public:
    static BlockLaw gaussian(double variance);
    /// Linear interpolation between order statistics, exponential tails beyond the
    /// extremes. A sample with many ties becomes a discrete law on its atoms.
    static BlockLaw empirical(std::vector<double> sample);
    static BlockLaw discrete(std::vector<double> atoms, std::vector<double> probs);
    /// Law of a single innovation.
    static BlockLaw innovation(const InnovationLaw& law);

    bool is_discrete() const { return kind_ == Kind::discrete || (innovation_ && innovation_->discrete()); }
    bool is_gaussian() const { return kind_ == Kind::gaussian; }
    double variance() const { return variance_; }
    double cdf(double x) const;
    double cdf_left(double x) const;
    double quantile(double u) const;
    /// F(x-) + v (F(x) - F(x-)), v uniform.
    double pit(double x, double v) const;
    std::string describe() const;

  private:
    enum class Kind { gaussian, empirical, discrete, innovation };
    Kind kind_ = Kind::gaussian;
    double variance_ = 0.0;
    double sd_ = 0.0;
    std::vector<double> xs_;   // sorted sample or atoms
    std::vector<double> cum_;  // cumulative probabilities of atoms
    double left_scale_ = 1.0, right_scale_ = 1.0;
    std::optional<InnovationLaw> innovation_;
};

struct BlockLawOptions {
    std::size_t samples = 10'000;
    int workers = 0;
};

/// Block laws per scale (index k; empty for k < K0): exact Gaussian when the
/// process is linear-Gaussian with inactive truncation, exact lattice law for
/// i.i.d. two-point innovations, otherwise empirical from simulated blocks.
std::vector<std::optional<BlockLaw>> build_block_laws(const PipelineContext& ctx, const VarianceModel& vm, int k_min,
                                                      int k_max, const Seed& seed, const BlockLawOptions& opt = {});

/// One simulated B_{k,j}: sum of X-tilde over 3 m_k consecutive indices.
double simulate_block(const PipelineContext& ctx, int k, const Seed& seed);

struct CouplingGridPoint {
    int k = 0;
    std::int64_t j = 0;
    std::int64_t time = 0;
    double uniform = 0.0;
    double block = 0.0;
    double gaussian_increment = 0.0;
    double phi_increment = 0.0;
};

struct CoupledPaths {
    std::int64_t n = 0;
    double sigma = 0.0;
    bool sigma_zero = false;
    std::vector<double> S, S_diamond, G, linear;  // index 0..n; G_i = B(phi_i), linear_i = sigma B''(i)
    std::vector<double> D, D_prime, D_sip;        // prefix maxima of |S_diamond - G|, |S_diamond - linear|, |S - linear|
    std::vector<double> law_error, grid_error;    // prefix maxima on the block grid
    std::vector<CouplingGridPoint> grid;

    void write_csv(std::ostream& os) const;
};

/// Quantile coupling of the block sums with a Brownian motion on the phi clock.
CoupledPaths couple_blocks(const BlockDecomposition& decomp, const VarianceModel& vm,
                           const std::vector<std::optional<BlockLaw>>& laws, const Seed& seed);

}  // namespace kmtdep
