#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "kmtdep/conditions.hpp"
#include "kmtdep/processes.hpp"
#include "kmtdep/stats.hpp"

namespace kmtdep {

/// T_a(w) = max(min(w, a), -a).
double truncate(double w, double a);

/// 3^k as an integer; throws past int64.
std::int64_t pow3(int k);

/// Block (k, j): X-tilde indices [start, end), joins S-diamond at count_time.
struct BlockWindow {
    int k = 0;
    std::int64_t j = 0;
    std::int64_t start = 0;
    std::int64_t end = 0;
    std::int64_t count_time = 0;
};

struct TriadicLayout {
    std::int64_t n = 0;
    int h = 0;                     // 3^{h-1} < n <= 3^h
    std::vector<std::int64_t> m;   // m[k], k = 0..h (m[0] unused)
    std::vector<std::int64_t> q;   // q[k] = floor(2 * 3^{k-2} / m_k) - 2
    int K0 = 0;
    std::int64_t N0 = 0;
    std::int64_t tau = 0;

    /// Number of blocks of scale k that are in S-diamond at time i (k <= h_i).
    std::int64_t blocks_in(int k) const;
    /// Every block window for k = K0..h, j = 1..q_k (top scale included even past n).
    std::vector<BlockWindow> windows() const;
};

/// Smallest h with 3^h >= n.
int scale_of(std::int64_t n);
/// floor((n - 3^{h-1}) / (3 m_h)) - 2 for h = h_n.
std::int64_t tau_of(std::int64_t n, std::int64_t m_h);

/// Rejects n < 2. K0 is the smallest k with q_j >= 2 for all k <= j <= 38.
TriadicLayout layout(std::int64_t n, const MkSchedule& schedule);

enum class XtildeEngine {
    exact,            // m_k covers the whole memory
    gaussian_oracle,  // finite linear, normal innovations
    linear_pool,      // finite linear, pooled sums of older innovations
    markov_pool,      // iterated map, pooled stationary states
    generic_pool,     // redraw older innovations in full windows
};
std::string engine_name(XtildeEngine e);

struct ScaleInfo {
    int k = 0;
    std::int64_t m = 0;
    double level = 0.0;      // 3^{k/p}
    double centering = 0.0;  // E T_level(X)
    XtildeEngine engine = XtildeEngine::exact;
};

struct PipelineOptions {
    int inner_reps = 256;
    std::size_t centering_draws = 1'000'000;
    int workers = 0;
};

/// Per-experiment precomputation shared by every replication: truncation
/// levels, centering constants, inner pools.
class PipelineContext {
  public:
    PipelineContext(CausalProcess proc, MkSchedule schedule, double p, std::int64_t n_max, const Seed& seed,
                    PipelineOptions opt = {});

    const CausalProcess& process() const { return proc_; }
    const MkSchedule& schedule() const { return schedule_; }
    double p() const { return p_; }
    std::int64_t n_max() const { return n_max_; }
    const PipelineOptions& options() const { return opt_; }
    const ScaleInfo& scale(int k) const;
    int max_scale() const { return static_cast<int>(scales_.size()) - 1; }
    /// Lags a panel needs before index 1.
    std::int64_t panel_lags() const;

    /// X-tilde_{k,i} for i in [i0, i1]; the panel must cover i0 - panel_lags().
    /// inner_se receives the per-index Monte Carlo SE (0 for exact engines).
    std::vector<double> xtilde(int k, const InnovationWindow& panel, std::int64_t i0, std::int64_t i1,
                               std::vector<double>* inner_se = nullptr) const;

  private:
    void build_pools(const Seed& seed);
    double centering_for(double level) const;

    CausalProcess proc_;
    MkSchedule schedule_;
    double p_;
    std::int64_t n_max_;
    PipelineOptions opt_;
    std::vector<ScaleInfo> scales_;  // index k
    std::vector<std::vector<double>> linear_old_;  // [k][r]: sum of a_l * eps over l > m_k
    std::vector<double> markov_states_;
    std::vector<std::vector<double>> generic_old_;  // [r][lag], lags 0..memory
    std::vector<double> stationary_pool_;
};

InnovationWindow draw_pipeline_panel(const PipelineContext& ctx, const Seed& seed, std::int64_t n);

struct Block {
    BlockWindow window;
    double value = 0.0;
    ExactSum sum;
    double truncated_value = 0.0;  // sum of T(X) - E T(X) over the same window
};

struct BlockDecomposition {
    TriadicLayout layout;
    double p = 0.0;
    std::vector<ScaleInfo> scales;  // index k = 0..h
    std::vector<double> X;          // X[i], i = 1..n (X[0] unused)
    std::vector<double> xtilde;     // X-tilde_{h_i, i}
    std::vector<double> xdag;       // T_{3^{h_i/p}}(X_i) - E T(X)
    std::vector<double> S, S_dag, S_tilde, S_diamond;  // index 0..n, value 0 at 0
    std::vector<Block> blocks;      // those in S-diamond at n
    double mean_inner_se = 0.0;
    double path_sd = 0.0;
    bool inner_reps_too_small = false;

    /// Sum of the stored block sums in S-diamond at time i (exact).
    double diamond_from_blocks(std::int64_t i) const;
    /// Sum of X-tilde over the union of those block windows (exact).
    double diamond_from_xtilde(std::int64_t i) const;
    void write_blocks_csv(std::ostream& os) const;
    void write_paths_csv(std::ostream& os) const;
};

BlockDecomposition decompose(const PipelineContext& ctx, const InnovationWindow& panel, std::int64_t n);
BlockDecomposition decompose(const PipelineContext& ctx, const Seed& seed, std::int64_t n);

struct WindowAudit {
    bool disjoint = true;           // no two block windows share an index
    bool inside_scale = true;       // windows stay inside (3^{k-1}, 3^k]
    bool cross_scale_support = true;  // innovation supports of B_{k,q_k} and B_{k+1,1} are disjoint
    bool gap_support = true;          // supports of B_{k,j} and B_{k,j+2} are disjoint
    std::vector<std::string> problems;
    bool ok() const { return disjoint && inside_scale && cross_scale_support && gap_support; }
};
WindowAudit audit_windows(const TriadicLayout& layout);

struct CorrelationRow {
    int k = 0;
    std::int64_t pairs = 0;
    double pooled_adjacent = 0.0;    // mean over j of corr(B_{k,j}, B_{k,j+1}); shares a boundary, reported only
    double pooled_gap = 0.0;         // mean over j of corr(B_{k,j}, B_{k,j+2})
    double pooled_gap_truncated = 0.0;  // same pairs, sums of the truncated process itself
    double max_abs_gap = 0.0;
    double cross_scale = 0.0;        // corr(B_{k,q_k}, B_{k+1,1}); NaN if absent
    double cross_scale_truncated = 0.0;
    bool within = true;
};

struct IndependenceAudit {
    std::size_t replications = 0;
    double band = 0.0;  // 3 / sqrt(replications)
    WindowAudit windows;
    std::vector<CorrelationRow> rows;
    double max_pooled_abs = 0.0;
    bool correlations_within = true;
    bool ok() const { return windows.ok() && correlations_within; }
    std::string text() const;
};

/// Correlations across replications sharing one layout, between blocks the
/// construction makes independent: (k, j) vs (k, j + 2) and (k, q_k) vs (k + 1, 1).
/// Checked on the m-dependent block sums and on the truncated process over the
/// same windows; the second exposes an m_k too short for the dependence.
/// Throws std::logic_error when windows overlap.
IndependenceAudit block_independence_audit(const std::vector<BlockDecomposition>& reps);

}  // namespace kmtdep
