#include "kmtdep/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "kmtdep/parallel.hpp"

namespace kmtdep {

namespace {

constexpr int kMaxScale = 38;

// E T_a(s + sigma Z).
double gaussian_clamp_mean(double s, double sigma, double a) {
    if (!(sigma > 0.0)) return truncate(s, a);
    double lo = (-a - s) / sigma, hi = (a - s) / sigma;
    double p_lo = normal_cdf(lo), p_hi = normal_cdf(-hi);
    double inside = 1.0 - p_lo - p_hi;
    return -a * p_lo + a * p_hi + s * inside + sigma * (normal_pdf(lo) - normal_pdf(hi));
}

}  // namespace

double truncate(double w, double a) { return std::max(std::min(w, a), -a); }

std::int64_t pow3(int k) {
    if (k < 0 || k > 39) throw std::out_of_range("pow3: exponent " + std::to_string(k) + " out of int64 range");
    std::int64_t v = 1;
    for (int i = 0; i < k; ++i) v *= 3;
    return v;
}

int scale_of(std::int64_t n) {
    if (n < 1) throw std::invalid_argument("scale_of: n must be positive");
    int h = 0;
    while (pow3(h) < n) ++h;
    return h;
}

std::int64_t tau_of(std::int64_t n, std::int64_t m_h) {
    int h = scale_of(n);
    // floor division; numerator is positive for n > 3^{h-1}
    return (n - pow3(h - 1)) / (3 * m_h) - 2;
}

std::int64_t TriadicLayout::blocks_in(int k) const {
    if (k < K0 || k > h) return 0;
    if (k < h) return std::max<std::int64_t>(0, q[static_cast<std::size_t>(k)]);
    return std::max<std::int64_t>(0, tau);
}

std::vector<BlockWindow> TriadicLayout::windows() const {
    std::vector<BlockWindow> out;
    for (int k = K0; k <= h; ++k) {
        const std::int64_t mk = m[static_cast<std::size_t>(k)], base = pow3(k - 1);
        for (std::int64_t j = 1; j <= q[static_cast<std::size_t>(k)]; ++j)
            out.push_back({k, j, base + 3 * j * mk + 1, base + 3 * (j + 1) * mk + 1, base + 3 * mk * (j + 2)});
    }
    return out;
}

TriadicLayout layout(std::int64_t n, const MkSchedule& schedule) {
    if (n < 2) throw std::invalid_argument("layout: n = " + std::to_string(n) + " < 2 (S_1 terms are all 0)");
    TriadicLayout L;
    L.n = n;
    L.h = scale_of(n);
    const int top = std::max(L.h, kMaxScale);
    L.m.assign(static_cast<std::size_t>(top + 1), 0);
    L.q.assign(static_cast<std::size_t>(top + 1), -2);
    for (int k = 1; k <= top; ++k) {
        std::int64_t mk = schedule(k);
        L.m[static_cast<std::size_t>(k)] = mk;
        if (k >= 2) L.q[static_cast<std::size_t>(k)] = 2 * pow3(k - 2) / mk - 2;
    }
    L.K0 = -1;
    for (int k = kMaxScale; k >= 1 && L.q[static_cast<std::size_t>(k)] >= 2; --k) L.K0 = k;
    if (L.K0 < 0)
        throw std::invalid_argument("layout: q_k < 2 at k = " + std::to_string(kMaxScale) +
                                    "; the schedule grows too fast for blocking");
    L.N0 = pow3(L.K0);
    L.tau = tau_of(n, L.m[static_cast<std::size_t>(L.h)]);
    L.m.resize(static_cast<std::size_t>(L.h + 1));
    L.q.resize(static_cast<std::size_t>(L.h + 1));
    return L;
}

std::string engine_name(XtildeEngine e) {
    switch (e) {
        case XtildeEngine::exact: return "exact";
        case XtildeEngine::gaussian_oracle: return "gaussian_oracle";
        case XtildeEngine::linear_pool: return "linear_pool";
        case XtildeEngine::markov_pool: return "markov_pool";
        case XtildeEngine::generic_pool: return "generic_pool";
    }
    return "?";
}

PipelineContext::PipelineContext(CausalProcess proc, MkSchedule schedule, double p, std::int64_t n_max,
                                 const Seed& seed, PipelineOptions opt)
    : proc_(std::move(proc)), schedule_(std::move(schedule)), p_(p), n_max_(n_max), opt_(opt) {
    if (!(p > 2.0)) throw std::invalid_argument("PipelineContext: p must exceed 2");
    if (n_max < 2) throw std::invalid_argument("PipelineContext: n_max must be at least 2");
    if (opt_.inner_reps < 1) throw std::invalid_argument("PipelineContext: inner_reps must be >= 1");
    const int H = scale_of(n_max);
    const std::int64_t mem = proc_.memory();
    const bool is_irf = std::holds_alternative<IRFSpec>(proc_.spec());
    scales_.resize(static_cast<std::size_t>(H + 1));
    for (int k = 1; k <= H; ++k) {
        auto& s = scales_[static_cast<std::size_t>(k)];
        s.k = k;
        s.m = schedule_(k);
        s.level = std::pow(3.0, static_cast<double>(k) / p);
        if (mem >= 0 && s.m >= mem) s.engine = XtildeEngine::exact;
        else if (proc_.linear_gaussian()) s.engine = XtildeEngine::gaussian_oracle;
        else if (proc_.linear_coefficients()) s.engine = XtildeEngine::linear_pool;
        else if (is_irf) s.engine = XtildeEngine::markov_pool;
        else s.engine = XtildeEngine::generic_pool;
    }
    build_pools(seed);
    for (int k = 1; k <= H; ++k) {
        auto& s = scales_[static_cast<std::size_t>(k)];
        s.centering = centering_for(s.level);
    }
}

void PipelineContext::build_pools(const Seed& seed) {
    const int R = opt_.inner_reps;
    const auto& law = proc_.law();
    const int H = max_scale();
    bool need_linear = false, need_markov = false, need_generic = false;
    for (int k = 1; k <= H; ++k) {
        auto e = scales_[static_cast<std::size_t>(k)].engine;
        need_linear |= e == XtildeEngine::linear_pool;
        need_markov |= e == XtildeEngine::markov_pool;
        need_generic |= e == XtildeEngine::generic_pool;
    }
    if (need_linear) {
        const auto& a = *proc_.linear_coefficients();
        const auto J = static_cast<std::int64_t>(a.size()) - 1;
        linear_old_.assign(static_cast<std::size_t>(H + 1), {});
        for (int k = 1; k <= H; ++k) {
            const auto& s = scales_[static_cast<std::size_t>(k)];
            if (s.engine != XtildeEngine::linear_pool) continue;
            auto& pool = linear_old_[static_cast<std::size_t>(k)];
            pool.resize(static_cast<std::size_t>(R));
            for (int r = 0; r < R; ++r) {
                CounterRng rng(Seed{seed.master, derive_stream(streams::inner_pool, static_cast<std::uint64_t>(k)),
                                    static_cast<std::uint64_t>(r)});
                double v = 0.0;
                for (std::int64_t l = s.m + 1; l <= J; ++l) v += a[static_cast<std::size_t>(l)] * law.sample(rng, -l);
                pool[static_cast<std::size_t>(r)] = v;
            }
        }
    }
    if (need_markov) {
        const auto& irf = std::get<IRFSpec>(proc_.spec());
        std::int64_t burn = proc_.min_lag() > 0 ? proc_.min_lag() : 1000;
        markov_states_.resize(static_cast<std::size_t>(R));
        for (int r = 0; r < R; ++r) {
            CounterRng rng(Seed{seed.master, derive_stream(streams::inner_pool, 0x4D41524BULL), static_cast<std::uint64_t>(r)});
            double x = 0.0;
            for (std::int64_t t = 0; t <= burn; ++t) x = irf.map(x, law.sample(rng, t));
            markov_states_[static_cast<std::size_t>(r)] = x;
        }
    }
    if (need_generic) {
        const std::int64_t M = proc_.memory();
        generic_old_.assign(static_cast<std::size_t>(R), std::vector<double>(static_cast<std::size_t>(M + 1)));
        for (int r = 0; r < R; ++r) {
            CounterRng rng(Seed{seed.master, derive_stream(streams::inner_pool, 0x47454EULL), static_cast<std::uint64_t>(r)});
            for (std::int64_t l = 0; l <= M; ++l) generic_old_[static_cast<std::size_t>(r)][static_cast<std::size_t>(l)] = law.sample(rng, -l);
        }
    }
    if (!proc_.symmetric() && !proc_.linear_gaussian()) {
        const std::size_t N = opt_.centering_draws;
        const std::int64_t Lc = proc_.memory() >= 0 ? proc_.memory() : std::max<std::int64_t>(proc_.min_lag(), 1);
        stationary_pool_.resize(N);
        parallel_for(N, opt_.workers, [&](std::size_t s) {
            auto w = draw_window(Seed{seed.master, streams::centering, s}, law, 0, Lc);
            stationary_pool_[s] = proc_.evaluate(w, 0, Lc);
        });
    }
}

double PipelineContext::centering_for(double level) const {
    if (proc_.symmetric()) return 0.0;
    if (proc_.linear_gaussian()) {
        // Mean-zero normal law is symmetric; only a nonzero innovation mean reaches here.
        const auto& a = *proc_.linear_coefficients();
        double s = 0.0, v = 0.0;
        for (double c : a) {
            s += c;
            v += c * c;
        }
        return gaussian_clamp_mean(s * proc_.law().mean(), std::sqrt(v * proc_.law().variance()), level);
    }
    std::vector<double> t(stationary_pool_.size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = truncate(stationary_pool_[i], level);
    return mean(t);
}

const ScaleInfo& PipelineContext::scale(int k) const {
    if (k < 1 || k > max_scale()) throw std::out_of_range("PipelineContext::scale: k = " + std::to_string(k));
    return scales_[static_cast<std::size_t>(k)];
}

std::int64_t PipelineContext::panel_lags() const {
    std::int64_t L = std::max<std::int64_t>(proc_.min_lag(), 0);
    for (int k = 1; k <= max_scale(); ++k) L = std::max(L, scales_[static_cast<std::size_t>(k)].m);
    return L;
}

std::vector<double> PipelineContext::xtilde(int k, const InnovationWindow& panel, std::int64_t i0, std::int64_t i1,
                                            std::vector<double>* inner_se) const {
    const auto& s = scale(k);
    std::vector<double> out(static_cast<std::size_t>(std::max<std::int64_t>(0, i1 - i0 + 1)));
    if (inner_se) inner_se->assign(out.size(), 0.0);
    if (out.empty()) return out;
    const double a = s.level, c = s.centering;
    const int R = opt_.inner_reps;
    std::vector<double> vals(static_cast<std::size_t>(R));
    auto finish = [&](std::size_t idx) {
        double mu = mean(vals);
        out[idx] = mu - c;
        if (inner_se) (*inner_se)[idx] = sample_sd(vals) / std::sqrt(static_cast<double>(R));
    };
    switch (s.engine) {
        case XtildeEngine::exact: {
            const std::int64_t M = proc_.memory();
            for (std::int64_t i = i0; i <= i1; ++i) out[static_cast<std::size_t>(i - i0)] = truncate(proc_.evaluate(panel, i, M), a) - c;
            break;
        }
        case XtildeEngine::gaussian_oracle: {
            const auto& co = *proc_.linear_coefficients();
            const auto J = static_cast<std::int64_t>(co.size()) - 1;
            const std::int64_t top = std::min(s.m, J);
            double v_old = 0.0;
            for (std::int64_t l = top + 1; l <= J; ++l) v_old += co[static_cast<std::size_t>(l)] * co[static_cast<std::size_t>(l)];
            const double sd_old = std::sqrt(v_old);
            for (std::int64_t i = i0; i <= i1; ++i) {
                double recent = 0.0;
                for (std::int64_t l = 0; l <= top; ++l) recent += co[static_cast<std::size_t>(l)] * panel.at(i - l);
                out[static_cast<std::size_t>(i - i0)] = gaussian_clamp_mean(recent, sd_old, a) - c;
            }
            break;
        }
        case XtildeEngine::linear_pool: {
            const auto& co = *proc_.linear_coefficients();
            const auto& pool = linear_old_[static_cast<std::size_t>(k)];
            for (std::int64_t i = i0; i <= i1; ++i) {
                double recent = 0.0;
                for (std::int64_t l = 0; l <= s.m; ++l) recent += co[static_cast<std::size_t>(l)] * panel.at(i - l);
                for (int r = 0; r < R; ++r) vals[static_cast<std::size_t>(r)] = truncate(recent + pool[static_cast<std::size_t>(r)], a);
                finish(static_cast<std::size_t>(i - i0));
            }
            break;
        }
        case XtildeEngine::markov_pool: {
            const auto& irf = std::get<IRFSpec>(proc_.spec());
            for (std::int64_t i = i0; i <= i1; ++i) {
                for (int r = 0; r < R; ++r) {
                    double x = markov_states_[static_cast<std::size_t>(r)];
                    for (std::int64_t t = i - s.m; t <= i; ++t) x = irf.map(x, panel.at(t));
                    vals[static_cast<std::size_t>(r)] = truncate(x, a);
                }
                finish(static_cast<std::size_t>(i - i0));
            }
            break;
        }
        case XtildeEngine::generic_pool: {
            const std::int64_t M = proc_.memory();
            std::vector<std::vector<double>> windows(static_cast<std::size_t>(R));
            for (int r = 0; r < R; ++r) {
                auto& w = windows[static_cast<std::size_t>(r)];
                w.resize(static_cast<std::size_t>(M + 1));
                for (std::int64_t l = s.m + 1; l <= M; ++l)
                    w[static_cast<std::size_t>(M - l)] = generic_old_[static_cast<std::size_t>(r)][static_cast<std::size_t>(l)];
            }
            for (std::int64_t i = i0; i <= i1; ++i) {
                for (int r = 0; r < R; ++r) {
                    auto w = windows[static_cast<std::size_t>(r)];
                    for (std::int64_t l = 0; l <= s.m; ++l) w[static_cast<std::size_t>(M - l)] = panel.at(i - l);
                    vals[static_cast<std::size_t>(r)] = truncate(proc_.evaluate(InnovationWindow(i, std::move(w)), i, M), a);
                }
                finish(static_cast<std::size_t>(i - i0));
            }
            break;
        }
    }
    return out;
}

InnovationWindow draw_pipeline_panel(const PipelineContext& ctx, const Seed& seed, std::int64_t n) {
    return draw_panel(ctx.process(), seed, n, ctx.panel_lags());
}

BlockDecomposition decompose(const PipelineContext& ctx, const Seed& seed, std::int64_t n) {
    return decompose(ctx, draw_pipeline_panel(ctx, seed, n), n);
}

BlockDecomposition decompose(const PipelineContext& ctx, const InnovationWindow& panel, std::int64_t n) {
    if (n > ctx.n_max()) throw std::invalid_argument("decompose: n exceeds the context's n_max");
    if (!panel.contains(n) || !panel.contains(1 - ctx.panel_lags()))
        throw std::out_of_range("decompose: panel must cover [1 - " + std::to_string(ctx.panel_lags()) + ", n]");
    BlockDecomposition d;
    d.layout = layout(n, ctx.schedule());
    d.p = ctx.p();
    const int h = d.layout.h;
    const auto un = static_cast<std::size_t>(n);
    d.scales.resize(static_cast<std::size_t>(h + 1));
    for (int k = 1; k <= h; ++k) d.scales[static_cast<std::size_t>(k)] = ctx.scale(k);

    auto x = ctx.process().evaluate_range(panel, 1, n);
    d.X.assign(un + 1, 0.0);
    std::copy(x.begin(), x.end(), d.X.begin() + 1);
    d.xtilde.assign(un + 1, 0.0);
    d.xdag.assign(un + 1, 0.0);
    auto& dag = d.xdag;
    std::vector<double> se_all;
    for (int k = 1; k <= h; ++k) {
        const std::int64_t lo = pow3(k - 1) + 1, hi = std::min(pow3(k), n);
        std::vector<double> se;
        auto xt = ctx.xtilde(k, panel, lo, hi, &se);
        const auto& sc = d.scales[static_cast<std::size_t>(k)];
        for (std::int64_t i = lo; i <= hi; ++i) {
            d.xtilde[static_cast<std::size_t>(i)] = xt[static_cast<std::size_t>(i - lo)];
            dag[static_cast<std::size_t>(i)] = truncate(d.X[static_cast<std::size_t>(i)], sc.level) - sc.centering;
        }
        se_all.insert(se_all.end(), se.begin(), se.end());
    }

    d.S.assign(un + 1, 0.0);
    d.S_dag.assign(un + 1, 0.0);
    d.S_tilde.assign(un + 1, 0.0);
    for (std::size_t i = 1; i <= un; ++i) {
        d.S[i] = d.S[i - 1] + d.X[i];
        // index 1 sits below every scale (3^{k-1} < i), so the two sums start at 2
        d.S_dag[i] = d.S_dag[i - 1] + (i >= 2 ? dag[i] : 0.0);
        d.S_tilde[i] = d.S_tilde[i - 1] + (i >= 2 ? d.xtilde[i] : 0.0);
    }

    for (const auto& w : d.layout.windows()) {
        if (w.count_time > n) continue;
        Block b;
        b.window = w;
        for (std::int64_t i = w.start; i < w.end; ++i) b.sum.add(d.xtilde[static_cast<std::size_t>(i)]);
        b.value = b.sum.value();
        b.truncated_value = pairwise_sum(std::span<const double>(d.xdag.data() + w.start, static_cast<std::size_t>(w.end - w.start)));
        d.blocks.push_back(std::move(b));
    }
    std::vector<std::size_t> order(d.blocks.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return d.blocks[a].window.count_time < d.blocks[b].window.count_time;
    });
    d.S_diamond.assign(un + 1, 0.0);
    ExactSum running;
    std::size_t next = 0;
    double current = 0.0;
    for (std::size_t i = 1; i <= un; ++i) {
        bool changed = false;
        while (next < order.size() && d.blocks[order[next]].window.count_time == static_cast<std::int64_t>(i)) {
            running.add(d.blocks[order[next]].sum);
            ++next;
            changed = true;
        }
        if (changed) current = running.value();
        d.S_diamond[i] = current;
    }

    if (n >= 3) {
        std::span<const double> xs(d.xtilde.data() + 2, un - 1);
        d.path_sd = sample_sd(xs);
    }
    d.mean_inner_se = se_all.empty() ? 0.0 : mean(se_all);
    d.inner_reps_too_small = d.path_sd > 0.0 && d.mean_inner_se > 0.1 * d.path_sd;
    return d;
}

double BlockDecomposition::diamond_from_blocks(std::int64_t i) const {
    ExactSum s;
    for (const auto& b : blocks)
        if (b.window.count_time <= i) s.add(b.sum);
    return s.value();
}

double BlockDecomposition::diamond_from_xtilde(std::int64_t i) const {
    ExactSum s;
    for (const auto& b : blocks)
        if (b.window.count_time <= i)
            for (std::int64_t t = b.window.start; t < b.window.end; ++t) s.add(xtilde[static_cast<std::size_t>(t)]);
    return s.value();
}

void BlockDecomposition::write_blocks_csv(std::ostream& os) const {
    os << "k,j,window_start,window_end,B_value\n" << std::setprecision(17);
    for (const auto& b : blocks)
        os << b.window.k << ',' << b.window.j << ',' << b.window.start << ',' << b.window.end << ',' << b.value << '\n';
}

void BlockDecomposition::write_paths_csv(std::ostream& os) const {
    os << "i,S,S_dag,S_tilde,S_diamond\n" << std::setprecision(17);
    for (std::size_t i = 1; i < S.size(); ++i)
        os << i << ',' << S[i] << ',' << S_dag[i] << ',' << S_tilde[i] << ',' << S_diamond[i] << '\n';
}

WindowAudit audit_windows(const TriadicLayout& L) {
    WindowAudit a;
    auto ws = L.windows();
    std::sort(ws.begin(), ws.end(), [](const BlockWindow& x, const BlockWindow& y) { return x.start < y.start; });
    for (std::size_t i = 0; i < ws.size(); ++i) {
        const auto& w = ws[i];
        if (!(w.start > pow3(w.k - 1) && w.end - 1 <= pow3(w.k))) {
            a.inside_scale = false;
            a.problems.push_back("block (" + std::to_string(w.k) + "," + std::to_string(w.j) + ") leaves its scale");
        }
        if (i + 1 < ws.size() && ws[i + 1].start < w.end) {
            a.disjoint = false;
            a.problems.push_back("blocks (" + std::to_string(w.k) + "," + std::to_string(w.j) + ") and (" +
                                 std::to_string(ws[i + 1].k) + "," + std::to_string(ws[i + 1].j) + ") overlap");
        }
    }
    // Innovation support of B_{k,j} is [start - m_k, end).
    auto support_lo = [&](const BlockWindow& w) { return w.start - L.m[static_cast<std::size_t>(w.k)]; };
    std::map<std::pair<int, std::int64_t>, BlockWindow> by;
    for (const auto& w : ws) by[{w.k, w.j}] = w;
    for (const auto& [key, w] : by) {
        auto gap = by.find({key.first, key.second + 2});
        if (gap != by.end() && support_lo(gap->second) < w.end) {
            a.gap_support = false;
            a.problems.push_back("supports of blocks j and j+2 overlap at k = " + std::to_string(key.first));
        }
        if (key.second == L.q[static_cast<std::size_t>(key.first)]) {
            auto nxt = by.find({key.first + 1, 1});
            if (nxt != by.end() && support_lo(nxt->second) < w.end) {
                a.cross_scale_support = false;
                a.problems.push_back("supports of B_{k,q_k} and B_{k+1,1} overlap at k = " + std::to_string(key.first));
            }
        }
    }
    return a;
}

IndependenceAudit block_independence_audit(const std::vector<BlockDecomposition>& reps) {
    if (reps.size() < 3) throw std::invalid_argument("block_independence_audit: need at least 3 replications");
    IndependenceAudit out;
    out.replications = reps.size();
    out.band = 3.0 / std::sqrt(static_cast<double>(reps.size()));
    const auto& L = reps.front().layout;
    for (const auto& r : reps)
        if (r.layout.n != L.n || r.layout.m != L.m) throw std::invalid_argument("block_independence_audit: layouts differ");
    out.windows = audit_windows(L);
    if (!out.windows.disjoint || !out.windows.inside_scale)
        throw std::logic_error("block_independence_audit: layout bug: " + out.windows.problems.front());

    using Key = std::pair<int, std::int64_t>;
    std::map<Key, std::vector<double>> values, truncated;
    for (const auto& r : reps)
        for (const auto& b : r.blocks) {
            values[{b.window.k, b.window.j}].push_back(b.value);
            truncated[{b.window.k, b.window.j}].push_back(b.truncated_value);
        }
    auto corr = [](const std::map<Key, std::vector<double>>& v, Key a, Key b) -> std::optional<double> {
        auto ia = v.find(a), ib = v.find(b);
        if (ia == v.end() || ib == v.end()) return std::nullopt;
        double c = sample_correlation(ia->second, ib->second);
        if (std::isnan(c)) return std::nullopt;
        return c;
    };
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (int k = L.K0; k <= L.h; ++k) {
        CorrelationRow row;
        row.k = k;
        std::int64_t q = L.blocks_in(k);
        if (q < 1) continue;
        double sum_adj = 0.0, sum_gap = 0.0, sum_gap_t = 0.0;
        std::int64_t n_adj = 0, n_gap = 0, n_gap_t = 0;
        for (std::int64_t j = 1; j + 1 <= q; ++j) {
            if (auto c = corr(values, {k, j}, {k, j + 1})) {
                sum_adj += *c;
                ++n_adj;
            }
            if (j + 2 > q) continue;
            if (auto c = corr(values, {k, j}, {k, j + 2})) {
                sum_gap += *c;
                row.max_abs_gap = std::max(row.max_abs_gap, std::abs(*c));
                ++n_gap;
            }
            if (auto c = corr(truncated, {k, j}, {k, j + 2})) {
                sum_gap_t += *c;
                ++n_gap_t;
            }
        }
        row.pairs = n_gap;
        row.pooled_adjacent = n_adj ? sum_adj / static_cast<double>(n_adj) : nan;
        row.pooled_gap = n_gap ? sum_gap / static_cast<double>(n_gap) : nan;
        row.pooled_gap_truncated = n_gap_t ? sum_gap_t / static_cast<double>(n_gap_t) : nan;
        auto cs = corr(values, {k, q}, {k + 1, 1});
        auto cst = corr(truncated, {k, q}, {k + 1, 1});
        row.cross_scale = cs ? *cs : nan;
        row.cross_scale_truncated = cst ? *cst : nan;
        auto inside = [&](double c) { return std::isnan(c) || std::abs(c) <= out.band; };
        row.within = inside(row.pooled_gap) && inside(row.pooled_gap_truncated) && inside(row.cross_scale) &&
                     inside(row.cross_scale_truncated);
        for (double c : {row.pooled_gap, row.pooled_gap_truncated, row.cross_scale, row.cross_scale_truncated})
            if (!std::isnan(c)) out.max_pooled_abs = std::max(out.max_pooled_abs, std::abs(c));
        out.correlations_within = out.correlations_within && row.within;
        out.rows.push_back(row);
    }
    return out;
}

std::string IndependenceAudit::text() const {
    std::ostringstream os;
    os << "Block independence audit (" << replications << " replications, band 3/sqrt(reps) = " << band << ")\n";
    os << "  windows disjoint: " << (windows.disjoint ? "yes" : "NO") << ", inside scale: "
       << (windows.inside_scale ? "yes" : "NO") << ", cross-scale supports disjoint: "
       << (windows.cross_scale_support ? "yes" : "NO") << ", j/j+2 supports disjoint: "
       << (windows.gap_support ? "yes" : "NO") << "\n";
    for (const auto& p : windows.problems) os << "  problem: " << p << "\n";
    for (const auto& r : rows)
        os << "  k=" << r.k << " pairs=" << r.pairs << " corr(j,j+2): blocks " << r.pooled_gap << ", truncated X "
           << r.pooled_gap_truncated << "; corr(B_{k,q_k},B_{k+1,1}): blocks " << r.cross_scale << ", truncated X "
           << r.cross_scale_truncated << "; contiguous corr(j,j+1) " << r.pooled_adjacent
           << (r.within ? "" : "  OUTSIDE BAND") << "\n";
    os << "  verdict: " << (ok() ? "PASS" : "FAIL") << "\n";
    return os.str();
}

}  // namespace kmtdep
