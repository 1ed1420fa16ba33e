#include "kmtdep/gaussian_coupling.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "kmtdep/parallel.hpp"

namespace kmtdep {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sq(double x) { return x * x; }

// Autocovariances 0..maxlag of a demeaned series (divisor N).
std::vector<double> autocovariances(const std::vector<double>& x, double mu, std::int64_t maxlag) {
    const auto N = static_cast<std::int64_t>(x.size());
    std::vector<double> g(static_cast<std::size_t>(maxlag + 1), 0.0);
    for (std::int64_t h = 0; h <= maxlag && h < N; ++h) {
        double s = 0.0;
        for (std::int64_t t = 0; t + h < N; ++t)
            s += (x[static_cast<std::size_t>(t)] - mu) * (x[static_cast<std::size_t>(t + h)] - mu);
        g[static_cast<std::size_t>(h)] = s / static_cast<double>(N);
    }
    return g;
}

double flat_top(const std::vector<double>& g, std::int64_t M) {
    double s = g[0];
    for (std::int64_t h = 1; h < static_cast<std::int64_t>(g.size()); ++h) {
        double x = static_cast<double>(h) / static_cast<double>(M);
        double w = x <= 0.5 ? 1.0 : (x < 1.0 ? 2.0 * (1.0 - x) : 0.0);
        s += 2.0 * w * g[static_cast<std::size_t>(h)];
    }
    return s;
}

// Var of a sum of L consecutive terms with autocovariances g (zero past g.size()).
double block_variance(const std::vector<double>& g, std::int64_t L) {
    double v = 0.0;
    for (std::int64_t d = 0; d < L && d < static_cast<std::int64_t>(g.size()); ++d)
        v += (d == 0 ? 1.0 : 2.0) * static_cast<double>(L - d) * g[static_cast<std::size_t>(d)];
    return v;
}

double innovation_sup_abs(const InnovationLaw& law) {
    switch (law.kind()) {
        case LawKind::rademacher:
        case LawKind::uniform01:
        case LawKind::bernoulli_half: return 1.0;
        default: return kInf;
    }
}

double clamp_open(double u) { return std::min(std::max(u, 1e-300), 1.0 - 0x1p-53); }

std::uint64_t block_key(int k, std::int64_t j) {
    return (static_cast<std::uint64_t>(k) << 40) | static_cast<std::uint64_t>(j);
}

}  // namespace

double nu_k(const std::vector<double>& g, std::int64_t m) {
    auto at = [&](std::int64_t i) { return i < static_cast<std::int64_t>(g.size()) ? g[static_cast<std::size_t>(i)] : 0.0; };
    double s = at(0);
    for (std::int64_t i = 1; i <= m; ++i) s += 2.0 * at(i);
    for (std::int64_t i = 1; i <= m; ++i)
        s += 2.0 * (1.0 - static_cast<double>(i) / static_cast<double>(m)) * at(m + i);
    return s;
}

LongRunVariance sigma2_longrun(const CausalProcess& proc, const Seed& seed, std::int64_t path_length,
                               const DependenceProfile* profile) {
    LongRunVariance out;
    if (profile) out.long_range = profile->long_range;
    if (auto o = proc.sigma2_oracle()) {
        out.value = *o;
        out.analytic = true;
        out.method = "oracle";
        return out;
    }
    if (path_length < 1024) throw std::invalid_argument("sigma2_longrun: path too short");
    const std::int64_t lag = std::max<std::int64_t>(proc.min_lag(), 0);
    auto x = evaluate_path(proc, Seed{seed.master, streams::longrun, seed.replication_id}, path_length, lag);
    const double mu = mean(x);
    const auto N = static_cast<std::int64_t>(x.size());
    const std::int64_t cap = N / 10;
    std::int64_t M = 0;
    if (profile && !profile->theta.empty() && profile->theta[0] > 0.0) {
        // Theta_b <= 1e-3 Theta_0; theta[j] is sum_{i >= j} delta_i.
        std::int64_t b = static_cast<std::int64_t>(profile->theta.size()) - 1;
        for (std::size_t j = 0; j < profile->theta.size(); ++j)
            if (profile->theta[j] <= 1e-3 * profile->theta[0]) {
                b = static_cast<std::int64_t>(j);
                break;
            }
        M = std::max<std::int64_t>(2 * b, 2);
        out.method = "flat-top kernel, bandwidth from Theta decay";
    } else {
        // Politis' rule: first lag after which K_N consecutive autocorrelations are insignificant.
        const double crit = 2.0 * std::sqrt(std::log10(static_cast<double>(N)) / static_cast<double>(N));
        const auto KN = static_cast<std::int64_t>(std::max(5.0, std::sqrt(std::log10(static_cast<double>(N)))));
        std::int64_t probe = 64;
        for (;;) {
            auto g = autocovariances(x, mu, std::min(probe, cap));
            std::int64_t mhat = -1;
            for (std::int64_t h = 1; h + KN < static_cast<std::int64_t>(g.size()); ++h) {
                bool quiet = true;
                for (std::int64_t s = 0; s < KN && quiet; ++s)
                    quiet = std::abs(g[static_cast<std::size_t>(h + s)] / g[0]) < crit;
                if (quiet) {
                    mhat = h - 1;
                    break;
                }
            }
            if (mhat >= 0) {
                M = std::max<std::int64_t>(2 * mhat, 2);
                break;
            }
            if (probe >= cap) {
                M = cap;
                out.long_range = true;
                break;
            }
            probe *= 4;
        }
        out.method = "flat-top kernel, bandwidth by autocorrelation cut-off";
    }
    M = std::min(M, cap);
    out.bandwidth = M;
    out.value = flat_top(autocovariances(x, mu, M), M);
    constexpr int B = 32;
    const std::int64_t len = N / B;
    std::vector<double> est(B);
    for (int b = 0; b < B; ++b) {
        std::vector<double> part(x.begin() + b * len, x.begin() + (b + 1) * len);
        est[static_cast<std::size_t>(b)] = flat_top(autocovariances(part, mu, std::min(M, len / 2)), M);
    }
    out.se = sample_sd(est) / std::sqrt(static_cast<double>(B));
    return out;
}

VarianceModel VarianceModel::from_nu(std::vector<double> nu, double sigma2, std::vector<std::int64_t> m) {
    VarianceModel vm;
    vm.sigma2 = sigma2;
    vm.nu = std::move(nu);
    if (vm.nu.empty()) vm.nu.push_back(0.0);
    vm.nu_se.assign(vm.nu.size(), 0.0);
    vm.m = std::move(m);
    vm.m.resize(vm.nu.size(), 0);
    vm.gamma_tilde.assign(vm.nu.size(), {});
    vm.gamma_exact.assign(vm.nu.size(), false);
    return vm;
}

double VarianceModel::phi(std::int64_t n) const {
    if (n <= 1) return 0.0;
    const int h = scale_of(n);
    if (h > max_scale())
        throw std::out_of_range("VarianceModel::phi: scale " + std::to_string(h) + " beyond the model's " +
                                std::to_string(max_scale()));
    double s = 0.0;
    for (int k = 1; k < h; ++k) s += static_cast<double>(pow3(k) - pow3(k - 1)) * nu[static_cast<std::size_t>(k)];
    return s + static_cast<double>(n - pow3(h - 1)) * nu[static_cast<std::size_t>(h)];
}

double VarianceModel::b(std::int64_t i) const {
    if (i < 2) throw std::invalid_argument("VarianceModel::b: i must be >= 2");
    const int h = scale_of(i);
    return std::sqrt(std::max(0.0, nu[static_cast<std::size_t>(h)])) - std::sqrt(std::max(0.0, sigma2));
}

double VarianceModel::varsigma2(std::int64_t n) const {
    if (n < 2) return 0.0;
    const int h = scale_of(n);
    double s = 0.0;
    for (int k = 1; k <= h; ++k) {
        const std::int64_t lo = std::max<std::int64_t>(2, pow3(k - 1) + 1), hi = std::min(n, pow3(k));
        if (hi < lo) continue;
        s += static_cast<double>(hi - lo + 1) * sq(b(lo));
    }
    return s;
}

std::vector<double> phi_path(const VarianceModel& vm, std::int64_t n) {
    std::vector<double> out(static_cast<std::size_t>(n + 1), 0.0);
    for (std::int64_t i = 2; i <= n; ++i)
        out[static_cast<std::size_t>(i)] = out[static_cast<std::size_t>(i - 1)] + vm.nu[static_cast<std::size_t>(scale_of(i))];
    return out;
}

bool truncation_inactive(const CausalProcess& proc, double level) {
    const auto* a = proc.linear_coefficients();
    if (!a) return false;
    const auto& law = proc.law();
    if (law.kind() == LawKind::standard_normal) {
        double v = 0.0;
        for (double c : *a) v += c * c;
        return level >= 8.5 * std::sqrt(v);
    }
    double l1 = 0.0;
    for (double c : *a) l1 += std::abs(c);
    return l1 * innovation_sup_abs(law) <= level;
}

VarianceModel build_variance_model(const PipelineContext& ctx, const Seed& seed, const VarianceOptions& opt,
                                   const DependenceProfile* profile) {
    const auto& proc = ctx.process();
    auto lr = sigma2_longrun(proc, seed, opt.sigma2_path, profile);
    const int H = ctx.max_scale();
    VarianceModel vm;
    vm.sigma2 = lr.value;
    vm.sigma2_se = lr.se;
    vm.long_range = lr.long_range;
    vm.m.assign(static_cast<std::size_t>(H + 1), 0);
    vm.gamma_tilde.assign(static_cast<std::size_t>(H + 1), {});
    vm.gamma_exact.assign(static_cast<std::size_t>(H + 1), false);
    vm.nu.assign(static_cast<std::size_t>(H + 1), 0.0);
    vm.nu_se.assign(static_cast<std::size_t>(H + 1), 0.0);
    const int B = std::max(opt.batches, 2);
    for (int k = 1; k <= H; ++k) {
        const auto& s = ctx.scale(k);
        const std::int64_t m = s.m;
        const auto uk = static_cast<std::size_t>(k);
        vm.m[uk] = m;
        // X-tilde_{k,i} is a function of eps_{i-m..i} (pools are shared constants), so
        // gamma-tilde vanishes past lag m.
        auto& g = vm.gamma_tilde[uk];
        g.assign(static_cast<std::size_t>(2 * m + 1), 0.0);
        if (proc.linear_coefficients() && truncation_inactive(proc, s.level)) {
            const auto& a = *proc.linear_coefficients();
            const std::int64_t top = std::min<std::int64_t>(m, static_cast<std::int64_t>(a.size()) - 1);
            const double v = proc.law().variance();
            for (std::int64_t i = 0; i <= top; ++i) {
                double c = 0.0;
                for (std::int64_t l = 0; l + i <= top; ++l) c += a[static_cast<std::size_t>(l)] * a[static_cast<std::size_t>(l + i)];
                g[static_cast<std::size_t>(i)] = v * c;
            }
            vm.gamma_exact[uk] = true;
            vm.nu[uk] = nu_k(g, m);
            continue;
        }
        double cost;
        switch (s.engine) {
            case XtildeEngine::exact: cost = static_cast<double>(std::max<std::int64_t>(proc.memory(), 0) + 1); break;
            case XtildeEngine::gaussian_oracle: cost = static_cast<double>(m + 1); break;
            default: cost = static_cast<double>(ctx.options().inner_reps) * static_cast<double>(m + 1); break;
        }
        const auto N = static_cast<std::int64_t>(
            std::clamp(3e7 / cost, 2e4, static_cast<double>(std::max<std::int64_t>(opt.sim_length, 2 * B))));
        const std::int64_t len = std::max<std::int64_t>(N / B, 4 * (m + 1));
        std::vector<std::vector<double>> paths(static_cast<std::size_t>(B));
        parallel_for(static_cast<std::size_t>(B), opt.workers, [&](std::size_t b) {
            Seed sb{seed.master, derive_stream(streams::longrun, static_cast<std::uint64_t>(k)), b};
            auto panel = draw_panel(proc, sb, len, ctx.panel_lags());
            paths[b] = ctx.xtilde(k, panel, 1, len);
        });
        std::vector<double> all;
        all.reserve(static_cast<std::size_t>(B * len));
        for (const auto& p : paths) all.insert(all.end(), p.begin(), p.end());
        const double mu = mean(all);
        std::vector<double> pooled(static_cast<std::size_t>(m + 1), 0.0), batch_nu(static_cast<std::size_t>(B));
        for (int b = 0; b < B; ++b) {
            auto gb = autocovariances(paths[static_cast<std::size_t>(b)], mu, m);
            for (std::int64_t i = 0; i <= m; ++i) pooled[static_cast<std::size_t>(i)] += gb[static_cast<std::size_t>(i)] / B;
            batch_nu[static_cast<std::size_t>(b)] = nu_k(gb, m);
        }
        std::copy(pooled.begin(), pooled.end(), g.begin());
        vm.nu[uk] = nu_k(g, m);
        vm.nu_se[uk] = sample_sd(batch_nu) / std::sqrt(static_cast<double>(B));
    }
    return vm;
}

PhiGap phi_block_variance_gap(const VarianceModel& vm, const TriadicLayout& L) {
    PhiGap out;
    const int h = L.h;
    if (vm.max_scale() < h) throw std::out_of_range("phi_block_variance_gap: variance model too short");
    std::vector<double> V(static_cast<std::size_t>(h + 1), 0.0);
    for (int k = L.K0; k <= h; ++k) {
        const auto uk = static_cast<std::size_t>(k);
        const std::int64_t m = L.m[uk];
        V[uk] = vm.gamma_tilde[uk].empty() ? 3.0 * static_cast<double>(m) * vm.nu[uk]
                                            : block_variance(vm.gamma_tilde[uk], 3 * m);
        out.one_scale_bound = std::max(out.one_scale_bound, 3.0 * static_cast<double>(m) * std::abs(vm.nu[uk]));
    }
    double done = 0.0;  // block variance from completed scales
    double phi = 0.0;
    for (std::int64_t i = 2; i <= L.n; ++i) {
        const int hi = scale_of(i);
        phi += vm.nu[static_cast<std::size_t>(hi)];
        if (i == pow3(hi - 1) + 1 && hi - 1 >= L.K0)
            done += static_cast<double>(L.q[static_cast<std::size_t>(hi - 1)]) * V[static_cast<std::size_t>(hi - 1)];
        double cur = 0.0;
        if (hi >= L.K0) {
            std::int64_t t = std::min(tau_of(i, L.m[static_cast<std::size_t>(hi)]), L.q[static_cast<std::size_t>(hi)]);
            cur = static_cast<double>(std::max<std::int64_t>(t, 0)) * V[static_cast<std::size_t>(hi)];
        }
        out.max_gap = std::max(out.max_gap, std::abs(phi - done - cur));
    }
    for (int k = 1; k <= h; ++k) {
        const auto uk = static_cast<std::size_t>(k);
        const double nu = std::abs(vm.nu[uk]);
        if (k < L.K0) {
            out.cumulative_bound += static_cast<double>(pow3(k) - pow3(k - 1)) * nu;
            continue;
        }
        // Indices outside blocks, plus the per-block edge term 3 m nu - Var B.
        const std::int64_t m = L.m[uk];
        const double uncovered = static_cast<double>(pow3(k) - pow3(k - 1) - 3 * m * L.q[uk]);
        out.cumulative_bound += uncovered * nu + static_cast<double>(L.q[uk]) * std::abs(3.0 * m * vm.nu[uk] - V[uk]);
    }
    return out;
}

LinearizeResult linearize(const VarianceModel& vm, std::int64_t n, double p) {
    LinearizeResult r;
    r.varsigma2 = vm.varsigma2(n);
    const int h = scale_of(n);
    r.quotient.assign(static_cast<std::size_t>(h + 1), std::nan(""));
    bool all_zero = true;
    for (int k = 1; k <= h; ++k) {
        const double nk = static_cast<double>(pow3(k));
        const double ll = std::max(std::log(std::log(nk)), 1.0);
        const double q = vm.varsigma2(pow3(k)) * ll / std::pow(nk, 2.0 / p);
        r.quotient[static_cast<std::size_t>(k)] = q;
        if (q != 0.0) all_zero = false;
    }
    std::ostringstream ev;
    if (all_zero) {
        r.pass = true;
        r.k0 = 1;
        ev << "varsigma^2 identically 0";
    } else if (h < 4) {
        r.pass = false;
        ev << "too few scales (" << h << ") to judge";
    } else {
        int k0 = h;
        while (k0 > 1 && r.quotient[static_cast<std::size_t>(k0 - 1)] > r.quotient[static_cast<std::size_t>(k0)]) --k0;
        r.k0 = k0;
        const double first = r.quotient[static_cast<std::size_t>(k0)], last = r.quotient[static_cast<std::size_t>(h)];
        const bool early = k0 <= 3 * h / 4, halved = last < 0.5 * first;
        r.pass = early && halved;
        ev << "quotient strictly decreasing on k in [" << k0 << ", " << h << "], q(k0) = " << first << ", q(" << h
           << ") = " << last;
        if (!early) ev << "; fails: decreasing run starts after 3h/4";
        if (!halved) ev << "; fails: last value not below half of q(k0)";
    }
    r.evidence = ev.str();
    return r;
}

// BlockLaw

BlockLaw BlockLaw::gaussian(double variance) {
    if (!(variance > 0.0)) return discrete({0.0}, {1.0});
    BlockLaw b;
    b.kind_ = Kind::gaussian;
    b.variance_ = variance;
    b.sd_ = std::sqrt(variance);
    return b;
}

BlockLaw BlockLaw::discrete(std::vector<double> atoms, std::vector<double> probs) {
    if (atoms.empty() || atoms.size() != probs.size())
        throw std::invalid_argument("BlockLaw::discrete: atoms and probabilities must match and be non-empty");
    std::vector<std::size_t> idx(atoms.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return atoms[a] < atoms[b]; });
    BlockLaw b;
    b.kind_ = Kind::discrete;
    double total = 0.0;
    for (double q : probs) {
        if (!(q >= 0.0)) throw std::invalid_argument("BlockLaw::discrete: negative probability");
        total += q;
    }
    double c = 0.0, mu = 0.0, m2 = 0.0;
    for (auto i : idx) {
        const double q = probs[i] / total;
        if (!b.xs_.empty() && b.xs_.back() == atoms[i]) {
            c += q;
            b.cum_.back() = c;
        } else {
            c += q;
            b.xs_.push_back(atoms[i]);
            b.cum_.push_back(c);
        }
        mu += q * atoms[i];
        m2 += q * atoms[i] * atoms[i];
    }
    b.cum_.back() = 1.0;
    b.variance_ = std::max(0.0, m2 - mu * mu);
    return b;
}

BlockLaw BlockLaw::empirical(std::vector<double> sample) {
    if (sample.size() < 20) throw std::invalid_argument("BlockLaw::empirical: need at least 20 draws");
    std::sort(sample.begin(), sample.end());
    const std::size_t N = sample.size();
    std::size_t unique = 1;
    for (std::size_t i = 1; i < N; ++i) unique += sample[i] != sample[i - 1];
    if (unique * 2 < N) {
        std::vector<double> atoms, probs;
        for (double x : sample) {
            if (!atoms.empty() && atoms.back() == x) {
                probs.back() += 1.0;
            } else {
                atoms.push_back(x);
                probs.push_back(1.0);
            }
        }
        return discrete(std::move(atoms), std::move(probs));
    }
    BlockLaw b;
    b.kind_ = Kind::empirical;
    b.variance_ = kmtdep::variance(sample);
    // Exponential tails, scale = mean excess over the outermost 1%.
    const std::size_t t = std::max<std::size_t>(10, N / 100);
    double left = 0.0, right = 0.0;
    for (std::size_t i = 0; i < t; ++i) {
        left += sample[t] - sample[i];
        right += sample[N - 1 - i] - sample[N - 1 - t];
    }
    const double floor_scale = 1e-12 * std::max(1.0, std::sqrt(b.variance_));
    b.left_scale_ = std::max(left / static_cast<double>(t), floor_scale);
    b.right_scale_ = std::max(right / static_cast<double>(t), floor_scale);
    b.xs_ = std::move(sample);
    return b;
}

BlockLaw BlockLaw::innovation(const InnovationLaw& law) {
    BlockLaw b;
    b.kind_ = Kind::innovation;
    b.variance_ = law.variance();
    b.innovation_ = law;
    return b;
}

double BlockLaw::cdf(double x) const {
    switch (kind_) {
        case Kind::gaussian: return normal_cdf(x / sd_);
        case Kind::innovation: return innovation_->cdf(x);
        case Kind::discrete: {
            auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
            return it == xs_.begin() ? 0.0 : cum_[static_cast<std::size_t>(it - xs_.begin() - 1)];
        }
        case Kind::empirical: {
            const auto N = static_cast<double>(xs_.size());
            const double p1 = 0.5 / N;
            if (x < xs_.front()) return p1 * std::exp((x - xs_.front()) / left_scale_);
            if (x >= xs_.back()) return 1.0 - p1 * std::exp(-(x - xs_.back()) / right_scale_);
            auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
            const auto i = static_cast<std::size_t>(it - xs_.begin());  // xs_[i-1] <= x < xs_[i]
            const double x0 = xs_[i - 1], x1 = xs_[i];
            const double f0 = (static_cast<double>(i - 1) + 0.5) / N, f1 = (static_cast<double>(i) + 0.5) / N;
            return x1 > x0 ? f0 + (f1 - f0) * (x - x0) / (x1 - x0) : f1;
        }
    }
    return 0.0;
}

double BlockLaw::cdf_left(double x) const {
    switch (kind_) {
        case Kind::innovation: return innovation_->cdf_left(x);
        case Kind::discrete: {
            auto it = std::lower_bound(xs_.begin(), xs_.end(), x);
            return it == xs_.begin() ? 0.0 : cum_[static_cast<std::size_t>(it - xs_.begin() - 1)];
        }
        default: return cdf(x);
    }
}

double BlockLaw::quantile(double u) const {
    switch (kind_) {
        case Kind::gaussian: return sd_ * normal_quantile(clamp_open(u));
        case Kind::innovation: return innovation_->quantile(clamp_open(u));
        case Kind::discrete: {
            auto it = std::lower_bound(cum_.begin(), cum_.end(), u);
            if (it == cum_.end()) --it;
            return xs_[static_cast<std::size_t>(it - cum_.begin())];
        }
        case Kind::empirical: {
            u = clamp_open(u);
            const auto N = static_cast<double>(xs_.size());
            const double p1 = 0.5 / N;
            if (u < p1) return xs_.front() + left_scale_ * std::log(u / p1);
            if (u > 1.0 - p1) return xs_.back() - right_scale_ * std::log((1.0 - u) / p1);
            const double pos = u * N - 0.5;  // fractional order-statistic index
            const auto i = std::min(static_cast<std::size_t>(pos), xs_.size() - 2);
            const double w = pos - static_cast<double>(i);
            return xs_[i] + w * (xs_[i + 1] - xs_[i]);
        }
    }
    return 0.0;
}

double BlockLaw::pit(double x, double v) const {
    const double lo = cdf_left(x), hi = cdf(x);
    return lo + v * (hi - lo);
}

std::string BlockLaw::describe() const {
    std::ostringstream os;
    switch (kind_) {
        case Kind::gaussian: os << "Gaussian(var=" << variance_ << ")"; break;
        case Kind::innovation: os << "innovation " << innovation_->name(); break;
        case Kind::discrete: os << "discrete, " << xs_.size() << " atoms, var=" << variance_; break;
        case Kind::empirical: os << "empirical, " << xs_.size() << " draws, var=" << variance_; break;
    }
    return os.str();
}

double simulate_block(const PipelineContext& ctx, int k, const Seed& seed) {
    const std::int64_t L = 3 * ctx.scale(k).m;
    auto panel = draw_panel(ctx.process(), seed, L, ctx.panel_lags());
    auto xs = ctx.xtilde(k, panel, 1, L);
    ExactSum s;
    for (double x : xs) s.add(x);
    return s.value();
}

std::vector<std::optional<BlockLaw>> build_block_laws(const PipelineContext& ctx, const VarianceModel& vm, int k_min,
                                                      int k_max, const Seed& seed, const BlockLawOptions& opt) {
    if (k_max > ctx.max_scale() || k_max > vm.max_scale())
        throw std::out_of_range("build_block_laws: k_max beyond the context or variance model");
    std::vector<std::optional<BlockLaw>> out(static_cast<std::size_t>(std::max(k_max, 0) + 1));
    const auto& proc = ctx.process();
    const auto* a = proc.linear_coefficients();
    for (int k = std::max(k_min, 1); k <= k_max; ++k) {
        const auto& s = ctx.scale(k);
        const auto uk = static_cast<std::size_t>(k);
        const std::int64_t L = 3 * s.m;
        const bool inactive = truncation_inactive(proc, s.level);
        if (proc.linear_gaussian() && inactive && vm.gamma_exact[uk]) {
            out[uk] = BlockLaw::gaussian(block_variance(vm.gamma_tilde[uk], L));
            continue;
        }
        if (a && a->size() == 1 && proc.law().discrete() && inactive) {
            // Sum of L i.i.d. two-point values, minus the centering.
            const double lo = (*a)[0] * proc.law().quantile(0.25), hi = (*a)[0] * proc.law().quantile(0.75);
            std::vector<double> atoms, probs;
            for (std::int64_t j = 0; j <= L; ++j) {
                atoms.push_back(static_cast<double>(L - j) * lo + static_cast<double>(j) * hi -
                                static_cast<double>(L) * s.centering);
                probs.push_back(std::exp(std::lgamma(L + 1.0) - std::lgamma(j + 1.0) - std::lgamma(L - j + 1.0) -
                                         static_cast<double>(L) * std::log(2.0)));
            }
            out[uk] = BlockLaw::discrete(std::move(atoms), std::move(probs));
            continue;
        }
        std::vector<double> draws(opt.samples);
        parallel_for(opt.samples, opt.workers, [&](std::size_t i) {
            draws[i] = simulate_block(ctx, k, Seed{seed.master, derive_stream(streams::block_law, static_cast<std::uint64_t>(k)), i});
        });
        out[uk] = BlockLaw::empirical(std::move(draws));
    }
    return out;
}

CoupledPaths couple_blocks(const BlockDecomposition& d, const VarianceModel& vm,
                           const std::vector<std::optional<BlockLaw>>& laws, const Seed& seed) {
    CoupledPaths out;
    const std::int64_t n = d.layout.n;
    const auto un = static_cast<std::size_t>(n);
    out.n = n;
    out.sigma_zero = !(vm.sigma2 > 0.0);
    out.sigma = out.sigma_zero ? 0.0 : std::sqrt(vm.sigma2);
    out.S = d.S;
    out.S_diamond = d.S_diamond;
    const auto phi = phi_path(vm, n);
    CounterRng rng(Seed{seed.master, streams::coupling, seed.replication_id});

    auto blocks = d.blocks;
    std::sort(blocks.begin(), blocks.end(),
              [](const Block& x, const Block& y) { return x.window.count_time < y.window.count_time; });

    out.G.assign(un + 1, 0.0);
    out.law_error.assign(un + 1, 0.0);
    out.grid_error.assign(un + 1, 0.0);
    auto bridge = [&](std::int64_t from, std::int64_t to) {
        // Brownian bridge on the phi clock between G(from) and G(to).
        const double pt = phi[static_cast<std::size_t>(to)], gt = out.G[static_cast<std::size_t>(to)];
        for (std::int64_t i = from + 1; i < to; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            const double p0 = phi[ui - 1], p1 = phi[ui], g0 = out.G[ui - 1];
            const double span = pt - p0;
            if (!(span > 0.0)) {
                out.G[ui] = g0;
                continue;
            }
            const double f = (p1 - p0) / span;
            out.G[ui] = g0 + f * (gt - g0) + std::sqrt(std::max(0.0, (p1 - p0) * (pt - p1) / span)) * rng.normal(i, 2);
        }
    };
    std::int64_t prev = 0;
    double sum_b = 0.0, sum_a = 0.0, law_max = 0.0, grid_max = 0.0;
    for (const auto& blk : blocks) {
        const int k = blk.window.k;
        const std::int64_t t = blk.window.count_time;
        if (t > n) continue;
        if (static_cast<std::size_t>(k) >= laws.size() || !laws[static_cast<std::size_t>(k)])
            throw std::invalid_argument("couple_blocks: no block law for scale " + std::to_string(k));
        const auto& law = *laws[static_cast<std::size_t>(k)];
        CouplingGridPoint gp;
        gp.k = k;
        gp.j = blk.window.j;
        gp.time = t;
        gp.block = blk.value;
        gp.uniform = clamp_open(law.pit(blk.value, rng.uniform(static_cast<std::int64_t>(block_key(k, gp.j)), 1)));
        const double z = normal_quantile(gp.uniform);
        gp.phi_increment = phi[static_cast<std::size_t>(t)] - phi[static_cast<std::size_t>(prev)];
        gp.gaussian_increment = std::sqrt(std::max(0.0, gp.phi_increment)) * z;
        out.G[static_cast<std::size_t>(t)] = out.G[static_cast<std::size_t>(prev)] + gp.gaussian_increment;
        bridge(prev, t);
        sum_b += blk.value;
        sum_a += std::sqrt(law.variance()) * z;
        law_max = std::max(law_max, std::abs(sum_b - sum_a));
        grid_max = std::max(grid_max, std::abs(sum_a - out.G[static_cast<std::size_t>(t)]));
        out.law_error[static_cast<std::size_t>(t)] = law_max;
        out.grid_error[static_cast<std::size_t>(t)] = grid_max;
        out.grid.push_back(gp);
        prev = t;
    }
    for (std::int64_t i = prev + 1; i <= n; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        out.G[ui] = out.G[ui - 1] + std::sqrt(std::max(0.0, phi[ui] - phi[ui - 1])) * rng.normal(i, 2);
    }
    for (std::size_t i = 1; i <= un; ++i) {
        out.law_error[i] = std::max(out.law_error[i], out.law_error[i - 1]);
        out.grid_error[i] = std::max(out.grid_error[i], out.grid_error[i - 1]);
    }

    // B''(i) = sum_{l=2}^{i} Z_l with Z_l = (B(phi_l) - B(phi_{l-1})) / nu_{h_l}^{1/2}.
    out.linear.assign(un + 1, 0.0);
    double walk = 0.0;
    for (std::int64_t i = 2; i <= n; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        const double nu = vm.nu[static_cast<std::size_t>(scale_of(i))];
        const double zi = nu > 0.0 ? (out.G[ui] - out.G[ui - 1]) / std::sqrt(nu) : rng.normal(i, 3);
        walk += zi;
        out.linear[ui] = out.sigma * walk;
    }
    out.D.assign(un + 1, 0.0);
    out.D_prime.assign(un + 1, 0.0);
    out.D_sip.assign(un + 1, 0.0);
    for (std::size_t i = 1; i <= un; ++i) {
        out.D[i] = std::max(out.D[i - 1], std::abs(out.S_diamond[i] - out.G[i]));
        out.D_prime[i] = std::max(out.D_prime[i - 1], std::abs(out.S_diamond[i] - out.linear[i]));
        out.D_sip[i] = std::max(out.D_sip[i - 1], std::abs(out.S[i] - out.linear[i]));
    }
    return out;
}

void CoupledPaths::write_csv(std::ostream& os) const {
    os << "i,S_diamond,B_phi,sigma_Bddag,abs_err\n" << std::setprecision(17);
    for (std::size_t i = 0; i < G.size(); ++i)
        os << i << ',' << S_diamond[i] << ',' << G[i] << ',' << linear[i] << ',' << std::abs(S_diamond[i] - G[i])
           << '\n';
}

}  // namespace kmtdep
