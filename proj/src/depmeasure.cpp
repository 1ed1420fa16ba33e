#include "kmtdep/depmeasure.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "kmtdep/parallel.hpp"
#include "kmtdep/stats.hpp"

namespace kmtdep {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_moment(const CausalProcess& proc, double p) {
    if (!(p >= 1.0)) throw std::invalid_argument("moment order p must be >= 1");
    if (p > proc.law().p_max() || (p == proc.law().p_max() && std::isfinite(p)))
        throw std::invalid_argument("p = " + std::to_string(p) + " exceeds the innovation law's finite moments");
}

// Sum of the closed-form delta beyond L, or nullopt when there is none.
std::optional<double> oracle_tail(const CausalProcess& proc, double p, std::int64_t L) {
    if (proc.memory() >= 0 && proc.memory() <= L) return 0.0;
    if (!proc.delta_oracle(L + 1, p)) return std::nullopt;
    double s = 0.0;
    std::int64_t end = proc.memory() >= 0 ? proc.memory() : std::int64_t{1} << 40;
    for (std::int64_t j = L + 1; j <= end; ++j) {
        double d = *proc.delta_oracle(j, p);
        s += d;
        if (d == 0.0 || d < 1e-18 * s) break;
        if (j - L > 10'000'000) return std::nullopt;
    }
    return s;
}

double aicc(double rss, std::size_t n, int k) {
    double nn = static_cast<double>(n);
    double r = std::max(rss, 1e-300 * nn);
    return nn * std::log(r / nn) + 2.0 * k + 2.0 * k * (k + 1.0) / (nn - k - 1.0);
}

void finish_profile(DependenceProfile& prof, const CausalProcess* proc) {
    const auto L = prof.L;
    prof.fit = fit_decay(prof.delta);
    std::optional<double> tail;
    if (proc) tail = oracle_tail(*proc, prof.p, L);
    if (tail) {
        prof.tail = *tail;
        prof.tail_analytic = true;
    } else if (prof.fit && prof.fit->family == DecayFamily::geometric) {
        double r = std::exp(prof.fit->slope);
        prof.tail = std::exp(prof.fit->log_c + prof.fit->slope * static_cast<double>(L + 1)) / (1.0 - r);
    } else if (prof.fit && prof.fit->family == DecayFamily::power_log) {
        const auto& f = *prof.fit;
        if (f.beta > 1.0) {
            double x = static_cast<double>(L) + 0.5;
            prof.tail = std::exp(f.log_c) * std::pow(x, 1.0 - f.beta) * std::pow(std::log(x), -f.A) / (f.beta - 1.0);
        } else {
            prof.tail = kInf;
        }
    } else {
        prof.tail = 0.0;
    }
    prof.theta.assign(static_cast<std::size_t>(L + 2), 0.0);
    prof.theta[static_cast<std::size_t>(L + 1)] = prof.tail;
    for (std::int64_t m = L; m >= 0; --m)
        prof.theta[static_cast<std::size_t>(m)] =
            prof.theta[static_cast<std::size_t>(m + 1)] + prof.delta[static_cast<std::size_t>(m)].delta;
    prof.long_range = !std::isfinite(prof.theta[0]);
}

}  // namespace

std::string DecayFit::describe() const {
    std::ostringstream os;
    switch (family) {
        case DecayFamily::none: os << "none"; break;
        case DecayFamily::zero: os << "zero beyond support"; break;
        case DecayFamily::geometric: os << "geometric rho=" << std::exp(slope); break;
        case DecayFamily::power_log: os << "power-log beta=" << beta << " A=" << A; break;
    }
    os << " (points=" << points << ", AICc=" << aicc << " vs " << aicc_other << ")";
    return os.str();
}

DeltaEstimate estimate_delta(const CausalProcess& proc, std::int64_t j, double p, const Seed& seed,
                             const DeltaOptions& opt) {
    check_moment(proc, p);
    DeltaEstimate est;
    est.j = j;
    est.n_reps = opt.replications;
    const std::int64_t L = opt.lag_budget;
    if (j > L) {
        est.beyond_window = true;
        est.delta = kNaN;
        est.se = kNaN;
        return est;
    }
    if (j < 0) return est;  // causal: X_j does not see eps_0
    check_lag_budget(proc, L);
    if (opt.replications < 2) throw std::invalid_argument("estimate_delta: need at least 2 replications");
    const std::int64_t mem = proc.memory();
    const std::int64_t window_lags = mem >= 0 ? std::max(j, std::min(L, mem)) : L;
    const auto uj = static_cast<std::uint64_t>(j);
    std::vector<double> d(opt.replications);
    parallel_for(opt.replications, opt.workers, [&](std::size_t r) {
        Seed panel_seed{seed.master, derive_stream(streams::panel, uj), r};
        Seed other_seed{seed.master, derive_stream(streams::coupled, uj), r};
        auto w = draw_window(panel_seed, proc.law(), j, window_lags);
        double x = proc.evaluate(w, j, window_lags);
        InnovationWindow w2 = opt.mode == CouplingMode::common_random_numbers
                                  ? couple_at(w, 0, other_seed, proc.law())
                                  : draw_window(other_seed, proc.law(), j, window_lags);
        double x2 = proc.evaluate(w2, j, window_lags);
        d[r] = std::pow(std::abs(x - x2), p);
    });
    double m = mean(d);
    double s = sample_sd(d) / std::sqrt(static_cast<double>(d.size()));
    est.delta = std::pow(m, 1.0 / p);
    est.se = m > 0.0 ? std::pow(m, 1.0 / p - 1.0) * s / p : 0.0;
    return est;
}

DependenceProfile estimate_profile(const CausalProcess& proc, double p, const Seed& seed, const DeltaOptions& opt) {
    check_moment(proc, p);
    const std::int64_t L = opt.lag_budget;
    if (L < 0) throw std::invalid_argument("estimate_profile: negative lag budget");
    // Recursive processes get their burn-in prepended below, so any L is admissible.
    if (proc.memory() >= 0) check_lag_budget(proc, std::max(L, proc.memory()));
    const std::size_t N = opt.replications;
    if (N < 2) throw std::invalid_argument("estimate_profile: need at least 2 replications");
    const std::int64_t mem = proc.memory();
    // Lags past a finite memory give identical coupled paths, so delta is exactly 0 there.
    const std::int64_t J = mem >= 0 ? std::min(L, mem) : L;
    const std::int64_t history = mem >= 0 ? mem : proc.min_lag();
    const auto cells = static_cast<std::size_t>(J + 1);

    const std::size_t batches = std::min<std::size_t>(100, std::max<std::size_t>(2, N / 10));
    std::vector<std::vector<double>> sum(batches, std::vector<double>(cells, 0.0));
    std::vector<std::vector<double>> sum_sq(batches, std::vector<double>(cells, 0.0));
    std::vector<std::size_t> counts(batches, 0);
    const std::uint64_t panel_stream = derive_stream(streams::panel, 0xD1FF);
    const std::uint64_t other_stream = derive_stream(streams::coupled, 0xD1FF);

    parallel_for(batches, opt.workers, [&](std::size_t b) {
        std::size_t lo = N * b / batches, hi = N * (b + 1) / batches;
        counts[b] = hi - lo;
        for (std::size_t r = lo; r < hi; ++r) {
            Seed ps{seed.master, panel_stream, r};
            auto panel = draw_window(ps, proc.law(), J, J + history);
            std::vector<double> x, x2;
            if (opt.mode == CouplingMode::common_random_numbers) {
                x = proc.evaluate_range(panel, 0, J);
                auto coupled = couple_at(panel, 0, Seed{seed.master, other_stream, r}, proc.law());
                x2 = proc.evaluate_range(coupled, 0, J);
            } else {
                x = proc.evaluate_range(panel, 0, J);
                auto other = draw_window(Seed{seed.master, other_stream, r}, proc.law(), J, J + history);
                x2 = proc.evaluate_range(other, 0, J);
            }
            for (std::size_t j = 0; j < cells; ++j) {
                double v = std::pow(std::abs(x[j] - x2[j]), p);
                sum[b][j] += v;
                sum_sq[b][j] += v * v;
            }
        }
    });

    DependenceProfile prof;
    prof.process = proc.name();
    prof.p = p;
    prof.L = L;
    prof.delta.resize(static_cast<std::size_t>(L + 1));
    std::vector<double> m_hat(cells), weight(cells);
    const double n = static_cast<double>(N);
    for (std::size_t j = 0; j < cells; ++j) {
        double s = 0.0, s2 = 0.0;
        for (std::size_t b = 0; b < batches; ++b) {
            s += sum[b][j];
            s2 += sum_sq[b][j];
        }
        double m = s / n;
        double var = std::max(0.0, (s2 - n * m * m) / (n - 1.0));
        m_hat[j] = m;
        weight[j] = m > 0.0 ? std::pow(m, 1.0 / p - 1.0) / p : 0.0;
        auto& e = prof.delta[j];
        e.j = static_cast<std::int64_t>(j);
        e.delta = std::pow(m, 1.0 / p);
        e.se = weight[j] * std::sqrt(var / n);
        e.n_reps = N;
    }
    for (std::int64_t j = J + 1; j <= L; ++j) prof.delta[static_cast<std::size_t>(j)] = {j, 0.0, 0.0, N, false};

    finish_profile(prof, &proc);

    // Linearized batch means for the SE of Theta: captures the correlation across j.
    prof.theta_se.assign(static_cast<std::size_t>(L + 2), 0.0);
    std::vector<std::vector<double>> psi(static_cast<std::size_t>(J + 1), std::vector<double>(batches, 0.0));
    for (std::size_t b = 0; b < batches; ++b) {
        double acc = 0.0;
        for (std::int64_t j = J; j >= 0; --j) {
            auto uj = static_cast<std::size_t>(j);
            double mb = sum[b][uj] / static_cast<double>(counts[b]);
            acc += weight[uj] * (mb - m_hat[uj]);
            psi[uj][b] = acc;
        }
    }
    for (std::int64_t m = 0; m <= J; ++m) {
        const auto& v = psi[static_cast<std::size_t>(m)];
        // Batches have (nearly) equal size, so Var(mean) ~ Var(batch) / batches.
        prof.theta_se[static_cast<std::size_t>(m)] = sample_sd(v) / std::sqrt(static_cast<double>(batches));
    }
    return prof;
}

DependenceProfile analytic_profile(const CausalProcess& proc, double p, std::int64_t L) {
    if (!proc.delta_oracle(0, p)) throw std::invalid_argument("analytic_profile: process '" + proc.name() + "' has no delta oracle at p");
    DependenceProfile prof;
    prof.process = proc.name();
    prof.p = p;
    prof.L = L;
    prof.delta.resize(static_cast<std::size_t>(L + 1));
    for (std::int64_t j = 0; j <= L; ++j) prof.delta[static_cast<std::size_t>(j)] = {j, *proc.delta_oracle(j, p), 0.0, 0, false};
    finish_profile(prof, &proc);
    prof.theta_se.assign(prof.theta.size(), 0.0);
    return prof;
}

std::optional<DecayFit> fit_decay(const std::vector<DeltaEstimate>& delta, double z_min) {
    std::vector<double> js, ys;
    std::int64_t last_nonzero = -1;
    for (const auto& e : delta) {
        if (e.beyond_window || !(e.delta > 0.0)) continue;
        last_nonzero = e.j;
        if (e.se > 0.0 && e.delta < z_min * e.se) continue;
        js.push_back(static_cast<double>(e.j));
        ys.push_back(std::log(e.delta));
    }
    if (!delta.empty() && last_nonzero >= 0 && last_nonzero < delta.back().j) {
        // Exact zeros from some lag on: finite support.
        bool all_zero_after = true;
        for (const auto& e : delta)
            if (e.j > last_nonzero && e.delta != 0.0) all_zero_after = false;
        if (all_zero_after && delta.back().se == 0.0) {
            DecayFit f;
            f.family = DecayFamily::zero;
            f.points = js.size();
            return f;
        }
    }
    if (js.size() < 3) return std::nullopt;
    DecayFit geo;
    geo.family = DecayFamily::geometric;
    {
        auto fit = least_squares(ys, {js});
        geo.log_c = fit.coef[0];
        geo.slope = fit.coef[1];
        geo.points = js.size();
        geo.aicc = js.size() > 3 ? aicc(fit.rss, js.size(), 2) : -kInf;
    }
    std::vector<double> lj, llj, yp;
    for (std::size_t i = 0; i < js.size(); ++i) {
        if (js[i] < 2.0) continue;
        lj.push_back(std::log(js[i]));
        llj.push_back(std::log(std::log(js[i])));
        yp.push_back(ys[i]);
    }
    if (yp.size() >= 5) {
        auto fit = least_squares(yp, {lj, llj});
        DecayFit pl;
        pl.family = DecayFamily::power_log;
        pl.log_c = fit.coef[0];
        pl.beta = -fit.coef[1];
        pl.A = -fit.coef[2];
        pl.points = yp.size();
        pl.aicc = aicc(fit.rss, yp.size(), 3);
        pl.aicc_other = geo.aicc;
        geo.aicc_other = pl.aicc;
        if (pl.aicc < geo.aicc) return pl;
    }
    if (!(geo.slope < 0.0)) return std::nullopt;
    return geo;
}

double log_theta_extrapolated(const DependenceProfile& profile, double m) {
    if (m < 0.0) m = 0.0;
    if (m <= static_cast<double>(profile.L) + 1.0) {
        double t = profile.theta[static_cast<std::size_t>(std::ceil(m))];
        return t > 0.0 ? std::log(t) : -kInf;
    }
    return log_theta_extrapolated_log(profile, std::log(m));
}

double log_theta_extrapolated_log(const DependenceProfile& profile, double log_m) {
    const double anchor = static_cast<double>(profile.L) + 1.0;
    if (log_m <= std::log(anchor)) return log_theta_extrapolated(profile, std::exp(log_m));
    if (!(profile.tail > 0.0)) return -kInf;
    if (!std::isfinite(profile.tail)) return kInf;
    const double log_tail = std::log(profile.tail);
    if (profile.fit && profile.fit->family == DecayFamily::geometric)
        return log_tail + (std::exp(log_m) - anchor) * profile.fit->slope;
    if (profile.fit && profile.fit->family == DecayFamily::power_log && profile.fit->beta > 1.0) {
        auto shape = [&](double lx) {
            lx = std::max(lx, std::log(3.0));
            return (1.0 - profile.fit->beta) * lx - profile.fit->A * std::log(lx);
        };
        return log_tail + shape(log_m) - shape(std::log(anchor));
    }
    // No usable decay shape: hold the tail constant (conservative).
    return log_tail;
}

double log_delta_extrapolated(const DependenceProfile& profile, double j) {
    if (j < 0.0) return -kInf;
    const double L = static_cast<double>(profile.L);
    if (j <= L) {
        double d = profile.delta[static_cast<std::size_t>(std::floor(j))].delta;
        return d > 0.0 ? std::log(d) : -kInf;
    }
    if (!(profile.tail > 0.0)) return -kInf;
    if (!std::isfinite(profile.tail)) return kInf;
    const double lt = log_theta_extrapolated(profile, j);
    if (profile.fit && profile.fit->family == DecayFamily::geometric)
        return lt + std::log(-std::expm1(profile.fit->slope));
    if (profile.fit && profile.fit->family == DecayFamily::power_log && profile.fit->beta > 1.0) {
        double x = std::max(j, 3.0);
        double step = -(profile.fit->beta - 1.0) * std::log1p(1.0 / x) -
                      profile.fit->A * std::log1p(std::log1p(1.0 / x) / std::log(x));
        return lt + std::log(-std::expm1(step));
    }
    return -kInf;
}

double theta_tail(const DependenceProfile& profile, std::int64_t m) {
    if (m < 0) m = 0;
    if (m <= profile.L + 1) return profile.theta[static_cast<std::size_t>(m)];
    return std::exp(log_theta_extrapolated(profile, static_cast<double>(m)));
}

std::optional<double> predictive_measure(const CausalProcess& proc, std::int64_t i) {
    if (!proc.oracles().predictive) return std::nullopt;
    return proc.oracles().predictive(i);
}

}  // namespace kmtdep
