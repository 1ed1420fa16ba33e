#include "kmtdep/processes.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>

#include "kmtdep/stats.hpp"

namespace kmtdep {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

bool is_even_integer(double p) { return p >= 2.0 && std::floor(p) == p && static_cast<long>(p) % 2 == 0; }

std::uint64_t to_bit(double eps) { return eps > 0.5 ? 1ULL : 0ULL; }

double doubling_g(const DoublingMapSpec& spec, std::uint64_t w) {
    if (spec.haar) return spec.haar->evaluate_bits(w, spec.bit_depth);
    return spec.g(std::ldexp(static_cast<double>(w), -spec.bit_depth));
}

double doubling_g_real(const DoublingMapSpec& spec, double u) {
    if (spec.haar) return spec.haar->evaluate(u);
    return spec.g(u);
}

template <class F>
double integrate_panels(F&& f, double a, double b, int panels) {
    double h = (b - a) / panels;
    std::vector<double> parts(static_cast<std::size_t>(panels));
    for (int k = 0; k < panels; ++k)
        parts[static_cast<std::size_t>(k)] =
            boost::math::quadrature::gauss<double, 10>::integrate(f, a + k * h, a + (k + 1) * h);
    return pairwise_sum(parts);
}

}  // namespace

int VolterraSpec::max_order() const {
    int k = 0;
    for (const auto& t : terms) k = std::max<int>(k, static_cast<int>(t.lags.size()));
    return k;
}

std::int64_t VolterraSpec::max_lag() const {
    std::int64_t m = 0;
    for (const auto& t : terms)
        if (!t.lags.empty()) m = std::max(m, t.lags.back());
    return m;
}

double HaarExpansion::evaluate(double u) const {
    if (!(u >= 0.0 && u < 1.0)) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        double scaled = std::ldexp(u, static_cast<int>(i));
        auto cell = static_cast<std::size_t>(std::floor(scaled));
        if (cell >= levels[i].size()) continue;
        double c = levels[i][cell];
        if (c == 0.0) continue;
        double frac = scaled - static_cast<double>(cell);
        s += c * std::sqrt(std::ldexp(1.0, static_cast<int>(i))) * (frac < 0.5 ? 1.0 : -1.0);
    }
    return s;
}

double HaarExpansion::evaluate_bits(std::uint64_t w, int bit_depth) const {
    double s = 0.0;
    for (std::size_t i = 0; i < levels.size() && static_cast<int>(i) < bit_depth; ++i) {
        int level = static_cast<int>(i);
        std::uint64_t cell = level == 0 ? 0 : (w >> (bit_depth - level));
        if (cell >= levels[i].size()) continue;
        double c = levels[i][cell];
        if (c == 0.0) continue;
        std::uint64_t bit = (w >> (bit_depth - 1 - level)) & 1ULL;
        s += c * std::sqrt(std::ldexp(1.0, level)) * (bit ? -1.0 : 1.0);
    }
    return s;
}

CausalProcess::CausalProcess(std::string name, InnovationLaw law, Spec spec, ProcessOracles oracles)
    : name_(std::move(name)), law_(law), spec_(std::move(spec)), oracles_(std::move(oracles)) {
    std::visit(overloaded{
                   [](const LinearSpec& s) {
                       if (s.coefficients.empty()) throw std::invalid_argument("linear process needs coefficients");
                   },
                   [](const IRFSpec& s) {
                       if (!s.map) throw std::invalid_argument("iterated random function needs a map");
                       if (s.burn_in < 0) throw std::invalid_argument("burn_in must be nonnegative");
                   },
                   [this](const VolterraSpec& s) {
                       if (!law_.centered()) throw std::invalid_argument("Volterra innovations must have mean zero");
                       for (const auto& t : s.terms) {
                           if (t.lags.empty()) throw std::invalid_argument("Volterra term without lags");
                           if (t.lags.front() < 0) throw std::invalid_argument("Volterra lags must be >= 0");
                           for (std::size_t i = 1; i < t.lags.size(); ++i)
                               if (t.lags[i] <= t.lags[i - 1])
                                   throw std::invalid_argument("Volterra lags must be strictly increasing");
                       }
                   },
                   [this](const DoublingMapSpec& s) {
                       if (law_.kind() != LawKind::bernoulli_half)
                           throw std::invalid_argument("doubling map needs bernoulli_half innovations");
                       if (s.bit_depth < 1 || s.bit_depth > 63) throw std::invalid_argument("bit_depth must be in [1, 63]");
                       if (!s.g && !s.haar) throw std::invalid_argument("doubling map needs g or Haar coefficients");
                       if (s.haar) {
                           if (static_cast<int>(s.haar->levels.size()) > s.bit_depth)
                               throw std::invalid_argument("Haar levels exceed bit_depth");
                           for (std::size_t i = 0; i < s.haar->levels.size(); ++i)
                               if (s.haar->levels[i].size() > (std::size_t{1} << i))
                                   throw std::invalid_argument("Haar level " + std::to_string(i) + " has more than 2^i coefficients");
                       }
                   },
               },
               spec_);

    // Closed-form oracles for the finite-memory families.
    if (const auto* lin = std::get_if<LinearSpec>(&spec_); lin && law_.centered()) {
        const auto a = lin->coefficients;
        const double v = law_.variance();
        const auto law = law_;
        if (!oracles_.delta)
            oracles_.delta = [a, law](std::int64_t j, double p) {
                if (j < 0 || j >= static_cast<std::int64_t>(a.size())) return 0.0;
                auto d = law.coupled_difference_norm(p);
                return d ? std::abs(a[static_cast<std::size_t>(j)]) * *d : std::numeric_limits<double>::quiet_NaN();
            };
        if (!oracles_.autocov)
            oracles_.autocov = [a, v](std::int64_t h) {
                h = std::abs(h);
                double s = 0.0;
                for (std::size_t j = 0; j + static_cast<std::size_t>(h) < a.size(); ++j) s += a[j] * a[j + static_cast<std::size_t>(h)];
                return v * s;
            };
        if (!oracles_.predictive)
            oracles_.predictive = [a, v](std::int64_t i) {
                if (i < 0 || i >= static_cast<std::int64_t>(a.size())) return 0.0;
                return std::abs(a[static_cast<std::size_t>(i)]) * std::sqrt(v);
            };
        if (!oracles_.sigma2) {
            double s = std::accumulate(a.begin(), a.end(), 0.0);
            oracles_.sigma2 = v * s * s;
        }
        if (!oracles_.second_moment) oracles_.second_moment = oracles_.autocov(0);
        oracles_.symmetric = law_.symmetric();
    }
    if (const auto* vol = std::get_if<VolterraSpec>(&spec_)) {
        const double v = law_.variance();
        std::map<std::vector<std::int64_t>, double> kernel;
        for (const auto& t : vol->terms) kernel[t.lags] += t.value;
        auto autocov = [kernel, v](std::int64_t h) {
            h = std::abs(h);
            double s = 0.0;
            for (const auto& [lags, g] : kernel) {
                std::vector<std::int64_t> shifted = lags;
                for (auto& l : shifted) l += h;
                auto it = kernel.find(shifted);
                if (it != kernel.end()) s += g * it->second * std::pow(v, static_cast<double>(lags.size()));
            }
            return s;
        };
        if (!oracles_.autocov) oracles_.autocov = autocov;
        if (!oracles_.sigma2) {
            double s = autocov(0);
            for (std::int64_t h = 1; h <= vol->max_lag(); ++h) s += 2.0 * autocov(h);
            oracles_.sigma2 = s;
        }
        if (!oracles_.second_moment) oracles_.second_moment = autocov(0);
        const VolterraSpec spec_copy = *vol;
        const auto law = law_;
        if (!oracles_.delta)
            oracles_.delta = [spec_copy, law, v](std::int64_t j, double p) {
                int K = spec_copy.max_order();
                if (p == 2.0) {
                    double s = 0.0;
                    for (int k = 1; k <= K; ++k) s += std::pow(v, k) * volterra_Qnk(spec_copy, j, k);
                    return std::sqrt(2.0 * s);
                }
                if (K == 1) {
                    auto d = law.coupled_difference_norm(p);
                    if (d) return std::sqrt(volterra_Qnk(spec_copy, j, 1)) * *d;
                }
                return std::numeric_limits<double>::quiet_NaN();
            };
        bool all_odd = true;
        for (const auto& t : vol->terms) all_odd = all_odd && (t.lags.size() % 2 == 1);
        oracles_.symmetric = all_odd && law_.symmetric();
    }
}

std::int64_t CausalProcess::memory() const {
    return std::visit(overloaded{
                          [](const LinearSpec& s) { return static_cast<std::int64_t>(s.coefficients.size()) - 1; },
                          [](const IRFSpec&) { return std::int64_t{-1}; },
                          [](const VolterraSpec& s) { return s.max_lag(); },
                          [](const DoublingMapSpec& s) {
                              if (s.haar && !s.g) return std::max<std::int64_t>(0, static_cast<std::int64_t>(s.haar->levels.size()) - 1);
                              return static_cast<std::int64_t>(s.bit_depth - 1);
                          },
                      },
                      spec_);
}

std::int64_t CausalProcess::min_lag() const {
    if (const auto* irf = std::get_if<IRFSpec>(&spec_)) return irf->burn_in;
    return memory();
}

double CausalProcess::tail_bound(std::int64_t L) const {
    if (L < 0) return kInf;
    return std::visit(
        overloaded{
            [&](const LinearSpec& s) {
                double t = 0.0;
                for (std::size_t j = static_cast<std::size_t>(L) + 1; j < s.coefficients.size(); ++j)
                    t += s.coefficients[j] * s.coefficients[j];
                return std::sqrt(t * law_.variance());
            },
            [&](const IRFSpec&) {
                auto l2 = contraction(2.0);
                auto m2 = second_moment();
                if (!l2 || !m2 || !(*l2 < 1.0)) return kInf;
                return std::pow(*l2, static_cast<double>(L + 1)) * std::sqrt(*m2);
            },
            [&](const VolterraSpec& s) {
                double t = 0.0;
                for (const auto& term : s.terms)
                    if (term.lags.back() > L)
                        t += term.value * term.value * std::pow(law_.variance(), static_cast<double>(term.lags.size()));
                return std::sqrt(t);
            },
            [&](const DoublingMapSpec& s) {
                if (s.haar && !s.g) {
                    double l2 = 0.0, sup = 0.0;
                    for (std::size_t i = static_cast<std::size_t>(L) + 1; i < s.haar->levels.size(); ++i) {
                        double mx = 0.0;
                        for (double c : s.haar->levels[i]) {
                            l2 += c * c;
                            mx = std::max(mx, std::abs(c));
                        }
                        sup += mx * std::sqrt(std::ldexp(1.0, static_cast<int>(i)));
                    }
                    return std::sqrt(l2) + sup;
                }
                if (!s.lipschitz) return L >= s.bit_depth - 1 ? 0.0 : kInf;
                // Bits beyond the budget (and beyond bit_depth) move U by at most 2^{-(L+1)}.
                std::int64_t eff = std::min<std::int64_t>(L, s.bit_depth - 1);
                return *s.lipschitz * std::ldexp(1.0, -static_cast<int>(eff + 1));
            },
        },
        spec_);
}

double CausalProcess::evaluate(const InnovationWindow& w, std::int64_t t, std::int64_t L) const {
    if (!w.contains(t) || !w.contains(t - L))
        throw std::out_of_range("evaluate: window does not cover [t - L, t]");
    return std::visit(
        overloaded{
            [&](const LinearSpec& s) {
                std::int64_t J = std::min<std::int64_t>(L, static_cast<std::int64_t>(s.coefficients.size()) - 1);
                double x = 0.0;
                for (std::int64_t j = 0; j <= J; ++j) x += s.coefficients[static_cast<std::size_t>(j)] * w.at(t - j);
                return x;
            },
            [&](const IRFSpec& s) {
                double x = 0.0;
                for (std::int64_t u = t - L; u <= t; ++u) x = s.map(x, w.at(u));
                return x;
            },
            [&](const VolterraSpec& s) {
                double x = 0.0;
                for (const auto& term : s.terms) {
                    if (term.lags.back() > L) continue;
                    double prod = term.value;
                    for (auto l : term.lags) prod *= w.at(t - l);
                    x += prod;
                }
                return x;
            },
            [&](const DoublingMapSpec& s) {
                std::int64_t depth = std::min<std::int64_t>(L, s.bit_depth - 1);
                std::uint64_t word = 0;
                for (std::int64_t l = 0; l <= depth; ++l) word |= to_bit(w.at(t - l)) << (s.bit_depth - 1 - l);
                return doubling_g(s, word);
            },
        },
        spec_);
}

std::vector<double> CausalProcess::evaluate_range(const InnovationWindow& panel, std::int64_t t0, std::int64_t t1) const {
    if (t1 < t0) return {};
    if (!panel.contains(t0) || !panel.contains(t1)) throw std::out_of_range("evaluate_range: panel does not cover range");
    std::vector<double> out(static_cast<std::size_t>(t1 - t0 + 1));
    const std::int64_t first = panel.first();
    std::visit(
        overloaded{
            [&](const LinearSpec& s) {
                const auto& a = s.coefficients;
                const double* eps = panel.data();
                for (std::int64_t t = t0; t <= t1; ++t) {
                    std::int64_t J = std::min<std::int64_t>(static_cast<std::int64_t>(a.size()) - 1, t - first);
                    const double* e = eps + (t - first);
                    double x = 0.0;
                    for (std::int64_t j = 0; j <= J; ++j) x += a[static_cast<std::size_t>(j)] * e[-j];
                    out[static_cast<std::size_t>(t - t0)] = x;
                }
            },
            [&](const IRFSpec& s) {
                double x = 0.0;
                for (std::int64_t u = first; u <= t1; ++u) {
                    x = s.map(x, panel.at(u));
                    if (u >= t0) out[static_cast<std::size_t>(u - t0)] = x;
                }
            },
            [&](const VolterraSpec& s) {
                for (std::int64_t t = t0; t <= t1; ++t) {
                    double x = 0.0;
                    for (const auto& term : s.terms) {
                        if (t - term.lags.back() < first) continue;
                        double prod = term.value;
                        for (auto l : term.lags) prod *= panel.at(t - l);
                        x += prod;
                    }
                    out[static_cast<std::size_t>(t - t0)] = x;
                }
            },
            [&](const DoublingMapSpec& s) {
                const std::uint64_t mask = s.bit_depth == 64 ? ~0ULL : ((1ULL << s.bit_depth) - 1);
                std::uint64_t word = 0;
                for (std::int64_t u = first; u <= t1; ++u) {
                    word = ((word >> 1) | (to_bit(panel.at(u)) << (s.bit_depth - 1))) & mask;
                    if (u >= t0) out[static_cast<std::size_t>(u - t0)] = doubling_g(s, word);
                }
            },
        },
        spec_);
    return out;
}

std::optional<double> CausalProcess::delta_oracle(std::int64_t j, double p) const {
    if (!oracles_.delta) return std::nullopt;
    if (j < 0) return 0.0;
    double d = oracles_.delta(j, p);
    if (std::isnan(d)) return std::nullopt;
    return d;
}

std::optional<double> CausalProcess::autocov_oracle(std::int64_t h) const {
    if (!oracles_.autocov) return std::nullopt;
    return oracles_.autocov(h);
}

std::optional<double> CausalProcess::sigma2_oracle() const { return oracles_.sigma2; }

std::optional<double> CausalProcess::contraction(double p) const {
    if (const auto* irf = std::get_if<IRFSpec>(&spec_); irf && irf->contraction) return irf->contraction(p);
    return std::nullopt;
}

std::optional<double> CausalProcess::second_moment() const { return oracles_.second_moment; }

bool CausalProcess::linear_gaussian() const {
    return std::holds_alternative<LinearSpec>(spec_) && law_.kind() == LawKind::standard_normal;
}

const std::vector<double>* CausalProcess::linear_coefficients() const {
    if (const auto* lin = std::get_if<LinearSpec>(&spec_)) return &lin->coefficients;
    return nullptr;
}

void check_lag_budget(const CausalProcess& proc, std::int64_t L) {
    if (L < proc.min_lag()) {
        std::ostringstream msg;
        msg << "lag budget L=" << L << " is below the minimum " << proc.min_lag() << " for process '" << proc.name()
            << "' (tail bound at L: " << proc.tail_bound(L) << ")";
        throw std::invalid_argument(msg.str());
    }
}

InnovationWindow draw_panel(const CausalProcess& proc, const Seed& seed, std::int64_t n, std::int64_t L) {
    return draw_window(seed, proc.law(), n, n - 1 + L);
}

std::vector<double> evaluate_path(const CausalProcess& proc, const Seed& seed, std::int64_t n, std::int64_t L) {
    if (n < 1) throw std::invalid_argument("evaluate_path: n must be >= 1");
    check_lag_budget(proc, L);
    auto panel = draw_panel(proc, seed, n, L);
    return proc.evaluate_range(panel, 1, n);
}

std::int64_t default_burn_in(double contraction) {
    if (!(contraction > 0.0 && contraction < 1.0)) throw std::invalid_argument("default_burn_in: contraction must be in (0, 1)");
    return static_cast<std::int64_t>(std::ceil(60.0 / std::abs(std::log(contraction))));
}

CausalProcess make_linear(std::vector<double> coefficients, InnovationLaw law, std::string name) {
    return CausalProcess(std::move(name), law, LinearSpec{std::move(coefficients)});
}

CausalProcess make_iid(InnovationLaw law) { return make_linear({1.0}, law, "iid_" + law.name()); }

CausalProcess make_ma1(double theta, InnovationLaw law) { return make_linear({1.0, theta}, law, "ma1"); }

CausalProcess make_ar1_linear(double rho, InnovationLaw law, double tol) {
    if (!(std::abs(rho) < 1.0)) throw std::invalid_argument("AR(1) needs |rho| < 1");
    std::vector<double> a{1.0};
    if (rho != 0.0) {
        const double tail_scale = 1.0 / std::sqrt(1.0 - rho * rho);
        while (std::abs(a.back() * rho) * tail_scale >= tol) a.push_back(a.back() * rho);
    }
    return make_linear(std::move(a), law, "ar1_linear");
}

CausalProcess make_ar1_irf(double rho, InnovationLaw law, std::int64_t burn_in) {
    if (!(std::abs(rho) < 1.0)) throw std::invalid_argument("AR(1) needs |rho| < 1");
    IRFSpec spec;
    spec.map = [rho](double x, double e) { return rho * x + e; };
    spec.contraction = [rho](double) { return std::abs(rho); };
    spec.burn_in = burn_in > 0 ? burn_in : (rho == 0.0 ? 1 : default_burn_in(std::abs(rho)));
    ProcessOracles o;
    const double v = law.variance();
    if (law.centered()) {
        o.delta = [rho, law](std::int64_t j, double p) {
            auto d = law.coupled_difference_norm(p);
            return d ? std::pow(std::abs(rho), static_cast<double>(j)) * *d : std::numeric_limits<double>::quiet_NaN();
        };
        o.autocov = [rho, v](std::int64_t h) { return std::pow(rho, static_cast<double>(std::abs(h))) * v / (1.0 - rho * rho); };
        o.predictive = [rho, v](std::int64_t i) {
            return i < 0 ? 0.0 : std::pow(std::abs(rho), static_cast<double>(i)) * std::sqrt(v);
        };
        o.sigma2 = v / ((1.0 - rho) * (1.0 - rho));
        o.second_moment = v / (1.0 - rho * rho);
        o.symmetric = law.symmetric();
    }
    return CausalProcess("ar1_irf", law, std::move(spec), std::move(o));
}

CausalProcess make_tar(double a_pos, double a_neg, InnovationLaw law, std::int64_t burn_in) {
    double l = std::max(std::abs(a_pos), std::abs(a_neg));
    if (!(l < 1.0)) throw std::invalid_argument("TAR needs max(|a_pos|, |a_neg|) < 1");
    IRFSpec spec;
    spec.map = [a_pos, a_neg](double x, double e) { return (x > 0.0 ? a_pos : a_neg) * x + e; };
    spec.contraction = [l](double) { return l; };
    spec.burn_in = burn_in > 0 ? burn_in : (l == 0.0 ? 1 : default_burn_in(l));
    ProcessOracles o;
    // Upper bound: E X^2 <= Var(eps) / (1 - l^2).
    o.second_moment = law.variance() / (1.0 - l * l) + law.mean() * law.mean() / ((1.0 - l) * (1.0 - l));
    o.symmetric = law.symmetric() && a_pos == a_neg;
    return CausalProcess("tar", law, std::move(spec), std::move(o));
}

CausalProcess make_arch1(double omega, double a, InnovationLaw law, std::int64_t burn_in) {
    if (!(omega > 0.0) || !(a > 0.0)) throw std::invalid_argument("ARCH(1) needs omega > 0 and a > 0");
    const double v = law.variance();
    if (!(a * v < 1.0)) throw std::invalid_argument("ARCH(1) needs a Var(eps) < 1");
    IRFSpec spec;
    spec.map = [omega, a](double x, double e) { return std::sqrt(omega + a * x * x) * e; };
    spec.contraction = [a, law](double p) { return std::sqrt(a) * law.lp_norm(p); };
    double l2 = std::sqrt(a) * law.lp_norm(2.0);
    spec.burn_in = burn_in > 0 ? burn_in : default_burn_in(l2);
    ProcessOracles o;
    if (law.centered()) {
        o.second_moment = omega * v / (1.0 - a * v);
        // Martingale differences: uncorrelated, so sigma^2 = E X^2.
        o.sigma2 = *o.second_moment;
        o.autocov = [m2 = *o.second_moment](std::int64_t h) { return h == 0 ? m2 : 0.0; };
        o.symmetric = law.symmetric();
    }
    return CausalProcess("arch1", law, std::move(spec), std::move(o));
}

CausalProcess make_volterra(VolterraSpec spec, InnovationLaw law, std::string name) {
    return CausalProcess(std::move(name), law, std::move(spec));
}

CausalProcess make_doubling(std::function<double(double)> g, std::optional<double> lipschitz, int bit_depth,
                            std::string name) {
    DoublingMapSpec spec;
    spec.g = std::move(g);
    spec.lipschitz = lipschitz;
    spec.bit_depth = bit_depth;
    return CausalProcess(std::move(name), InnovationLaw::bernoulli_half(), std::move(spec));
}

CausalProcess make_doubling_haar(HaarExpansion haar, int bit_depth, std::string name) {
    DoublingMapSpec spec;
    spec.haar = std::move(haar);
    spec.bit_depth = bit_depth;
    ProcessOracles o;
    double m2 = 0.0;
    for (const auto& lvl : spec.haar->levels)
        for (double c : lvl) m2 += c * c;
    o.second_moment = m2;
    return CausalProcess(std::move(name), InnovationLaw::bernoulli_half(), std::move(spec), std::move(o));
}

CausalProcess make_doubling_identity(int bit_depth) {
    DoublingMapSpec spec;
    spec.g = [](double u) { return u - 0.5; };
    spec.lipschitz = 1.0;
    spec.bit_depth = bit_depth;
    ProcessOracles o;
    // g(U_i) = U_i - 1/2 is an AR(1) with coefficient 1/2 and innovation (eps - 1/2)/2.
    o.delta = [bit_depth](std::int64_t j, double p) {
        if (j >= bit_depth) return 0.0;
        return std::ldexp(1.0, -static_cast<int>(j + 1)) * std::pow(0.5, 1.0 / p);
    };
    o.autocov = [](std::int64_t h) { return std::ldexp(1.0, -static_cast<int>(std::abs(h))) / 12.0; };
    o.sigma2 = 0.25;
    o.second_moment = 1.0 / 12.0;
    o.symmetric = true;
    return CausalProcess("doubling_identity", InnovationLaw::bernoulli_half(), std::move(spec), std::move(o));
}

CausalProcess make_doubling_haar_mother(int bit_depth) {
    DoublingMapSpec spec;
    spec.haar = HaarExpansion{{{1.0}}};
    spec.bit_depth = bit_depth;
    ProcessOracles o;
    o.delta = [](std::int64_t j, double p) { return j == 0 ? 2.0 * std::pow(0.5, 1.0 / p) : 0.0; };
    o.autocov = [](std::int64_t h) { return h == 0 ? 1.0 : 0.0; };
    o.sigma2 = 1.0;
    o.second_moment = 1.0;
    o.symmetric = true;
    return CausalProcess("doubling_haar_mother", InnovationLaw::bernoulli_half(), std::move(spec), std::move(o));
}

double volterra_Qnk(const VolterraSpec& spec, std::int64_t n, int k) {
    double s = 0.0;
    for (const auto& t : spec.terms) {
        if (static_cast<int>(t.lags.size()) != k) continue;
        if (std::find(t.lags.begin(), t.lags.end(), n) != t.lags.end()) s += t.value * t.value;
    }
    return s;
}

double volterra_default_cp(double p) { return std::pow(2.0, p) * std::tgamma(p + 1.0); }

double volterra_delta_bound(const VolterraSpec& spec, const InnovationLaw& law, std::int64_t n, double p,
                            std::optional<double> c_p) {
    if (!is_even_integer(p)) throw std::invalid_argument("volterra_delta_bound: p must be an even integer");
    double norm = law.lp_norm(p);
    if (!std::isfinite(norm)) throw std::invalid_argument("volterra_delta_bound: ||eps||_p is infinite");
    double c = c_p.value_or(volterra_default_cp(p));
    double s = 0.0;
    for (int k = 1; k <= spec.max_order(); ++k) s += std::pow(norm, 2.0 * k) * volterra_Qnk(spec, n, k);
    return c * s;
}

DoublingDelta doubling_delta_formula(const DoublingMapSpec& spec, int i, double p, int panels_per_cell) {
    if (i < 0 || i > 30) throw std::invalid_argument("doubling_delta_formula: level out of range");
    DoublingDelta out;
    const double cells = std::ldexp(1.0, i);
    const double half_cell = std::ldexp(1.0, -(i + 1));
    const auto n_cells = static_cast<std::size_t>(cells);
    std::vector<double> printed(n_cells, 0.0), flip(n_cells, 0.0);
    for (std::size_t c = 0; c < n_cells; ++c) {
        const double base = static_cast<double>(c) / cells;
        // Printed reading, j = c + 1: g(j/2^i + u/2^{i+1}) - g((j-1)/2^i + u/2^{i+1}).
        const double upper = static_cast<double>(c + 1) / cells;
        if (upper + half_cell > 1.0) {
            ++out.skipped_cells;
        } else {
            printed[c] = integrate_panels(
                [&](double u) {
                    return std::pow(std::abs(doubling_g_real(spec, upper + u * half_cell) -
                                             doubling_g_real(spec, base + u * half_cell)),
                                    p);
                },
                0.0, 1.0, panels_per_cell);
        }
        flip[c] = integrate_panels(
            [&](double u) {
                return std::pow(std::abs(doubling_g_real(spec, base + half_cell + u * half_cell) -
                                         doubling_g_real(spec, base + u * half_cell)),
                                p);
            },
            0.0, 1.0, panels_per_cell);
    }
    out.printed = 0.5 * pairwise_sum(printed);
    out.bit_flip = 0.5 * pairwise_sum(flip) / cells;
    return out;
}

double haar_delta_bound(const DoublingMapSpec& spec, int i, double p) {
    if (!spec.haar) throw std::invalid_argument("haar_delta_bound: no Haar coefficients");
    if (i < 0) throw std::invalid_argument("haar_delta_bound: negative level");
    if (static_cast<std::size_t>(i) >= spec.haar->levels.size()) return 0.0;
    double s = 0.0;
    for (double c : spec.haar->levels[static_cast<std::size_t>(i)]) s += std::pow(std::abs(c), p);
    return std::pow(2.0, i * (p / 2.0 - 1.0)) * s;
}

double doubling_mean(const DoublingMapSpec& spec, int panels) {
    return integrate_panels([&](double u) { return doubling_g_real(spec, u); }, 0.0, 1.0, panels);
}

ContractionCertificate contraction_certificate(const CausalProcess& proc, double p, int pairs, int reps,
                                               const Seed& seed) {
    const auto* irf = std::get_if<IRFSpec>(&proc.spec());
    if (!irf) throw std::invalid_argument("contraction_certificate: not an iterated random function");
    auto declared = proc.contraction(p);
    if (!declared) throw std::invalid_argument("contraction_certificate: no declared contraction");
    ContractionCertificate cert;
    cert.declared = *declared;
    const double scale = 3.0 * std::sqrt(proc.second_moment().value_or(1.0));
    CounterRng pick(seed.with_stream(streams::aux));
    CounterRng noise(seed.with_stream(derive_stream(streams::aux, 1)));
    for (int k = 0; k < pairs; ++k) {
        double x = scale * pick.normal(k, 0);
        double y = scale * pick.normal(k, 1);
        if (x == y) continue;
        std::vector<double> d(static_cast<std::size_t>(reps));
        for (int r = 0; r < reps; ++r) {
            double e = proc.law().sample(noise, static_cast<std::int64_t>(k) * reps + r);
            d[static_cast<std::size_t>(r)] = std::pow(std::abs(irf->map(x, e) - irf->map(y, e)), p);
        }
        double ratio = std::pow(mean(d), 1.0 / p) / std::abs(x - y);
        cert.estimated_sup = std::max(cert.estimated_sup, ratio);
    }
    cert.holds = cert.estimated_sup <= cert.declared * 1.02;
    return cert;
}

}  // namespace kmtdep
