#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace kmtdep {

struct Seed {
    std::uint64_t master = 0;
    std::uint64_t stream_id = 0;
    std::uint64_t replication_id = 0;

    Seed with_stream(std::uint64_t s) const { return {master, s, replication_id}; }
    Seed with_replication(std::uint64_t r) const { return {master, stream_id, r}; }
    bool operator==(const Seed&) const = default;
};

/// Stream ids used by the library. Distinct ids give independent streams.
namespace streams {
inline constexpr std::uint64_t panel = 1;
inline constexpr std::uint64_t coupled = 2;
inline constexpr std::uint64_t inner_pool = 3;
inline constexpr std::uint64_t centering = 4;
inline constexpr std::uint64_t block_law = 5;
inline constexpr std::uint64_t coupling = 6;
inline constexpr std::uint64_t longrun = 7;
inline constexpr std::uint64_t aux = 8;
}  // namespace streams

/// Mixes a label into a stream id so derived streams never collide with the
/// fixed ids above.
std::uint64_t derive_stream(std::uint64_t base, std::uint64_t label);

/// Counter-based generator: a pure function of (seed, time, slot).
class CounterRng {
  public:
    explicit CounterRng(const Seed& seed);
    std::uint64_t bits(std::int64_t t, std::uint32_t slot = 0) const;
    /// Uniform on the open interval (0, 1), 53-bit resolution.
    double uniform(std::int64_t t, std::uint32_t slot = 0) const;
    double normal(std::int64_t t, std::uint32_t slot = 0) const;

  private:
    std::uint64_t key_;
};

enum class LawKind { standard_normal, rademacher, uniform01, bernoulli_half, student_t, centered_pareto };

class InnovationLaw {
  public:
    static InnovationLaw standard_normal() { return {LawKind::standard_normal, 0.0}; }
    static InnovationLaw rademacher() { return {LawKind::rademacher, 0.0}; }
    static InnovationLaw uniform01() { return {LawKind::uniform01, 0.0}; }
    static InnovationLaw bernoulli_half() { return {LawKind::bernoulli_half, 0.0}; }
    static InnovationLaw student_t(double df);
    /// Symmetric Pareto: P(|X| > x) = x^{-tail_index} for x >= 1, random sign.
    static InnovationLaw centered_pareto(double tail_index);
    static InnovationLaw parse(const std::string& name, double param);

    LawKind kind() const { return kind_; }
    double param() const { return param_; }
    std::string name() const;

    double p_max() const;
    bool centered() const;
    bool discrete() const;
    bool symmetric() const;
    double mean() const;
    double variance() const;
    /// ||eps||_p = (E|eps|^p)^{1/p}; +inf when p >= p_max.
    double lp_norm(double p) const;
    /// ||eps - eps'||_p for an independent copy eps', when a closed form exists.
    std::optional<double> coupled_difference_norm(double p) const;

    double cdf(double x) const;
    /// P(X < x); differs from cdf only at atoms.
    double cdf_left(double x) const;
    double quantile(double u) const;
    /// Tail probability P(|X| >= t).
    double abs_tail(double t) const;

    double sample(const CounterRng& rng, std::int64_t t, std::uint32_t slot = 0) const {
        return quantile(rng.uniform(t, slot));
    }

  private:
    InnovationLaw(LawKind k, double p) : kind_(k), param_(p) {}
    LawKind kind_;
    double param_;
};

/// Innovations eps_{origin-L}, ..., eps_{origin}, indexed by absolute time.
class InnovationWindow {
  public:
    InnovationWindow() = default;
    InnovationWindow(std::int64_t origin, std::vector<double> values)
        : origin_(origin), values_(std::move(values)) {}

    std::int64_t origin() const { return origin_; }
    std::int64_t lag_budget() const { return static_cast<std::int64_t>(values_.size()) - 1; }
    std::int64_t first() const { return origin_ - lag_budget(); }
    bool contains(std::int64_t t) const { return t >= first() && t <= origin_; }
    double at(std::int64_t t) const { return values_[static_cast<std::size_t>(t - first())]; }
    double& at(std::int64_t t) { return values_[static_cast<std::size_t>(t - first())]; }
    const std::vector<double>& values() const { return values_; }
    const double* data() const { return values_.data(); }

  private:
    std::int64_t origin_ = 0;
    std::vector<double> values_;
};

InnovationWindow draw_window(const Seed& seed, const InnovationLaw& law, std::int64_t origin, std::int64_t L);

/// Copy of `window` with eps_j replaced by the draw of `seed_prime` at time j.
InnovationWindow couple_at(const InnovationWindow& window, std::int64_t j, const Seed& seed_prime,
                           const InnovationLaw& law);

}  // namespace kmtdep
