#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "nearcrit/degree_model.hpp"
#include "nearcrit/errors.hpp"
#include "nearcrit/numerics.hpp"
#include "nearcrit/rng.hpp"

namespace nearcrit {

// phi(x) = e^{-x} - 1 + x; expm1 keeps the small-x cancellation at bay.
inline double phi(double x) { return std::expm1(-x) + x; }

struct SurvivalSolution {
    double rho = 0;       // survival probability
    double alpha = 0;     // -log(1 - rho)
    double residual = 0;  // |E(1-rho)^X - (1-rho)|
    int iterations = 0;
    double bracket = 0;   // final bisection interval width
};

namespace detail {

// E(1-rho)^X - (1-rho), evaluated in long double. Powers go through
// exp(k log1p(-rho)) and are summed in descending-k order (ascending
// magnitude) with compensation.
inline long double fixed_point_gap(const OffspringDistribution& dist, long double rho) {
    const long double l = std::log1p(-rho);
    CompensatedSum<long double> s;
    for (auto it = dist.pmf.rbegin(); it != dist.pmf.rend(); ++it) {
        s.add(it->second * std::exp(static_cast<long double>(it->first) * l));
    }
    return s.value() - (1.0L - rho);
}

} // namespace detail

// Unique root of 1 - rho = E(1-rho)^X in (0,1] when E X > 1; rho = 0 when
// E X <= 1. Bisection: the generating function is convex, so the gap changes
// sign exactly once on (0,1). Internals run in long double so that families
// with eps ~ 1/n stay resolvable (root conditioning degrades like 1/eps).
inline SurvivalSolution solve_rho(const OffspringDistribution& dist) {
    if (dist.pmf.size() == 1 && dist.pmf.front().first == 1)
        throw degenerate_offspring_error("P(X=1)=1: every point is a fixed point");
    SurvivalSolution sol;
    const long double eps = dist.mean - 1.0L;
    if (eps <= 0.0L) return sol;
    long double lo = 0.0L, hi = 1.0L;
    constexpr int kIters = 64;
    for (int i = 0; i < kIters; ++i) {
        const long double mid = 0.5L * (lo + hi);
        if (detail::fixed_point_gap(dist, mid) < 0.0L) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const long double rho = 0.5L * (lo + hi);
    sol.rho = static_cast<double>(rho);
    sol.alpha = static_cast<double>(-std::log1p(-rho));
    sol.residual = static_cast<double>(std::fabs(detail::fixed_point_gap(dist, rho)));
    sol.iterations = kIters;
    sol.bracket = static_cast<double>(hi - lo);
    return sol;
}

// rho >= 2 eps / E X(X-1) for any supercritical law; tight for support in {0,1,2}.
inline double survival_lower_bound(const OffspringDistribution& dist) {
    const long double eps = dist.mean - 1.0L;
    if (eps <= 0.0L) throw invalid_parameter_error("survival_lower_bound: mean > 1 required");
    const long double fs = dist.factorial_second();
    if (fs <= 0.0L)
        throw degenerate_offspring_error("mean > 1 with E X(X-1) = 0 is inconsistent");
    return static_cast<double>(2.0L * eps / fs);
}

// eps / E[X ^ (rho X^2)]: stays in a fixed band along a near-critical family.
inline double balance_ratio(const OffspringDistribution& dist, double rho) {
    if (!(rho > 0.0 && rho < 1.0)) throw invalid_parameter_error("balance_ratio: rho in (0,1)");
    CompensatedSum<long double> s;
    for (auto it = dist.pmf.rbegin(); it != dist.pmf.rend(); ++it) {
        const long double k = static_cast<long double>(it->first);
        s.add(it->second * std::min(k, static_cast<long double>(rho) * k * k));
    }
    return static_cast<double>((dist.mean - 1.0L) / s.value());
}

enum class regime_kind {
    subcritical,
    bounded_second_moment,        // E X_n^2 = O(1): rho ~ eps up to constants
    convergent_second_moment,     // E X_n^2 -> E X^2 < oo: rho ~ 2 eps / E X(X-1)
    infinite_limit_second_moment, // E X^2 = oo in the limit: rho = o(eps), no rate
    bounded_max,                  // eps Delta = o(E X^2): rho ~ eps / E X^2 up to constants
    power_law,                    // tail-exponent regime; see fit_survival_exponent
};

inline const char* regime_name(regime_kind r) {
    switch (r) {
        case regime_kind::subcritical: return "subcritical";
        case regime_kind::bounded_second_moment: return "bounded-second-moment";
        case regime_kind::convergent_second_moment: return "convergent-second-moment";
        case regime_kind::infinite_limit_second_moment: return "infinite-limit-second-moment";
        case regime_kind::bounded_max: return "bounded-max";
        case regime_kind::power_law: return "power-law";
    }
    return "?";
}

struct RegimePrediction {
    regime_kind regime = regime_kind::subcritical;
    double predicted_lower = 0;  // order-of-magnitude envelope for rho (last law)
    double predicted_upper = 0;
    double predicted_value = 0;  // set when has_value
    bool has_value = false;
    double lower_bound = 0;      // 2 eps / E X(X-1) of the last law
    bool flagged = false;        // criteria conflicted; envelope is the universal one
    std::string note;
};

// Finite-n regime diagnostics over a family of laws indexed by n (ascending,
// at least 3 entries). Decision rules, all on observable moments:
//   * last eps <= 0                             -> subcritical, rho = 0.
//   * E X^2 bounded across the grid (ratio <= 1.5):
//       - tail second moment E[X^2; X>1000] < 1% of E X^2 and E X^2 stable
//         to 2% over the last step -> convergent-second-moment, with the
//         point prediction 2 eps / E X(X-1);
//       - otherwise bounded-second-moment (uniform integrability failed).
//   * E X^2 growing:
//       - eps*Delta/E X^2 decreasing with last value <= 0.2 -> bounded-max;
//       - else if no single atom carries half of E X^2 -> infinite-limit
//         (rho strictly smaller order than eps; the theory gives no rate);
//       - else conflicted: universal envelope [2 eps/E X(X-1), C eps] under
//         the bounded-second-moment label, flagged.
// The envelope constants (C = 4 or 2/P(X!=1), band 10 for bounded-max) are
// reporting conventions, not proved bounds.
inline RegimePrediction classify_regime(
    std::span<const std::pair<long long, OffspringDistribution>> family) {
    if (family.size() < 3)
        throw insufficient_data_error("classify_regime: at least 3 laws required");
    const OffspringDistribution& last = family.back().second;
    RegimePrediction out;
    const double eps = static_cast<double>(last.mean - 1.0L);
    if (eps <= 0.0) {
        out.regime = regime_kind::subcritical;
        out.note = "eps <= 0: extinction is certain";
        return out;
    }
    for (const auto& [n, dist] : family) {
        if (dist.mean <= 1.0L)
            throw invalid_parameter_error("classify_regime: eps > 0 required along the family");
    }
    out.lower_bound = survival_lower_bound(last);

    const double m2_first = static_cast<double>(family.front().second.second_moment);
    const double m2_last = static_cast<double>(last.second_moment);
    const double m2_prev = static_cast<double>(family[family.size() - 2].second.second_moment);
    const bool m2_bounded = m2_last <= 1.5 * m2_first;

    double tail_m2 = 0.0, spike_m2 = 0.0;
    for (const auto& [k, p] : last.pmf) {
        const double contrib = static_cast<double>(p) * static_cast<double>(k) * static_cast<double>(k);
        spike_m2 = std::max(spike_m2, contrib);
        if (k > 1000) tail_m2 += contrib;
    }
    const double p_not_one = static_cast<double>(1.0L - last.prob_of(1));
    const double universal_upper = eps * std::max(4.0, p_not_one > 0 ? 2.0 / p_not_one : 4.0);

    if (m2_bounded) {
        const bool stable = std::abs(m2_last - m2_prev) <= 0.02 * m2_last;
        const bool uniformly_integrable = tail_m2 < 0.01 * m2_last;
        if (stable && uniformly_integrable) {
            out.regime = regime_kind::convergent_second_moment;
            out.predicted_value = static_cast<double>(2.0L * (last.mean - 1.0L) / last.factorial_second());
            out.has_value = true;
            out.predicted_lower = out.predicted_upper = out.predicted_value;
            return out;
        }
        out.regime = regime_kind::bounded_second_moment;
        out.predicted_lower = out.lower_bound;
        out.predicted_upper = universal_upper;
        if (!uniformly_integrable) out.note = "second moment bounded but mass escapes to large k";
        return out;
    }

    // E X^2 grows along the family.
    bool ratio_decreasing = true;
    double prev_ratio = std::numeric_limits<double>::infinity();
    double last_ratio = 0.0;
    for (const auto& [n, dist] : family) {
        const double r = static_cast<double>((dist.mean - 1.0L) *
                                             static_cast<long double>(dist.max_support) /
                                             dist.second_moment);
        if (r > prev_ratio) ratio_decreasing = false;
        prev_ratio = r;
        last_ratio = r;
    }
    if (ratio_decreasing && last_ratio <= 0.2) {
        out.regime = regime_kind::bounded_max;
        const double scale = static_cast<double>((last.mean - 1.0L) / last.factorial_second());
        out.predicted_lower = 2.0 * scale;
        out.predicted_upper = 10.0 * scale;
        return out;
    }
    if (spike_m2 < 0.5 * m2_last) {
        out.regime = regime_kind::infinite_limit_second_moment;
        out.predicted_lower = 0.0;
        out.predicted_upper = eps;
        out.note = "rho of strictly smaller order than eps; no rate available";
        return out;
    }
    out.regime = regime_kind::bounded_second_moment;
    out.predicted_lower = out.lower_bound;
    out.predicted_upper = universal_upper;
    out.flagged = true;
    out.note = "diagnostics conflict (single escaping atom dominates E X^2); universal envelope";
    return out;
}

struct ExponentFit {
    double slope = 0;
    double intercept = 0;
    std::size_t points = 0;
};

// Least-squares slope of log rho against log eps.
inline ExponentFit fit_survival_exponent(std::span<const std::pair<double, double>> eps_rho) {
    if (eps_rho.size() < 3)
        throw insufficient_data_error("fit_survival_exponent: at least 3 (eps,rho) pairs required");
    std::vector<double> x, y;
    x.reserve(eps_rho.size());
    y.reserve(eps_rho.size());
    for (const auto& [e, r] : eps_rho) {
        if (!(e > 0.0) || !(r > 0.0))
            throw invalid_parameter_error("fit_survival_exponent: eps and rho must be positive");
        x.push_back(std::log(e));
        y.push_back(std::log(r));
    }
    const LinearFit fit = least_squares(x, y);
    return {fit.slope, fit.intercept, eps_rho.size()};
}

// Sweep the size-biased power-law family (tail exponent beta = gamma - 1,
// mean pinned to 1 + eps through the 0->1 mass shift) and fit the exponent.
// gamma in (2,3) should give 1/(gamma-2); gamma > 3 gives 1.
inline ExponentFit survival_exponent_for_gamma(double gamma, std::span<const double> eps_values) {
    if (!(gamma > 2.0)) throw invalid_parameter_error("survival_exponent_for_gamma: gamma > 2 required");
    if (eps_values.size() < 3)
        throw insufficient_data_error("survival_exponent_for_gamma: at least 3 eps values required");
    const double beta = gamma - 1.0;
    double eps_min = eps_values.front();
    for (double e : eps_values) eps_min = std::min(eps_min, e);
    const auto cutoff = [&](double e) {
        const double m = std::ceil(std::pow(e, -1.0 / (beta - 1.0)));
        if (!(m < 1e15))
            throw invalid_parameter_error("survival_exponent_for_gamma: support cutoff too large");
        return static_cast<long long>(m);
    };
    const OffspringDistribution base = heavy_tail_offspring_base(beta, 64 * cutoff(eps_min));
    std::vector<std::pair<double, double>> pairs;
    for (double e : eps_values) {
        const OffspringDistribution law = truncated_family(base, e, cutoff(e));
        pairs.emplace_back(e, solve_rho(law).rho);
    }
    return fit_survival_exponent(pairs);
}

struct McExtinctionResult {
    double estimate = 0;   // survival estimate
    double stderr_ = 0;    // binomial standard error
    long long trials = 0;
    long long survived = 0;
};

namespace detail {

// One generation step. Small populations draw individuals from the alias
// table; large ones sample the multinomial type counts with sequential
// binomials (exact, O(#atoms) instead of O(Z)).
inline long long next_generation(const OffspringDistribution& dist, const AliasTable& alias,
                                 long long z, Rng& rng) {
    const std::size_t atoms = dist.pmf.size();
    if (static_cast<std::size_t>(z) <= 8 * atoms) {
        long long total = 0;
        for (long long i = 0; i < z; ++i) total += dist.pmf[alias.sample(rng)].first;
        return total;
    }
    long long total = 0;
    long long remaining = z;
    double mass_left = 1.0;
    for (std::size_t j = 0; j + 1 < atoms && remaining > 0; ++j) {
        const double p = std::clamp(static_cast<double>(dist.pmf[j].second) / mass_left, 0.0, 1.0);
        std::binomial_distribution<long long> bin(remaining, p);
        const long long c = bin(rng);
        total += c * dist.pmf[j].first;
        remaining -= c;
        mass_left -= static_cast<double>(dist.pmf[j].second);
    }
    total += remaining * dist.pmf.back().first;
    return total;
}

} // namespace detail

// Monte Carlo oracle for solve_rho: a trial survives when its population
// exceeds population_cap before dying out (or hitting generation_cap).
inline McExtinctionResult mc_extinction(const OffspringDistribution& dist, long long trials,
                                        long long generation_cap, long long population_cap,
                                        std::uint64_t seed, int threads = 1) {
    if (trials < 1) throw invalid_parameter_error("mc_extinction: trials >= 1 required");
    std::vector<double> weights;
    weights.reserve(dist.pmf.size());
    for (const auto& [k, p] : dist.pmf) weights.push_back(static_cast<double>(p));
    const AliasTable alias(weights);

    std::atomic<long long> survived{0};
    std::atomic<long long> next_trial{0};
    const int nthreads = std::max(1, threads);
    auto worker = [&]() {
        long long local = 0;
        for (;;) {
            const long long t = next_trial.fetch_add(1);
            if (t >= trials) break;
            Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(t));
            long long z = 1;
            for (long long gen = 0; gen < generation_cap && z > 0; ++gen) {
                if (z > population_cap) break;
                z = detail::next_generation(dist, alias, z, rng);
            }
            if (z > population_cap) ++local;
        }
        survived.fetch_add(local);
    };
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(nthreads));
        for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    McExtinctionResult res;
    res.trials = trials;
    res.survived = survived.load();
    res.estimate = static_cast<double>(res.survived) / static_cast<double>(trials);
    res.stderr_ = std::sqrt(std::max(0.0, res.estimate * (1.0 - res.estimate) /
                                              static_cast<double>(trials)));
    return res;
}

} // namespace nearcrit
