#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nearcrit/errors.hpp"
#include "nearcrit/numerics.hpp"
#include "nearcrit/rng.hpp"

namespace nearcrit {

// A degree sequence (d_i) with its per-degree counts n_k. Immutable after
// construction; build through the factories so counts and degrees agree.
struct DegreeSequence {
    std::vector<int> degrees;          // d_i, vertex i = index
    std::map<int, long long> counts;   // k -> n_k
    long long n = 0;
    long long ell = 0;                 // total half-edges, always even
    bool fixup_applied = false;        // one minimal-degree vertex bumped by 1
    long long fixup_vertex = -1;

    static DegreeSequence from_degrees(std::vector<int> d) {
        DegreeSequence seq;
        seq.degrees = std::move(d);
        seq.n = static_cast<long long>(seq.degrees.size());
        if (seq.n == 0) throw invalid_parameter_error("degree sequence must have n >= 1");
        for (int k : seq.degrees) {
            if (k < 0) throw invalid_parameter_error("negative degree");
            seq.counts[k] += 1;
            seq.ell += k;
        }
        if (seq.ell % 2 != 0) throw parity_error("sum of degrees is odd");
        return seq;
    }

    static DegreeSequence from_counts(const std::map<int, long long>& counts) {
        std::vector<int> d;
        for (const auto& [k, nk] : counts) {
            if (k < 0 || nk < 0) throw invalid_parameter_error("invalid degree count");
            d.insert(d.end(), static_cast<std::size_t>(nk), k);
        }
        return from_degrees(std::move(d));
    }
};

struct DegreeStats {
    double mu = 0;       // E D
    double nu = 0;       // E D(D-1) / E D
    double eps = 0;      // nu - 1
    double m2 = 0;       // E D^2
    double R = 0;        // E D^3
    double kappa_n = 0;  // E D(D-1)(D-2) / E D
    long long delta = 0; // max degree
    long long ell = 0;
    long long n = 0;
};

// Moments from counts, summed in descending-k order with compensation.
inline DegreeStats stats(const DegreeSequence& seq) {
    if (seq.n < 1) throw invalid_parameter_error("stats: n >= 1 required");
    if (seq.ell == 0) throw degenerate_sequence_error("all-isolated sequence: nu undefined");
    CompensatedSum<> s1, s2, s3, sff, sfff;
    long long delta = 0;
    for (auto it = seq.counts.rbegin(); it != seq.counts.rend(); ++it) {
        const double k = static_cast<double>(it->first);
        const double nk = static_cast<double>(it->second);
        if (it->second > 0) delta = std::max<long long>(delta, it->first);
        s1.add(k * nk);
        s2.add(k * k * nk);
        s3.add(k * k * k * nk);
        sff.add(k * (k - 1.0) * nk);
        sfff.add(k * (k - 1.0) * (k - 2.0) * nk);
    }
    const double n = static_cast<double>(seq.n);
    const double ell = s1.value();
    DegreeStats st;
    st.n = seq.n;
    st.ell = seq.ell;
    st.delta = delta;
    st.mu = ell / n;
    st.nu = sff.value() / ell;
    st.eps = st.nu - 1.0;
    st.m2 = s2.value() / n;
    st.R = s3.value() / n;
    st.kappa_n = sfff.value() / ell;
    return st;
}

// Finite pmf on nonnegative integers, stored as (k, p) ascending in k.
// Masses are long double: near-critical solves condition like 1/eps, so the
// law itself must carry more than double precision for eps ~ 1e-6 families.
struct OffspringDistribution {
    std::vector<std::pair<long long, long double>> pmf;
    long double mean = 0;
    long double second_moment = 0;
    long long max_support = 0;
    long long truncated_at = -1; // truncation point when the law was clipped

    long double prob_of(long long k) const {
        auto it = std::lower_bound(pmf.begin(), pmf.end(), k,
                                   [](const auto& a, long long b) { return a.first < b; });
        return (it != pmf.end() && it->first == k) ? it->second : 0.0L;
    }

    // E X(X-1)
    long double factorial_second() const { return second_moment - mean; }
};

inline OffspringDistribution make_offspring(std::vector<std::pair<long long, long double>> atoms,
                                            long long truncated_at = -1) {
    std::sort(atoms.begin(), atoms.end());
    OffspringDistribution d;
    CompensatedSum<long double> total, m1, m2;
    long long prev = -1;
    for (auto& [k, p] : atoms) {
        if (k < 0) throw invalid_parameter_error("offspring support must be nonnegative");
        if (k == prev) throw invalid_parameter_error("duplicate atom in pmf");
        prev = k;
        if (p < 0.0L || !std::isfinite(static_cast<double>(p)))
            throw invalid_parameter_error("pmf mass out of range");
        if (p == 0.0L) continue;
        total.add(p);
        m1.add(p * static_cast<long double>(k));
        m2.add(p * static_cast<long double>(k) * static_cast<long double>(k));
        d.pmf.emplace_back(k, p);
        d.max_support = k;
    }
    if (std::abs(static_cast<double>(total.value() - 1.0L)) > 1e-12)
        throw invalid_parameter_error("pmf does not sum to 1 (off by " +
                                      std::to_string(static_cast<double>(total.value() - 1.0L)) + ")");
    d.mean = m1.value();
    d.second_moment = m2.value();
    d.truncated_at = truncated_at;
    return d;
}

// D-tilde = D* - 1: P(D*=k) = k P(D=k)/E D. The forward-degree law along a
// uniformly random half-edge; its mean equals nu.
inline OffspringDistribution size_biased(const DegreeSequence& seq) {
    if (seq.ell == 0) throw degenerate_sequence_error("size_biased of zero-mean sequence");
    std::vector<std::pair<long long, long double>> atoms;
    const long double ell = static_cast<long double>(seq.ell);
    for (const auto& [k, nk] : seq.counts) {
        if (k == 0 || nk == 0) continue;
        atoms.emplace_back(k - 1, static_cast<long double>(k) * static_cast<long double>(nk) / ell);
    }
    return make_offspring(std::move(atoms));
}

inline OffspringDistribution size_biased(const OffspringDistribution& dist) {
    if (dist.mean <= 0.0L) throw degenerate_sequence_error("size_biased of zero-mean pmf");
    std::vector<std::pair<long long, long double>> atoms;
    for (const auto& [k, p] : dist.pmf) {
        if (k == 0) continue;
        atoms.emplace_back(k - 1, static_cast<long double>(k) * p / dist.mean);
    }
    return make_offspring(std::move(atoms));
}

namespace detail {

// Even-sum fixup: bump one minimal-degree vertex by 1. Uniform among the
// minimal vertices when an rng is supplied, otherwise the last such vertex.
inline void even_sum_fixup(DegreeSequence& seq, Rng* rng) {
    if (seq.ell % 2 == 0) return;
    const int dmin = seq.counts.begin()->first;
    long long count = seq.counts.begin()->second;
    long long pick = rng ? static_cast<long long>(rng->below(static_cast<std::uint64_t>(count)))
                         : count - 1;
    long long seen = 0;
    for (long long i = 0; i < seq.n; ++i) {
        if (seq.degrees[static_cast<std::size_t>(i)] == dmin && seen++ == pick) {
            seq.degrees[static_cast<std::size_t>(i)] = dmin + 1;
            seq.fixup_applied = true;
            seq.fixup_vertex = i;
            break;
        }
    }
    seq.counts[dmin] -= 1;
    if (seq.counts[dmin] == 0) seq.counts.erase(dmin);
    seq.counts[dmin + 1] += 1;
    seq.ell += 1;
}

} // namespace detail

// n i.i.d. degrees from the pmf, with the even-sum fixup recorded in metadata.
inline DegreeSequence from_iid_pmf(const OffspringDistribution& pmf, long long n, Rng& rng) {
    if (n < 1) throw invalid_parameter_error("from_iid_pmf: n >= 1 required");
    std::vector<double> weights;
    weights.reserve(pmf.pmf.size());
    for (const auto& [k, p] : pmf.pmf) weights.push_back(static_cast<double>(p));
    AliasTable alias(weights);
    DegreeSequence seq;
    seq.n = n;
    seq.degrees.resize(static_cast<std::size_t>(n));
    for (auto& d : seq.degrees) {
        const long long k = pmf.pmf[alias.sample(rng)].first;
        d = static_cast<int>(k);
        seq.counts[d] += 1;
        seq.ell += k;
    }
    detail::even_sum_fixup(seq, &rng);
    return seq;
}

// Deterministic quantile construction d_i = max(1, floor((n/i)^{1/gamma})),
// sorted decreasing, followed by the even-sum fixup.
inline DegreeSequence power_law_sequence(double gamma, long long n) {
    if (!(gamma > 1.0)) throw invalid_parameter_error("power_law_sequence: gamma > 1 required");
    if (n < 1) throw invalid_parameter_error("power_law_sequence: n >= 1 required");
    DegreeSequence seq;
    seq.n = n;
    seq.degrees.resize(static_cast<std::size_t>(n));
    const double inv_gamma = 1.0 / gamma;
    for (long long i = 1; i <= n; ++i) {
        const double q = std::pow(static_cast<double>(n) / static_cast<double>(i), inv_gamma);
        const int d = std::max(1, static_cast<int>(q));
        seq.degrees[static_cast<std::size_t>(i - 1)] = d;
        seq.counts[d] += 1;
        seq.ell += d;
    }
    detail::even_sum_fixup(seq, nullptr);
    return seq;
}

// Two-atom degree counts on {1,3} with n_3 = round(p3 n).
inline DegreeSequence two_atom_sequence(long long n, double p3) {
    if (n < 1 || p3 < 0.0 || p3 > 1.0) throw invalid_parameter_error("two_atom_sequence: bad parameters");
    const long long n3 = std::llround(p3 * static_cast<double>(n));
    DegreeSequence seq;
    seq.n = n;
    seq.degrees.assign(static_cast<std::size_t>(n), 1);
    std::fill(seq.degrees.begin(), seq.degrees.begin() + static_cast<std::ptrdiff_t>(n3), 3);
    if (n - n3 > 0) seq.counts[1] = n - n3;
    if (n3 > 0) seq.counts[3] = n3;
    seq.ell = (n - n3) + 3 * n3;
    detail::even_sum_fixup(seq, nullptr);
    return seq;
}

// p3 making nu = 1 + eps for the {1,3} family: nu (1 + 2 p3) = 6 p3.
inline double two_atom_p3_for_eps(double eps) {
    const double nu = 1.0 + eps;
    if (!(nu > 0.0) || nu >= 3.0) throw invalid_parameter_error("two_atom_p3_for_eps: eps out of range");
    return nu / (6.0 - 2.0 * nu);
}

inline DegreeSequence two_atom_sequence_for_eps(long long n, double eps) {
    return two_atom_sequence(n, two_atom_p3_for_eps(eps));
}

// Three-atom offspring law with atoms {0, 2, n} and mean exactly 1 + eps.
inline OffspringDistribution e3_offspring(long long n, double eps, double p) {
    if (n < 3) throw invalid_parameter_error("e3_offspring: n >= 3 required");
    if (!(eps > 0.0) || eps > 1.0) throw invalid_parameter_error("e3_offspring: eps in (0,1] required");
    if (!(p > 0.0) || p > 1.0 / static_cast<double>(n))
        throw invalid_parameter_error("e3_offspring: p in (0,1/n] required");
    const long double nd = static_cast<long double>(n);
    const long double epsl = eps, pl = p;
    const long double p0 = (1.0L - epsl + (nd - 2.0L) * pl) / 2.0L;
    const long double p2 = (1.0L + epsl - nd * pl) / 2.0L;
    if (p0 < 0.0L || p0 > 1.0L || p2 < 0.0L || p2 > 1.0L)
        throw invalid_parameter_error("e3_offspring: mass out of range");
    return make_offspring({{0, p0}, {2, p2}, {n, pl}});
}

// Truncate a mean-1 law at M and move mass delta = eps + E(X - X^M)
// from 0 to 1, giving mean exactly 1 + eps.
inline OffspringDistribution truncated_family(const OffspringDistribution& base, double eps,
                                              long long M) {
    if (M < 1) throw invalid_parameter_error("truncated_family: M >= 1 required");
    if (eps < 0.0) throw invalid_parameter_error("truncated_family: eps >= 0 required");
    if (std::abs(static_cast<double>(base.mean - 1.0L)) > 1e-9)
        throw invalid_parameter_error("truncated_family: base law must have mean 1");
    CompensatedSum<long double> loss, tail_mass;
    for (auto it = base.pmf.rbegin(); it != base.pmf.rend(); ++it) {
        if (it->first <= M) break;
        loss.add(it->second * static_cast<long double>(it->first - M));
        tail_mass.add(it->second);
    }
    const long double delta = static_cast<long double>(eps) + loss.value();
    std::map<long long, long double> atoms;
    for (const auto& [k, p] : base.pmf) {
        atoms[std::min(k, M)] += p;
    }
    if (atoms[0] < delta)
        throw infeasible_shift_error("truncated_family: P(X=0) smaller than required shift");
    atoms[0] -= delta;
    atoms[1] += delta;
    std::vector<std::pair<long long, long double>> out(atoms.begin(), atoms.end());
    return make_offspring(std::move(out), tail_mass.value() > 0.0L ? M : -1);
}

// Replace 2m degree-1 vertices with m of degree 0 and m of degree 2;
// ell is unchanged, E D(D-1) grows by exactly 2m/n, E D^3 by 6m/n.
inline DegreeSequence degree_surgery(const DegreeSequence& seq, long long m) {
    if (m < 0) throw invalid_parameter_error("degree_surgery: m >= 0 required");
    if (m == 0) return seq;
    auto it = seq.counts.find(1);
    const long long n1 = (it == seq.counts.end()) ? 0 : it->second;
    if (n1 < 2 * m) throw infeasible_surgery_error("degree_surgery: n_1 < 2m");
    DegreeSequence out = seq;
    long long to_zero = m, to_two = m;
    for (auto& d : out.degrees) {
        if (d != 1) continue;
        if (to_zero > 0) {
            d = 0;
            --to_zero;
        } else if (to_two > 0) {
            d = 2;
            --to_two;
        } else {
            break;
        }
    }
    out.counts[1] -= 2 * m;
    if (out.counts[1] == 0) out.counts.erase(1);
    out.counts[0] += m;
    out.counts[2] += m;
    return out;
}

// Mean-1 heavy-tail base law, P(X > x) ~ x^{-beta}: dense integer head, then
// geometrically spaced atoms carrying the lumped k^{-(beta+1)} weight, up to
// max_support. Used by the survival-exponent sweeps.
inline OffspringDistribution heavy_tail_offspring_base(double beta, long long max_support) {
    if (!(beta > 1.0)) throw invalid_parameter_error("heavy_tail_offspring_base: beta > 1 required");
    if (max_support < 2) throw invalid_parameter_error("heavy_tail_offspring_base: support too small");
    const long long head = std::min<long long>(4096, max_support);
    std::vector<std::pair<long long, long double>> atoms;
    for (long long k = 1; k <= head; ++k)
        atoms.emplace_back(k, std::pow(static_cast<long double>(k), -(static_cast<long double>(beta) + 1.0L)));
    long long prev = head;
    while (prev < max_support) {
        long long next = std::max(prev + 1, static_cast<long long>(static_cast<double>(prev) * 1.2));
        next = std::min(next, max_support);
        // integral of x^{-(beta+1)} over (prev, next], lumped at next
        const long double w = (std::pow(static_cast<long double>(prev), static_cast<long double>(-beta)) -
                               std::pow(static_cast<long double>(next), static_cast<long double>(-beta))) /
                              static_cast<long double>(beta);
        atoms.emplace_back(next, w);
        prev = next;
    }
    CompensatedSum<long double> w_total, w_mean;
    for (auto it = atoms.rbegin(); it != atoms.rend(); ++it) {
        w_total.add(it->second);
        w_mean.add(it->second * static_cast<long double>(it->first));
    }
    const long double scale = 1.0L / w_mean.value();
    for (auto& [k, w] : atoms) w *= scale;
    const long double mass = scale * w_total.value();
    atoms.emplace_back(0, 1.0L - mass);
    return make_offspring(std::move(atoms), max_support);
}

// --- CSV serialization ------------------------------------------------------
// Counts form: header "k,n_k". Explicit form: header "vertex,degree" (1-based).
// The loader accepts both; '#' lines are comments.

inline void save_degree_counts(const DegreeSequence& seq, std::ostream& os) {
    os << "k,n_k\n";
    for (const auto& [k, nk] : seq.counts) os << k << ',' << nk << '\n';
}

inline void save_degree_list(const DegreeSequence& seq, std::ostream& os) {
    os << "vertex,degree\n";
    for (long long i = 0; i < seq.n; ++i)
        os << (i + 1) << ',' << seq.degrees[static_cast<std::size_t>(i)] << '\n';
}

inline DegreeSequence load_degree_file(std::istream& is) {
    std::string line;
    std::string header;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        header = line;
        break;
    }
    if (!header.empty() && header.back() == '\r') header.pop_back();
    auto parse_row = [](const std::string& row, long long& a, long long& b) {
        const auto comma = row.find(',');
        if (comma == std::string::npos) throw config_error("degree file: malformed row '" + row + "'");
        a = std::stoll(row.substr(0, comma));
        b = std::stoll(row.substr(comma + 1));
    };
    if (header == "k,n_k") {
        std::map<int, long long> counts;
        while (std::getline(is, line)) {
            if (line.empty() || line[0] == '#') continue;
            long long k, nk;
            parse_row(line, k, nk);
            counts[static_cast<int>(k)] += nk;
        }
        return DegreeSequence::from_counts(counts);
    }
    if (header == "vertex,degree") {
        std::vector<std::pair<long long, long long>> rows;
        while (std::getline(is, line)) {
            if (line.empty() || line[0] == '#') continue;
            long long v, d;
            parse_row(line, v, d);
            rows.emplace_back(v, d);
        }
        std::sort(rows.begin(), rows.end());
        std::vector<int> degrees;
        degrees.reserve(rows.size());
        for (const auto& [v, d] : rows) degrees.push_back(static_cast<int>(d));
        return DegreeSequence::from_degrees(std::move(degrees));
    }
    throw config_error("degree file: expected header 'k,n_k' or 'vertex,degree', got '" + header + "'");
}

inline void save_pmf(const OffspringDistribution& dist, std::ostream& os) {
    os << "k,p\n";
    os.precision(21);
    for (const auto& [k, p] : dist.pmf) os << k << ',' << p << '\n';
}

inline OffspringDistribution load_pmf_file(std::istream& is) {
    std::string line;
    std::string header;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        header = line;
        break;
    }
    if (!header.empty() && header.back() == '\r') header.pop_back();
    if (header != "k,p") throw config_error("pmf file: expected header 'k,p'");
    std::vector<std::pair<long long, long double>> atoms;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw config_error("pmf file: malformed row '" + line + "'");
        atoms.emplace_back(std::stoll(line.substr(0, comma)), std::stold(line.substr(comma + 1)));
    }
    return make_offspring(std::move(atoms));
}

} // namespace nearcrit
