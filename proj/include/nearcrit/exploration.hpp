#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <utility>
#include <vector>

#include "nearcrit/config_model.hpp"
#include "nearcrit/degree_model.hpp"
#include "nearcrit/errors.hpp"
#include "nearcrit/numerics.hpp"
#include "nearcrit/rng.hpp"

namespace nearcrit {

enum class event_kind : std::uint8_t {
    c1_wake,   // a sleeping vertex was selected and woken
    activate,  // pairing whose spontaneously dying half-edge woke its vertex
    cycle,     // pairing whose spontaneously dying half-edge was active
};

inline const char* event_name(event_kind k) {
    switch (k) {
        case event_kind::c1_wake: return "C1";
        case event_kind::activate: return "activate";
        case event_kind::cycle: return "cycle";
    }
    return "?";
}

struct ProcessSample {
    double t = 0;
    long long S = 0, A = 0, V = 0, L = 0, N = 0;
};

struct TraceRow : ProcessSample {
    event_kind kind = event_kind::c1_wake;
    long long id = -1; // woken vertex for wakes, dying half-edge for cycles
};

struct ComponentRecord {
    long long v = 0, e = 0, k = 0;
};

// The wake-free processes evaluated on the same lifetime realization:
// a vertex counts while all of its half-edge lifetimes exceed t.
struct TildeRealization {
    std::vector<std::pair<double, long long>> vertex_min; // (min lifetime, degree), ascending
    std::vector<long long> suffix_deg;                    // suffix sums of degree
    long long n0 = 0;

    long long S_at(double t) const {
        const auto it = std::upper_bound(vertex_min.begin(), vertex_min.end(), t,
                                         [](double tt, const auto& p) { return tt < p.first; });
        return suffix_deg[static_cast<std::size_t>(it - vertex_min.begin())];
    }
    long long V_at(double t) const {
        const auto it = std::upper_bound(vertex_min.begin(), vertex_min.end(), t,
                                         [](double tt, const auto& p) { return tt < p.first; });
        return n0 + static_cast<long long>(vertex_min.end() - it);
    }
};

struct ExplorationTrace {
    std::vector<TraceRow> rows;            // per-event samples (decimated above the limit)
    std::vector<ProcessSample> boundaries; // state at T_i- for each C1, plus the final state
    std::vector<ComponentRecord> components; // explored components, exploration order
    long long n = 0, ell = 0, delta = 0;
    long long n0 = 0;           // isolated (degree-0) vertices, sleeping forever
    long long final_cycles = 0; // N at termination
    std::optional<TildeRealization> tilde;

    // Cadlag sample: the last row with time <= t.
    const TraceRow& sample_at(double t) const {
        if (rows.empty()) throw corrupt_trace_error("sample_at on empty trace");
        auto it = std::upper_bound(rows.begin(), rows.end(), t,
                                   [](double tt, const TraceRow& r) { return tt < r.t; });
        if (it == rows.begin()) throw corrupt_trace_error("sample_at before first event");
        return *(it - 1);
    }
};

struct ExploreOptions {
    bool record_tilde = true;
    long long full_trace_limit = 100000; // record every event up to this n
};

struct ExploreResult {
    ExplorationTrace trace;
    MultiGraph graph;
};

// Continuous-time simultaneous construction and exploration. Every half-edge
// gets an i.i.d. Exp(1) maximal lifetime, processed by a single sorted sweep:
//  C1 wakes the owner of a uniformly chosen sleeping half-edge (an O(1)
//     swap-deletion pool; the choice must not look at lifetimes, or the next
//     spontaneous death would be biased toward the woken vertex),
//  C2 kills the most recently activated active half-edge (LIFO),
//  C3 pairs it with the next spontaneously dying living half-edge; a dying
//     active half-edge closes a cycle (N += 1), a dying sleeping one wakes
//     its vertex.
// Rows reflect the state after the whole same-instant cascade, so the C2 kill
// following a wake is already included (L(0) = ell - 1).
inline ExploreResult explore(const DegreeSequence& seq, Rng& rng, const ExploreOptions& opts = {}) {
    if (seq.ell % 2 != 0) throw parity_error("explore: odd number of half-edges");
    const std::size_t ell = static_cast<std::size_t>(seq.ell);
    const std::size_t n = static_cast<std::size_t>(seq.n);

    ExploreResult out;
    MultiGraph& g = out.graph;
    ExplorationTrace& tr = out.trace;
    g.n = seq.n;
    g.seed = rng.seed();
    g.half_edge_owner.resize(ell);
    g.edges.reserve(ell / 2);

    // CSR layout of half-edges per vertex.
    std::vector<std::size_t> first(n + 1, 0);
    for (std::size_t v = 0; v < n; ++v)
        first[v + 1] = first[v] + static_cast<std::size_t>(seq.degrees[v]);
    for (std::size_t v = 0; v < n; ++v)
        for (std::size_t h = first[v]; h < first[v + 1]; ++h)
            g.half_edge_owner[h] = static_cast<std::uint32_t>(v);

    std::vector<double> lifetime(ell);
    for (auto& lt : lifetime) lt = rng.exponential();
    std::vector<std::uint32_t> order(ell);
    for (std::size_t i = 0; i < ell; ++i) order[i] = static_cast<std::uint32_t>(i);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (lifetime[a] != lifetime[b]) return lifetime[a] < lifetime[b];
        return a < b;
    });

    enum : std::uint8_t { kSleeping = 0, kActive = 1, kDead = 2 };
    std::vector<std::uint8_t> status(ell, kSleeping);
    std::vector<std::uint32_t> active_stack;

    // Sleeping half-edge pool for the uniform C1 draw.
    std::vector<std::uint32_t> pool(ell), pool_pos(ell);
    for (std::size_t i = 0; i < ell; ++i) pool[i] = pool_pos[i] = static_cast<std::uint32_t>(i);
    auto pool_remove = [&](std::uint32_t h) {
        const std::uint32_t i = pool_pos[h];
        const std::uint32_t last = pool.back();
        pool[i] = last;
        pool_pos[last] = i;
        pool.pop_back();
    };

    tr.n = seq.n;
    tr.ell = seq.ell;
    for (const auto& [k, nk] : seq.counts) tr.delta = std::max<long long>(tr.delta, k);
    auto n0_it = seq.counts.find(0);
    tr.n0 = n0_it == seq.counts.end() ? 0 : n0_it->second;

    long long S = seq.ell, A = 0, V = seq.n, N = 0;
    double t = 0.0;
    std::size_t cursor = 0;
    const long long stride =
        seq.n <= opts.full_trace_limit ? 1 : (seq.ell + 9999) / 10000;
    long long event_counter = 0;

    auto record = [&](event_kind kind, long long id) {
        const bool keep = stride == 1 || kind == event_kind::c1_wake ||
                          kind == event_kind::cycle || event_counter % stride == 0;
        ++event_counter;
        if (!keep) return;
        TraceRow row;
        row.t = t;
        row.S = S;
        row.A = A;
        row.V = V;
        row.L = S + A;
        row.N = N;
        row.kind = kind;
        row.id = id;
        tr.rows.push_back(row);
    };
    auto wake = [&](std::uint32_t v) {
        for (std::size_t h = first[v]; h < first[v + 1]; ++h) {
            status[h] = kActive;
            active_stack.push_back(static_cast<std::uint32_t>(h));
            pool_remove(static_cast<std::uint32_t>(h));
        }
        const long long d = first[v + 1] - first[v];
        S -= d;
        A += d;
        V -= 1;
    };
    auto kill_top_active = [&]() {
        while (status[active_stack.back()] == kDead) active_stack.pop_back();
        const std::uint32_t x = active_stack.back();
        active_stack.pop_back();
        status[x] = kDead;
        A -= 1;
        return x;
    };

    // `pending` is the half-edge killed by C2, waiting for its C3 partner.
    constexpr std::uint32_t kNone = static_cast<std::uint32_t>(-1);
    std::uint32_t pending = kNone;
    for (;;) {
        if (pending == kNone) {
            if (pool.empty()) break; // no sleeping half-edge left
            // C1 at the current time: snapshot T_i-, wake the owner of a
            // uniformly chosen sleeping half-edge; the C2 kill belongs to the
            // same instant, so the row already reflects it.
            tr.boundaries.push_back({t, S, A, V, S + A, N});
            const std::uint32_t w =
                g.half_edge_owner[pool[static_cast<std::size_t>(rng.below(pool.size()))]];
            wake(w);
            tr.components.push_back({1, 0, 0});
            pending = kill_top_active();
            record(event_kind::c1_wake, static_cast<long long>(w));
        }
        // C3: wait for the next spontaneous death among living half-edges.
        while (status[order[cursor]] == kDead) ++cursor;
        const std::uint32_t y = order[cursor];
        ++cursor;
        t = lifetime[y];
        const bool closed_cycle = status[y] == kActive;
        event_kind kind;
        long long id;
        if (closed_cycle) {
            status[y] = kDead;
            A -= 1;
            N += 1;
            tr.components.back().k += 1;
            kind = event_kind::cycle;
            id = static_cast<long long>(y);
        } else {
            const std::uint32_t v = g.half_edge_owner[y];
            wake(v); // marks y active too; it dies right away
            status[y] = kDead;
            A -= 1;
            tr.components.back().v += 1;
            kind = event_kind::activate;
            id = static_cast<long long>(v);
        }
        g.edges.emplace_back(g.half_edge_owner[pending], g.half_edge_owner[y]);
        tr.components.back().e += 1;
        pending = A > 0 ? kill_top_active() : kNone;
        record(kind, id);
    }
    tr.boundaries.push_back({t, S, A, V, S + A, N});
    tr.final_cycles = N;

    if (opts.record_tilde) {
        TildeRealization tilde;
        tilde.n0 = tr.n0;
        tilde.vertex_min.reserve(n - static_cast<std::size_t>(tr.n0));
        for (std::size_t v = 0; v < n; ++v) {
            if (first[v] == first[v + 1]) continue;
            double m = lifetime[first[v]];
            for (std::size_t h = first[v] + 1; h < first[v + 1]; ++h)
                m = std::min(m, lifetime[h]);
            tilde.vertex_min.emplace_back(m, static_cast<long long>(first[v + 1] - first[v]));
        }
        std::sort(tilde.vertex_min.begin(), tilde.vertex_min.end());
        tilde.suffix_deg.assign(tilde.vertex_min.size() + 1, 0);
        for (std::size_t i = tilde.vertex_min.size(); i-- > 0;)
            tilde.suffix_deg[i] = tilde.suffix_deg[i + 1] + tilde.vertex_min[i].second;
        tr.tilde = std::move(tilde);
    }
    return out;
}

// Boundary-difference reconstruction of the per-component statistics:
// v = V(T_i-) - V(T_{i+1}-), e = (S(T_i-) - S(T_{i+1}-)) / 2, k from the N
// increments; degree-0 vertices are appended as (1,0,0) singletons.
inline std::vector<ComponentRecord> component_sizes_from_trace(const ExplorationTrace& tr) {
    std::vector<ComponentRecord> out;
    if (tr.boundaries.empty()) throw corrupt_trace_error("trace has no boundary samples");
    for (std::size_t i = 0; i + 1 < tr.boundaries.size(); ++i) {
        const ProcessSample& a = tr.boundaries[i];
        const ProcessSample& b = tr.boundaries[i + 1];
        if (b.t < a.t || b.V > a.V || b.S > a.S || b.N < a.N)
            throw corrupt_trace_error("non-monotone component boundaries");
        const long long dv = a.V - b.V;
        const long long dS = a.S - b.S;
        if (dS % 2 != 0) throw corrupt_trace_error("odd half-edge count inside a component");
        out.push_back({dv, dS / 2, b.N - a.N});
    }
    out.insert(out.end(), static_cast<std::size_t>(tr.n0), ComponentRecord{1, 0, 0});
    return out;
}

struct TildeMeans {
    double t = 0;
    double ES_tilde = 0; // sum_k k n_k e^{-kt}
    double EV_tilde = 0; // sum_k n_k e^{-kt}
    double EL = 0;       // ell e^{-2t}
    double EA_tilde = 0; // EL - ES_tilde
};

inline TildeMeans tilde_means(const DegreeSequence& seq, double t) {
    if (!(t >= 0.0)) throw invalid_parameter_error("tilde_means: t >= 0 required");
    CompensatedSum<> es, ev;
    for (auto it = seq.counts.rbegin(); it != seq.counts.rend(); ++it) {
        const double k = static_cast<double>(it->first);
        const double nk = static_cast<double>(it->second);
        const double decay = std::exp(-k * t);
        es.add(k * nk * decay);
        ev.add(nk * decay);
    }
    TildeMeans m;
    m.t = t;
    m.ES_tilde = es.value();
    m.EV_tilde = ev.value();
    m.EL = static_cast<double>(seq.ell) * std::exp(-2.0 * t);
    m.EA_tilde = m.EL - m.ES_tilde;
    return m;
}

// gamma_n = E(D (1 ^ alpha D)^2), the scale of the active process.
inline double gamma_coefficient(const DegreeSequence& seq, double alpha) {
    if (!(alpha >= 0.0)) throw invalid_parameter_error("gamma_coefficient: alpha >= 0 required");
    CompensatedSum<> s;
    for (auto it = seq.counts.rbegin(); it != seq.counts.rend(); ++it) {
        const double k = static_cast<double>(it->first);
        const double nk = static_cast<double>(it->second);
        const double capped = std::min(1.0, alpha * k);
        s.add(nk * k * capped * capped);
    }
    return s.value() / static_cast<double>(seq.n);
}

// psi_n(t) = (mu e^{-2 alpha t} - E(D e^{-alpha t D})) / gamma_n.
// Zero at t = 0 and, when alpha solves E(D e^{-alpha D}) = mu e^{-2 alpha},
// again at t = 1; concave on [0,2] near criticality.
inline double psi_profile(const DegreeSequence& seq, double alpha, double gamma, double t) {
    if (!(gamma > 0.0))
        throw invalid_parameter_error("psi_profile: gamma must be positive (division degenerate)");
    CompensatedSum<> mu_sum, damped;
    for (auto it = seq.counts.rbegin(); it != seq.counts.rend(); ++it) {
        const double k = static_cast<double>(it->first);
        const double nk = static_cast<double>(it->second);
        mu_sum.add(k * nk);
        damped.add(k * nk * std::exp(-alpha * t * k));
    }
    const double n = static_cast<double>(seq.n);
    return (mu_sum.value() / n * std::exp(-2.0 * alpha * t) - damped.value() / n) / gamma;
}

// Trace export: CSV `t,S,A,V,L,N,event_kind`.
inline void write_trace_csv(const ExplorationTrace& tr, std::ostream& os) {
    os << "t,S,A,V,L,N,event_kind\n";
    os.precision(17);
    for (const TraceRow& r : tr.rows)
        os << r.t << ',' << r.S << ',' << r.A << ',' << r.V << ',' << r.L << ',' << r.N << ','
           << event_name(r.kind) << '\n';
}

// Component boundary export: CSV `T_i,v,e,k` (explored components only).
inline void write_boundaries_csv(const ExplorationTrace& tr, std::ostream& os) {
    os << "T_i,v,e,k\n";
    os.precision(17);
    for (std::size_t i = 0; i < tr.components.size(); ++i)
        os << tr.boundaries[i].t << ',' << tr.components[i].v << ',' << tr.components[i].e << ','
           << tr.components[i].k << '\n';
}

} // namespace nearcrit
