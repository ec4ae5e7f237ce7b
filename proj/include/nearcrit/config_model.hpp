#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "nearcrit/degree_model.hpp"
#include "nearcrit/errors.hpp"
#include "nearcrit/rng.hpp"

namespace nearcrit {

// Uniform half-edge pairing. Loops are stored as (v,v); #edges = ell/2.
struct MultiGraph {
    long long n = 0;
    std::vector<std::uint32_t> half_edge_owner;           // half-edge index -> vertex
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    std::uint64_t seed = 0;
};

// In-place shuffle-and-pair: position i keeps its half-edge, the partner is
// swapped in from a uniform j > i. Every perfect matching is equally likely.
inline MultiGraph pair_half_edges(const DegreeSequence& seq, Rng& rng) {
    if (seq.ell % 2 != 0) throw parity_error("pair_half_edges: odd number of half-edges");
    MultiGraph g;
    g.n = seq.n;
    g.seed = rng.seed();
    const std::size_t ell = static_cast<std::size_t>(seq.ell);
    g.half_edge_owner.resize(ell);
    std::size_t h = 0;
    for (long long v = 0; v < seq.n; ++v) {
        const int d = seq.degrees[static_cast<std::size_t>(v)];
        for (int j = 0; j < d; ++j) g.half_edge_owner[h++] = static_cast<std::uint32_t>(v);
    }
    std::vector<std::uint32_t> pos(ell);
    for (std::size_t i = 0; i < ell; ++i) pos[i] = static_cast<std::uint32_t>(i);
    g.edges.reserve(ell / 2);
    for (std::size_t i = 0; i < ell; i += 2) {
        const std::size_t j = i + 1 + static_cast<std::size_t>(rng.below(ell - i - 1));
        std::swap(pos[i + 1], pos[j]);
        g.edges.emplace_back(g.half_edge_owner[pos[i]], g.half_edge_owner[pos[i + 1]]);
    }
    return g;
}

// True iff the multigraph has no loops and no repeated vertex pair.
inline bool is_simple(const MultiGraph& g) {
    std::vector<std::uint64_t> keys;
    keys.reserve(g.edges.size());
    const std::uint64_t n = static_cast<std::uint64_t>(g.n);
    for (const auto& [u, v] : g.edges) {
        if (u == v) return false;
        const std::uint64_t a = std::min(u, v), b = std::max(u, v);
        keys.push_back(a * n + b);
    }
    std::sort(keys.begin(), keys.end());
    return std::adjacent_find(keys.begin(), keys.end()) == keys.end();
}

struct SampleSimpleResult {
    MultiGraph graph;
    int attempts = 0;
};

// Rejection sampling of the simple graph: repeat pairing until simple.
inline SampleSimpleResult sample_simple(const DegreeSequence& seq, Rng& rng,
                                        int max_attempts = 200) {
    if (max_attempts < 1) throw invalid_parameter_error("sample_simple: max_attempts >= 1");
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        MultiGraph g = pair_half_edges(seq, rng);
        if (is_simple(g)) return {std::move(g), attempt};
    }
    throw rejection_failure_error("sample_simple: no simple pairing found", max_attempts);
}

// P(simple) ~ e^{-nu/2 - nu^2/4} near criticality.
inline double simple_prob_prediction(const DegreeStats& st) {
    return std::exp(-st.nu / 2.0 - st.nu * st.nu / 4.0);
}

struct ComponentStats {
    std::vector<std::pair<long long, long long>> components; // (v, e), v descending
    long long v1 = 0, e1 = 0, v2 = 0, e2 = 0;
    long long k1 = 0;                                        // e1 - v1 + 1
    long long component_count = 0;
    std::map<int, long long> c1_degree_counts;               // degree -> count inside C1
};

// Exact component statistics by union-find. Loops add to e(C) but do not
// merge. Ties for the largest component break on the smallest contained
// vertex index (deterministic).
inline ComponentStats components(const MultiGraph& g) {
    const std::size_t n = static_cast<std::size_t>(g.n);
    std::vector<std::uint32_t> parent(n);
    std::vector<std::uint32_t> min_idx(n);
    std::vector<long long> sz(n, 1), ec(n, 0);
    for (std::size_t i = 0; i < n; ++i) parent[i] = min_idx[i] = static_cast<std::uint32_t>(i);
    auto find = [&](std::uint32_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    for (const auto& [u, v] : g.edges) {
        std::uint32_t ru = find(u), rv = find(v);
        if (ru == rv) {
            ec[ru] += 1; // loop or intra-component edge
            continue;
        }
        if (sz[ru] < sz[rv]) std::swap(ru, rv);
        parent[rv] = ru;
        sz[ru] += sz[rv];
        ec[ru] += ec[rv] + 1;
        min_idx[ru] = std::min(min_idx[ru], min_idx[rv]);
    }
    std::vector<int> degree(n, 0);
    for (const auto& [u, v] : g.edges) {
        degree[u] += 1;
        degree[v] += 1; // a loop contributes 2 to its vertex
    }

    struct Entry {
        long long v, e;
        std::uint32_t min_idx, root;
    };
    std::vector<Entry> entries;
    for (std::size_t i = 0; i < n; ++i) {
        if (find(static_cast<std::uint32_t>(i)) == i)
            entries.push_back({sz[i], ec[i], min_idx[i], static_cast<std::uint32_t>(i)});
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.v != b.v) return a.v > b.v;
        return a.min_idx < b.min_idx;
    });

    ComponentStats cs;
    cs.component_count = static_cast<long long>(entries.size());
    cs.components.reserve(entries.size());
    for (const auto& e : entries) cs.components.emplace_back(e.v, e.e);
    if (!entries.empty()) {
        cs.v1 = entries[0].v;
        cs.e1 = entries[0].e;
        cs.k1 = cs.e1 - cs.v1 + 1;
        const std::uint32_t root1 = entries[0].root;
        for (std::size_t i = 0; i < n; ++i) {
            if (find(static_cast<std::uint32_t>(i)) == root1) cs.c1_degree_counts[degree[i]] += 1;
        }
    }
    if (entries.size() > 1) {
        cs.v2 = entries[1].v;
        cs.e2 = entries[1].e;
    }
    return cs;
}

// Edge-list CSV: `u,v` (1-based), loops as `v,v`. Header comments carry the
// seed and the degree-file hash.
inline void save_graph(const MultiGraph& g, std::ostream& os, const std::string& degree_hash) {
    os << "# seed=" << g.seed << '\n';
    os << "# degree_hash=" << degree_hash << '\n';
    os << "u,v\n";
    for (const auto& [u, v] : g.edges) os << (u + 1) << ',' << (v + 1) << '\n';
}

} // namespace nearcrit
