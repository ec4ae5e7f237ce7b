#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>
#include <vector>

#include "nearcrit/config_model.hpp"
#include "nearcrit/degree_model.hpp"
#include "nearcrit/exploration.hpp"
#include "nearcrit/gw_survival.hpp"

using namespace nearcrit;
using Catch::Approx;

namespace {

using Comp = std::tuple<long long, long long, long long>;

std::vector<Comp> trace_components(const ExplorationTrace& tr) {
    std::vector<Comp> out;
    for (const auto& c : component_sizes_from_trace(tr)) out.emplace_back(c.v, c.e, c.k);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<Comp> union_find_components(const MultiGraph& g) {
    std::vector<Comp> out;
    for (const auto& [v, e] : components(g).components) out.emplace_back(v, e, e - v + 1);
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

TEST_CASE("explore forced cases") {
    SECTION("degrees (1,1): one tree component") {
        Rng rng(1);
        const auto er = explore(DegreeSequence::from_degrees({1, 1}), rng);
        REQUIRE(er.trace.components.size() == 1);
        CHECK(er.trace.components[0].v == 2);
        CHECK(er.trace.components[0].e == 1);
        CHECK(er.trace.components[0].k == 0);
        CHECK(er.trace.final_cycles == 0);
        REQUIRE(er.graph.edges.size() == 1);
        int c1_rows = 0;
        for (const auto& row : er.trace.rows) c1_rows += row.kind == event_kind::c1_wake;
        CHECK(c1_rows == 1);
    }
    SECTION("degrees (2): forced loop, one cycle") {
        Rng rng(1);
        const auto er = explore(DegreeSequence::from_degrees({2}), rng);
        REQUIRE(er.trace.components.size() == 1);
        CHECK(er.trace.components[0].v == 1);
        CHECK(er.trace.components[0].e == 1);
        CHECK(er.trace.components[0].k == 1);
        CHECK(er.trace.final_cycles == 1);
        CHECK(er.graph.edges[0].first == er.graph.edges[0].second);
    }
    SECTION("isolated vertices never wake") {
        Rng rng(2);
        const auto er = explore(DegreeSequence::from_degrees({0, 1, 0, 1}), rng);
        CHECK(er.trace.n0 == 2);
        CHECK(er.trace.boundaries.back().V == 2);
        const auto all = component_sizes_from_trace(er.trace);
        REQUIRE(all.size() == 3); // one edge component + two singletons
    }
}

TEST_CASE("trace components equal the union-find oracle exactly") {
    Rng seq_rng(33);
    const auto pmf = make_offspring({{1, 0.7L}, {3, 0.3L}});
    for (int rep = 0; rep < 100; ++rep) {
        const auto seq = from_iid_pmf(pmf, 1000, seq_rng);
        Rng rng = Rng::stream(500, 7, static_cast<std::uint64_t>(rep));
        const auto er = explore(seq, rng);
        REQUIRE(trace_components(er.trace) == union_find_components(er.graph));
        // boundary reconstruction agrees with the engine's own tally
        const auto rebuilt = component_sizes_from_trace(er.trace);
        REQUIRE(rebuilt.size() == er.trace.components.size() + static_cast<std::size_t>(er.trace.n0));
        for (std::size_t i = 0; i < er.trace.components.size(); ++i) {
            CHECK(rebuilt[i].v == er.trace.components[i].v);
            CHECK(rebuilt[i].e == er.trace.components[i].e);
            CHECK(rebuilt[i].k == er.trace.components[i].k);
        }
        // Euler identity through the final cycle count
        const auto cs = components(er.graph);
        CHECK(er.trace.final_cycles == seq.ell / 2 - seq.n + cs.component_count);
    }
}

TEST_CASE("exploration pairing is a uniform matching") {
    const auto seq = DegreeSequence::from_degrees({1, 1, 1, 1});
    long long counts[3] = {0, 0, 0};
    const int trials = 100000;
    for (int r = 0; r < trials; ++r) {
        Rng rng = Rng::stream(3, 4, static_cast<std::uint64_t>(r));
        const auto er = explore(seq, rng, {false, 100000});
        for (auto [u, v] : er.graph.edges) {
            if (u == 0 || v == 0) {
                counts[(u == 0 ? v : u) - 1] += 1;
                break;
            }
        }
    }
    double chi2 = 0;
    const double expect = trials / 3.0;
    for (long long c : counts) chi2 += (c - expect) * (c - expect) / expect;
    CHECK(chi2 < 13.8155); // chi-square(2 dof) at p = 0.001
}

TEST_CASE("exploration pairing matches the static pairing law on loops") {
    // degrees (2,1,1): of the 3 matchings exactly one makes a loop, so the
    // loop probability is 1/3. A C1 selection that peeks at lifetimes would
    // inflate this to 1/2, which 30000 trials reject decisively.
    auto loop_fraction = [](const DegreeSequence& seq, std::uint64_t salt, bool use_explore) {
        const int trials = 30000;
        int loops = 0;
        for (int r = 0; r < trials; ++r) {
            Rng rng = Rng::stream(salt, use_explore, static_cast<std::uint64_t>(r));
            const MultiGraph g = use_explore ? explore(seq, rng, {false, 100000}).graph
                                             : pair_half_edges(seq, rng);
            for (auto [u, v] : g.edges) loops += u == v;
        }
        return static_cast<double>(loops) / trials;
    };
    const double tol = 3.0 * std::sqrt(2.0 / 9.0 / 30000.0);
    const auto seq211 = DegreeSequence::from_degrees({2, 1, 1});
    CHECK(std::abs(loop_fraction(seq211, 1111, true) - 1.0 / 3.0) < tol);
    CHECK(std::abs(loop_fraction(seq211, 1111, false) - 1.0 / 3.0) < tol);
    // degrees (2,2): both-loops with probability 1/3 (two loops), else a
    // double edge; expected loops per trial = 2/3.
    const auto seq22 = DegreeSequence::from_degrees({2, 2});
    CHECK(std::abs(loop_fraction(seq22, 2222, true) - 2.0 / 3.0) < 2 * tol);
}

TEST_CASE("conservation laws along the trace") {
    Rng rng(91);
    const auto seq = two_atom_sequence(2000, 0.25);
    const auto er = explore(seq, rng);
    const auto& rows = er.trace.rows;
    REQUIRE_FALSE(rows.empty());
    CHECK(rows.front().t == 0.0);
    CHECK(rows.front().L == seq.ell - 1);
    long long prev_L = seq.ell;
    long long prev_S = seq.ell;
    double prev_t = 0.0;
    long long prev_N = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        CHECK(row.L == row.S + row.A);
        CHECK(row.A >= 0);
        CHECK(row.S <= prev_S);
        CHECK(row.t >= prev_t);
        CHECK(row.N >= prev_N);
        if (row.kind == event_kind::c1_wake) {
            CHECK(prev_L - row.L == 1); // the C2 kill in the same instant
        } else {
            // a component-closing pairing has no follow-up C2 kill
            const bool closing = i + 1 == rows.size() || rows[i + 1].kind == event_kind::c1_wake;
            CHECK(prev_L - row.L == (closing ? 1 : 2));
        }
        prev_L = row.L;
        prev_S = row.S;
        prev_t = row.t;
        prev_N = row.N;
    }
    CHECK(rows.back().L == 0);
    // A vanishes at every component boundary
    for (const auto& b : er.trace.boundaries) CHECK(b.A == 0);
}

TEST_CASE("sandwich inequality against the wake-free processes") {
    for (int rep = 0; rep < 20; ++rep) {
        const auto seq = two_atom_sequence(1000, 0.25);
        Rng rng = Rng::stream(777, 0, static_cast<std::uint64_t>(rep));
        const auto er = explore(seq, rng);
        REQUIRE(er.trace.tilde.has_value());
        const auto& tilde = *er.trace.tilde;
        const long long delta = er.trace.delta;
        long long min_Atilde = 0;
        for (const auto& row : er.trace.rows) {
            const long long S_tilde = tilde.S_at(row.t);
            const long long A_tilde = row.L - S_tilde;
            min_Atilde = std::min(min_Atilde, A_tilde);
            const long long gap = S_tilde - row.S;
            REQUIRE(gap >= 0);
            REQUIRE(gap == row.A - A_tilde);
            REQUIRE(gap < -min_Atilde + delta);
        }
    }
}

TEST_CASE("tilde_means") {
    const auto seq = DegreeSequence::from_counts({{1, 70}, {3, 30}});
    SECTION("t = 0") {
        const auto m = tilde_means(seq, 0.0);
        CHECK(m.ES_tilde == Approx(static_cast<double>(seq.ell)));
        CHECK(m.EV_tilde == Approx(static_cast<double>(seq.n)));
        CHECK(m.EL == Approx(static_cast<double>(seq.ell)));
        CHECK(m.EA_tilde == Approx(0.0).margin(1e-9));
    }
    SECTION("t large") {
        const auto with_isolated = DegreeSequence::from_counts({{0, 5}, {1, 70}, {3, 30}});
        const auto m = tilde_means(with_isolated, 60.0);
        CHECK(m.ES_tilde == Approx(0.0).margin(1e-20));
        CHECK(m.EV_tilde == Approx(5.0).margin(1e-20));
    }
    SECTION("binomial-mean formula at t = 0.01") {
        const auto big = DegreeSequence::from_counts({{1, 70000}, {3, 30000}});
        const auto m = tilde_means(big, 0.01);
        const double expected =
            100000.0 * (0.7 * std::exp(-0.01) + 0.9 * std::exp(-0.03));
        CHECK(m.ES_tilde == Approx(expected).epsilon(1e-12));
    }
    SECTION("Monte Carlo means of the realized tilde processes") {
        const auto big = DegreeSequence::from_counts({{1, 7000}, {3, 3000}});
        const double t = 0.01;
        const auto m = tilde_means(big, t);
        double sS = 0, ssS = 0, sV = 0, ssV = 0;
        const int reps = 100;
        for (int r = 0; r < reps; ++r) {
            Rng rng = Rng::stream(4242, 0, static_cast<std::uint64_t>(r));
            const auto er = explore(big, rng);
            const double S = static_cast<double>(er.trace.tilde->S_at(t));
            const double V = static_cast<double>(er.trace.tilde->V_at(t));
            sS += S;
            ssS += S * S;
            sV += V;
            ssV += V * V;
        }
        const double meanS = sS / reps, meanV = sV / reps;
        const double seS = std::sqrt((ssS - reps * meanS * meanS) / (reps - 1) / reps);
        const double seV = std::sqrt((ssV - reps * meanV * meanV) / (reps - 1) / reps);
        CHECK(std::abs(meanS - m.ES_tilde) <= 3 * seS);
        CHECK(std::abs(meanV - m.EV_tilde) <= 3 * seV);
    }
}

TEST_CASE("gamma_coefficient") {
    const auto seq = DegreeSequence::from_counts({{1, 700}, {3, 300}});
    SECTION("alpha = 0") { CHECK(gamma_coefficient(seq, 0.0) == 0.0); }
    SECTION("uncapped regime equals alpha^2 E D^3") {
        const double alpha = -std::log(7.0 / 9.0); // 3 alpha < 1, no cap
        const double g = gamma_coefficient(seq, alpha);
        CHECK(g == Approx(alpha * alpha * 8.8).epsilon(1e-13));
        CHECK(g == Approx(0.5557987).epsilon(1e-6));
    }
    SECTION("bounds gamma <= alpha E D^2 and gamma >= alpha^2 mu") {
        const auto st = stats(seq);
        for (double alpha : {0.01, 0.1, 0.3, 0.9, 2.0}) {
            const double g = gamma_coefficient(seq, alpha);
            CHECK(g <= alpha * st.m2 * (1 + 1e-12));
            const double floor_val = std::min(1.0, alpha) * std::min(1.0, alpha) * st.mu;
            CHECK(g >= floor_val * (1 - 1e-12));
        }
    }
}

TEST_CASE("psi_profile") {
    const auto seq = two_atom_sequence_for_eps(10000, 0.05);
    const auto sol = solve_rho(size_biased(seq));
    const double gamma = gamma_coefficient(seq, sol.alpha);
    SECTION("exact zero at t = 0") {
        CHECK(psi_profile(seq, sol.alpha, gamma, 0.0) == 0.0);
    }
    SECTION("vanishes at t = 1 for the solved alpha") {
        CHECK(std::abs(psi_profile(seq, sol.alpha, gamma, 1.0)) < 1e-9);
    }
    SECTION("concave on [0,2] and positive inside (0,1)") {
        std::vector<double> vals;
        for (int i = 0; i <= 40; ++i) vals.push_back(psi_profile(seq, sol.alpha, gamma, i * 0.05));
        for (std::size_t i = 1; i + 1 < vals.size(); ++i)
            CHECK(vals[i + 1] - 2 * vals[i] + vals[i - 1] <= 1e-12);
        CHECK(psi_profile(seq, sol.alpha, gamma, 0.5) > 0.0);
        CHECK(psi_profile(seq, sol.alpha, gamma, 2.0) >= -1.0);
        CHECK(psi_profile(seq, sol.alpha, gamma, 2.0) <= 4.0);
    }
    SECTION("degenerate gamma") {
        REQUIRE_THROWS_AS(psi_profile(seq, sol.alpha, 0.0, 1.0), invalid_parameter_error);
    }
}

TEST_CASE("component_sizes_from_trace rejects corrupt boundaries") {
    Rng rng(12);
    auto er = explore(two_atom_sequence(100, 0.25), rng);
    REQUIRE(er.trace.boundaries.size() >= 2);
    std::swap(er.trace.boundaries.front(), er.trace.boundaries.back());
    REQUIRE_THROWS_AS(component_sizes_from_trace(er.trace), corrupt_trace_error);
}

TEST_CASE("trace decimation keeps boundaries and cycle rows exact") {
    const auto seq = two_atom_sequence(40000, 0.25);
    Rng rng1(5), rng2(5);
    ExploreOptions full{true, 1000000};
    ExploreOptions thin{true, 10}; // force decimation
    const auto a = explore(seq, rng1, full);
    const auto b = explore(seq, rng2, thin);
    CHECK(a.trace.rows.size() > b.trace.rows.size());
    REQUIRE(a.trace.boundaries.size() == b.trace.boundaries.size());
    for (std::size_t i = 0; i < a.trace.boundaries.size(); ++i) {
        CHECK(a.trace.boundaries[i].t == b.trace.boundaries[i].t);
        CHECK(a.trace.boundaries[i].V == b.trace.boundaries[i].V);
    }
    CHECK(a.trace.final_cycles == b.trace.final_cycles);
    long long cycles_in_thin = 0;
    for (const auto& row : b.trace.rows) cycles_in_thin += row.kind == event_kind::cycle;
    CHECK(cycles_in_thin == b.trace.final_cycles);
}

TEST_CASE("trace CSV export") {
    Rng rng(8);
    const auto er = explore(DegreeSequence::from_degrees({1, 1}), rng);
    std::stringstream ss;
    write_trace_csv(er.trace, ss);
    std::string header;
    std::getline(ss, header);
    CHECK(header == "t,S,A,V,L,N,event_kind");
    std::stringstream bs;
    write_boundaries_csv(er.trace, bs);
    std::getline(bs, header);
    CHECK(header == "T_i,v,e,k");
    std::string row;
    std::getline(bs, row);
    CHECK(row.substr(row.size() - 6) == ",2,1,0");
}
