#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "nearcrit/degree_model.hpp"

using namespace nearcrit;
using Catch::Approx;

namespace {

// Independent moment oracle: raw long-double loops over the degree list,
// no counts, no compensation.
struct RawMoments {
    long double mu = 0, nu = 0, eps = 0, m2 = 0, R = 0, kappa = 0;
};

RawMoments raw_moments(const DegreeSequence& seq) {
    long double s1 = 0, s2 = 0, s3 = 0, ff = 0, fff = 0;
    for (int d : seq.degrees) {
        const long double k = d;
        s1 += k;
        s2 += k * k;
        s3 += k * k * k;
        ff += k * (k - 1);
        fff += k * (k - 1) * (k - 2);
    }
    RawMoments m;
    const long double n = static_cast<long double>(seq.n);
    m.mu = s1 / n;
    m.nu = ff / s1;
    m.eps = m.nu - 1;
    m.m2 = s2 / n;
    m.R = s3 / n;
    m.kappa = fff / s1;
    return m;
}

long long sum_dd1(const DegreeSequence& seq) { // integer-exact sum of d(d-1)
    long long s = 0;
    for (int d : seq.degrees) s += static_cast<long long>(d) * (d - 1);
    return s;
}

} // namespace

TEST_CASE("stats on two-atom sequences") {
    SECTION("critical 3/4 - 1/4 mix") {
        const auto seq = DegreeSequence::from_counts({{1, 750}, {3, 250}});
        const auto st = stats(seq);
        CHECK(st.mu == Approx(1.5).epsilon(1e-14));
        CHECK(st.nu == Approx(1.0).epsilon(1e-14));
        CHECK(st.eps == Approx(0.0).margin(1e-14));
        CHECK(st.kappa_n == Approx(1.0).epsilon(1e-14));
        CHECK(st.delta == 3);
        CHECK(st.ell == 1500);
    }
    SECTION("0.7 / 0.3 mix") {
        const auto seq = DegreeSequence::from_counts({{1, 700}, {3, 300}});
        const auto st = stats(seq);
        CHECK(st.mu == Approx(1.6).epsilon(1e-14));
        CHECK(st.nu == Approx(1.125).epsilon(1e-14));
        CHECK(st.eps == Approx(0.125).epsilon(1e-12));
        CHECK(st.kappa_n == Approx(1.125).epsilon(1e-14));
    }
    SECTION("all degrees 2") {
        const auto seq = DegreeSequence::from_counts({{2, 100}});
        const auto st = stats(seq);
        CHECK(st.mu == Approx(2.0));
        CHECK(st.nu == Approx(1.0));
        CHECK(st.eps == Approx(0.0).margin(1e-15));
    }
    SECTION("degenerate all-isolated sequence") {
        REQUIRE_THROWS_AS(stats(DegreeSequence::from_counts({{0, 10}})), degenerate_sequence_error);
    }
}

TEST_CASE("stats matches the raw-loop oracle and the m2 identity") {
    Rng rng(2024);
    const auto pmf = make_offspring({{0, 0.1L}, {1, 0.4L}, {2, 0.2L}, {3, 0.2L}, {7, 0.1L}});
    for (int rep = 0; rep < 5; ++rep) {
        const auto seq = from_iid_pmf(pmf, 5000, rng);
        const auto st = stats(seq);
        const auto raw = raw_moments(seq);
        CHECK(st.mu == Approx(static_cast<double>(raw.mu)).epsilon(1e-12));
        CHECK(st.nu == Approx(static_cast<double>(raw.nu)).epsilon(1e-12));
        CHECK(st.R == Approx(static_cast<double>(raw.R)).epsilon(1e-12));
        CHECK(st.kappa_n == Approx(static_cast<double>(raw.kappa)).epsilon(1e-12));
        // E D^2 = mu (nu + 1)
        CHECK(st.m2 == Approx(st.mu * (st.nu + 1.0)).epsilon(1e-10));
        CHECK(seq.ell % 2 == 0);
    }
}

TEST_CASE("size_biased shifts down by one and has mean nu") {
    SECTION("3/4 - 1/4 example") {
        const auto d = make_offspring({{1, 0.75L}, {3, 0.25L}});
        const auto tilde = size_biased(d);
        CHECK(static_cast<double>(tilde.prob_of(0)) == Approx(0.5).epsilon(1e-14));
        CHECK(static_cast<double>(tilde.prob_of(2)) == Approx(0.5).epsilon(1e-14));
        CHECK(static_cast<double>(tilde.mean) == Approx(1.0).epsilon(1e-14));
    }
    SECTION("deterministic degree 1") {
        const auto tilde = size_biased(make_offspring({{1, 1.0L}}));
        REQUIRE(tilde.pmf.size() == 1);
        CHECK(tilde.pmf[0].first == 0);
        CHECK(static_cast<double>(tilde.pmf[0].second) == Approx(1.0));
    }
    SECTION("0.7 / 0.3 example") {
        const auto tilde = size_biased(make_offspring({{1, 0.7L}, {3, 0.3L}}));
        CHECK(static_cast<double>(tilde.prob_of(0)) == Approx(0.4375).epsilon(1e-14));
        CHECK(static_cast<double>(tilde.prob_of(2)) == Approx(0.5625).epsilon(1e-14));
        CHECK(static_cast<double>(tilde.mean) == Approx(1.125).epsilon(1e-14));
    }
    SECTION("sequence overload mean equals stats nu") {
        Rng rng(7);
        const auto pmf = make_offspring({{1, 0.5L}, {2, 0.2L}, {4, 0.3L}});
        for (int rep = 0; rep < 5; ++rep) {
            const auto seq = from_iid_pmf(pmf, 2000, rng);
            CHECK(static_cast<double>(size_biased(seq).mean) ==
                  Approx(stats(seq).nu).epsilon(1e-12));
        }
    }
    SECTION("zero-mean input") {
        REQUIRE_THROWS_AS(size_biased(make_offspring({{0, 1.0L}})), degenerate_sequence_error);
    }
}

TEST_CASE("from_iid_pmf") {
    SECTION("constant degree 2, no fixup") {
        Rng rng(1);
        const auto seq = from_iid_pmf(make_offspring({{2, 1.0L}}), 5, rng);
        CHECK(seq.counts.at(2) == 5);
        CHECK_FALSE(seq.fixup_applied);
    }
    SECTION("all degree 1 with odd n forces the fixup") {
        Rng rng(1);
        const auto seq = from_iid_pmf(make_offspring({{1, 1.0L}}), 5, rng);
        CHECK(seq.fixup_applied);
        CHECK(seq.ell == 6);
        CHECK(seq.counts.at(1) == 4);
        CHECK(seq.counts.at(2) == 1);
        CHECK(seq.degrees[static_cast<std::size_t>(seq.fixup_vertex)] == 2);
    }
    SECTION("empirical frequency within the binomial CI") {
        Rng rng(42);
        const long long n = 1000000;
        const auto seq = from_iid_pmf(make_offspring({{1, 0.75L}, {3, 0.25L}}), n, rng);
        const double p = 0.75;
        const double ci = 3.0 * std::sqrt(p * (1 - p) / static_cast<double>(n));
        const double observed =
            static_cast<double>(seq.counts.at(1)) / static_cast<double>(n);
        // the fixup may have moved one vertex off degree 1
        CHECK(std::abs(observed - p) <= ci + 2.0 / static_cast<double>(n));
    }
}

TEST_CASE("power_law_sequence") {
    SECTION("max degree is the quantile formula value") {
        const auto seq = power_law_sequence(2.5, 10000);
        CHECK(seq.degrees.front() == 39); // floor(10000^{0.4})
        CHECK(stats(seq).delta == 39);
    }
    SECTION("gamma 3.5 keeps E D^3 bounded across sizes") {
        const double r4 = stats(power_law_sequence(3.5, 10000)).R;
        const double r5 = stats(power_law_sequence(3.5, 100000)).R;
        const double r6 = stats(power_law_sequence(3.5, 1000000)).R;
        CHECK(r6 / r4 < 1.5);
        CHECK(r5 / r4 < 1.5);
    }
    SECTION("gamma 2.5 has growing E D^3") {
        // Direct-summation values: R = 25.296, 45.776, 78.234; the two-decade
        // ratio is 3.093 (itself shrinking toward 10^{0.4} = 2.51).
        const double r4 = stats(power_law_sequence(2.5, 10000)).R;
        const double r5 = stats(power_law_sequence(2.5, 100000)).R;
        const double r6 = stats(power_law_sequence(2.5, 1000000)).R;
        CHECK(r4 < r5);
        CHECK(r5 < r6);
        CHECK(r6 / r4 > 2.9);
        CHECK(r6 / r4 < 3.3);
    }
    SECTION("invalid gamma") {
        REQUIRE_THROWS_AS(power_law_sequence(1.0, 100), invalid_parameter_error);
    }
    SECTION("tail power-law bounds with fitted constants") {
        for (double gamma : {2.5, 3.5}) {
            for (long long n : {1000LL, 10000LL, 100000LL}) {
                const auto seq = power_law_sequence(gamma, n);
                const long long kmax = static_cast<long long>(
                    std::pow(static_cast<double>(n), 1.0 / gamma) / 2.0);
                // tail counts from the counts map
                double c_fit = 1e300, C_fit = 0.0;
                for (long long k = 1; k <= kmax; ++k) {
                    long long gt = 0, ge = 0;
                    for (const auto& [d, nk] : seq.counts) {
                        if (d > k) gt += nk;
                        if (d >= k) ge += nk;
                    }
                    const double kg = std::pow(static_cast<double>(k), gamma);
                    C_fit = std::max(C_fit, static_cast<double>(gt) / n * kg);
                    c_fit = std::min(c_fit, static_cast<double>(ge) / n * kg);
                }
                CHECK(C_fit <= 4.0);
                CHECK(c_fit >= 0.25);
            }
        }
    }
}

TEST_CASE("e3_offspring") {
    SECTION("mean is exactly 1 + eps") {
        const auto law = e3_offspring(100, 0.1, 1e-3);
        CHECK(static_cast<double>(law.mean) == Approx(1.1).margin(1e-12));
    }
    SECTION("second moment 2 + n^2 p") {
        const auto law = e3_offspring(1000000, 1e-6, 1e-12);
        CHECK(static_cast<double>(law.second_moment) == Approx(3.0).margin(1e-5));
    }
    SECTION("parameter validation") {
        REQUIRE_THROWS_AS(e3_offspring(100, 0.1, 0.0), invalid_parameter_error);
        REQUIRE_THROWS_AS(e3_offspring(100, 0.1, 0.02), invalid_parameter_error);
        REQUIRE_THROWS_AS(e3_offspring(100, 0.0, 1e-3), invalid_parameter_error);
        REQUIRE_THROWS_AS(e3_offspring(2, 0.1, 1e-3), invalid_parameter_error);
    }
}

TEST_CASE("truncated_family") {
    SECTION("hand-computed shift") {
        const auto base = make_offspring({{0, 0.5L}, {2, 0.5L}});
        const auto law = truncated_family(base, 0.01, 2);
        CHECK(static_cast<double>(law.prob_of(0)) == Approx(0.49).epsilon(1e-13));
        CHECK(static_cast<double>(law.prob_of(1)) == Approx(0.01).epsilon(1e-13));
        CHECK(static_cast<double>(law.prob_of(2)) == Approx(0.5).epsilon(1e-13));
        CHECK(static_cast<double>(law.mean) == Approx(1.01).margin(1e-14));
    }
    SECTION("eps 0 with generous cutoff returns the law unchanged") {
        const auto base = make_offspring({{0, 0.5L}, {2, 0.5L}});
        const auto law = truncated_family(base, 0.0, 5);
        CHECK(static_cast<double>(law.prob_of(0)) == Approx(0.5));
        CHECK(static_cast<double>(law.prob_of(2)) == Approx(0.5));
        CHECK(static_cast<double>(law.mean) == Approx(1.0).margin(1e-14));
    }
    SECTION("heavy-tail shift magnitude: delta within a factor 4 of eps") {
        const double eps = 0.01;
        const long long m = static_cast<long long>(std::ceil(std::pow(eps, -2.0)));
        const auto base = heavy_tail_offspring_base(1.5, 64 * m);
        // tail-sum oracle for the truncation loss
        long double loss = 0;
        for (const auto& [k, p] : base.pmf)
            if (k > m) loss += p * static_cast<long double>(k - m);
        const double delta = eps + static_cast<double>(loss);
        CHECK(delta >= eps);
        CHECK(delta <= 4 * eps);
        const auto law = truncated_family(base, eps, m);
        CHECK(static_cast<double>(law.mean) == Approx(1.0 + eps).margin(1e-12));
        CHECK(static_cast<double>(base.prob_of(0) - law.prob_of(0)) == Approx(delta).epsilon(1e-10));
        CHECK(law.max_support == m);
    }
    SECTION("infeasible shift") {
        const auto base = make_offspring({{0, 0.005L}, {1, 0.99L}, {2, 0.005L}});
        REQUIRE_THROWS_AS(truncated_family(base, 0.01, 2), infeasible_shift_error);
    }
}

TEST_CASE("degree_surgery") {
    const auto seq = two_atom_sequence(1000000, 0.25);
    SECTION("moment shifts are exact") {
        const long long m = 10000;
        const auto cut = degree_surgery(seq, m);
        CHECK(cut.ell == seq.ell);
        CHECK(sum_dd1(cut) - sum_dd1(seq) == 2 * m); // integer-exact 2m shift
        const auto st0 = stats(seq);
        const auto st1 = stats(cut);
        CHECK(st1.mu == Approx(st0.mu).epsilon(1e-14));
        const double dff = st1.nu * st1.mu - st0.nu * st0.mu; // E D(D-1) change
        CHECK(dff == Approx(2.0 * m / 1e6).epsilon(1e-9));
        CHECK(st1.eps == Approx(st0.eps + 2.0 * m / (1e6 * st0.mu)).margin(1e-12));
        CHECK(st1.R - st0.R == Approx(6.0 * m / 1e6).margin(1e-12));
        CHECK(cut.counts.at(0) == m);
        CHECK(cut.counts.at(2) == m);
    }
    SECTION("m = 0 is the identity") {
        const auto same = degree_surgery(seq, 0);
        CHECK(same.counts == seq.counts);
    }
    SECTION("infeasible when n_1 < 2m") {
        REQUIRE_THROWS_AS(degree_surgery(two_atom_sequence(10, 0.0), 6), infeasible_surgery_error);
    }
}

TEST_CASE("degree sequence CSV round trips") {
    const auto seq = two_atom_sequence(101, 0.25); // odd n exercises the fixup
    REQUIRE(seq.fixup_applied);
    SECTION("counts form") {
        std::stringstream ss;
        save_degree_counts(seq, ss);
        const auto back = load_degree_file(ss);
        CHECK(back.counts == seq.counts);
        CHECK(back.ell == seq.ell);
    }
    SECTION("explicit form") {
        std::stringstream ss;
        save_degree_list(seq, ss);
        const auto back = load_degree_file(ss);
        CHECK(back.counts == seq.counts);
    }
    SECTION("bad header") {
        std::stringstream ss("a,b\n1,2\n");
        REQUIRE_THROWS_AS(load_degree_file(ss), config_error);
    }
    SECTION("odd total degree is rejected at construction") {
        REQUIRE_THROWS_AS(DegreeSequence::from_degrees({1, 1, 1}), parity_error);
    }
}

TEST_CASE("pmf CSV round trip") {
    const auto law = e3_offspring(100, 0.1, 1e-3);
    std::stringstream ss;
    save_pmf(law, ss);
    const auto back = load_pmf_file(ss);
    REQUIRE(back.pmf.size() == law.pmf.size());
    CHECK(static_cast<double>(back.mean) == Approx(static_cast<double>(law.mean)).epsilon(1e-15));
}

TEST_CASE("moment ordering and the max-degree bound") {
    // R >= m2 >= mu when all degrees are >= 1, delta <= (n R)^{1/3}, and
    // kappa_n > 0 whenever eps > 0.
    std::vector<DegreeSequence> seqs;
    seqs.push_back(power_law_sequence(2.5, 10000));
    seqs.push_back(power_law_sequence(3.5, 10000));
    seqs.push_back(two_atom_sequence_for_eps(10000, 0.05));
    seqs.push_back(two_atom_sequence(10000, 0.25));
    for (const auto& seq : seqs) {
        const auto st = stats(seq);
        CHECK(st.R >= st.m2 * (1 - 1e-12));
        CHECK(st.m2 >= st.mu * (1 - 1e-12));
        CHECK(static_cast<double>(st.delta) <=
              std::pow(static_cast<double>(st.n) * st.R, 1.0 / 3.0) * (1 + 1e-12));
        if (st.eps > 0) CHECK(st.kappa_n > 0);
    }
}

TEST_CASE("generated sequences always have an even half-edge total") {
    Rng rng(99);
    const auto pmf = make_offspring({{1, 0.3L}, {2, 0.3L}, {3, 0.4L}});
    for (int rep = 0; rep < 20; ++rep) {
        const long long n = 51 + 37 * rep;
        CHECK(from_iid_pmf(pmf, n, rng).ell % 2 == 0);
        CHECK(power_law_sequence(2.2 + 0.1 * rep, n).ell % 2 == 0);
        CHECK(two_atom_sequence(n, 0.25).ell % 2 == 0);
    }
}
