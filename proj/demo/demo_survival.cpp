// Solve survival probabilities for a few offspring laws and check them
// against a quick Monte Carlo run.
#include <cstdio>

#include "nearcrit/degree_model.hpp"
#include "nearcrit/gw_survival.hpp"

int main() {
    using namespace nearcrit;
    struct Entry {
        const char* name;
        OffspringDistribution law;
    };
    const Entry entries[] = {
        {"X in {0,1,2}, eps=0.05", make_offspring({{0, 0.05L}, {1, 0.85L}, {2, 0.10L}})},
        {"binary 0.25/0.75", make_offspring({{0, 0.25L}, {2, 0.75L}})},
        {"size-biased {1,3} mix", make_offspring({{0, 0.4375L}, {2, 0.5625L}})},
    };
    std::printf("%-24s %10s %10s %12s %12s\n", "law", "rho", "bound", "mc", "mc 3se");
    for (const auto& e : entries) {
        const auto sol = solve_rho(e.law);
        const auto mc = mc_extinction(e.law, 20000, 1000000000LL, 10000, 1, 2);
        std::printf("%-24s %10.6f %10.6f %12.6f %12.6f\n", e.name, sol.rho,
                    survival_lower_bound(e.law), mc.estimate, 3 * mc.stderr_);
    }
    return 0;
}
