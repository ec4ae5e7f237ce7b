#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "nearcrit/config_model.hpp"
#include "nearcrit/degree_model.hpp"
#include "nearcrit/experiments.hpp"
#include "nearcrit/exploration.hpp"
#include "nearcrit/gw_survival.hpp"
#include "nearcrit/theory.hpp"

namespace {

std::uint64_t default_seed() {
    if (const char* env = std::getenv("NEARCRIT_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw nearcrit::config_error("NEARCRIT_SEED is not an integer");
        }
    }
    return 0;
}

std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw nearcrit::config_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

nearcrit::DegreeSequence load_degrees(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw nearcrit::config_error("cannot open degree file: " + path);
    return nearcrit::load_degree_file(is);
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path);
    if (!os) throw nearcrit::config_error("cannot open output file: " + path);
    return os;
}

void cmd_stats(const std::string& degree_path, bool with_regime) {
    const nearcrit::DegreeSequence seq = load_degrees(degree_path);
    const nearcrit::DegreeStats st = nearcrit::stats(seq);
    std::cout.precision(12);
    std::cout << "n=" << st.n << "\nell=" << st.ell << "\nmu=" << st.mu << "\nnu=" << st.nu
              << "\neps=" << st.eps << "\nm2=" << st.m2 << "\nR=" << st.R
              << "\nkappa_n=" << st.kappa_n << "\ndelta=" << st.delta
              << "\nfixup=" << (seq.fixup_applied ? 1 : 0) << '\n';
    if (with_regime) {
        const nearcrit::RegimeReport r = nearcrit::regime_report(st);
        std::cout << "regime=" << nearcrit::phase_name(r.regime) << "\nmargin=" << r.margin
                  << "\nthreshold=" << r.threshold << "\ncritical_scale=" << r.critical_scale
                  << "\nt1=" << r.t1 << "\ndelta_condition=" << r.delta_condition << '\n';
    }
}

void cmd_survival(const std::string& pmf_path) {
    std::ifstream is(pmf_path);
    if (!is) throw nearcrit::config_error("cannot open pmf file: " + pmf_path);
    const nearcrit::OffspringDistribution dist = nearcrit::load_pmf_file(is);
    const nearcrit::SurvivalSolution sol = nearcrit::solve_rho(dist);
    std::cout.precision(15);
    std::cout << "mean=" << dist.mean << "\nsecond_moment=" << dist.second_moment
              << "\nrho=" << sol.rho << "\nalpha=" << sol.alpha << "\nresidual=" << sol.residual
              << "\niterations=" << sol.iterations << "\nbracket=" << sol.bracket << '\n';
    if (dist.mean > 1.0)
        std::cout << "lower_bound=" << nearcrit::survival_lower_bound(dist) << '\n';
}

void cmd_generate(const std::string& degree_path, std::uint64_t seed, bool simple,
                  int max_attempts, const std::string& out_path) {
    const nearcrit::DegreeSequence seq = load_degrees(degree_path);
    nearcrit::Rng rng(seed);
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx",
                  static_cast<unsigned long long>(nearcrit::fnv1a64(read_file(degree_path))));
    nearcrit::MultiGraph g;
    if (simple) {
        const nearcrit::SampleSimpleResult sr = nearcrit::sample_simple(seq, rng, max_attempts);
        g = sr.graph;
        std::cerr << "simple graph found after " << sr.attempts << " attempt(s)\n";
    } else {
        g = nearcrit::pair_half_edges(seq, rng);
    }
    if (out_path.empty()) {
        nearcrit::save_graph(g, std::cout, hash);
    } else {
        auto os = open_out(out_path);
        nearcrit::save_graph(g, os, hash);
    }
}

void cmd_explore(const std::string& degree_path, std::uint64_t seed, const std::string& trace_path,
                 const std::string& boundaries_path) {
    const nearcrit::DegreeSequence seq = load_degrees(degree_path);
    nearcrit::Rng rng(seed);
    const nearcrit::ExploreResult er = nearcrit::explore(seq, rng);
    if (trace_path.empty()) {
        nearcrit::write_trace_csv(er.trace, std::cout);
    } else {
        auto os = open_out(trace_path);
        nearcrit::write_trace_csv(er.trace, os);
    }
    if (!boundaries_path.empty()) {
        auto os = open_out(boundaries_path);
        nearcrit::write_boundaries_csv(er.trace, os);
    }
    long long v1 = 0, e1 = 0, k1 = 0;
    for (const auto& c : er.trace.components) {
        if (c.v > v1) {
            v1 = c.v;
            e1 = c.e;
            k1 = c.k;
        }
    }
    std::cerr << "components=" << er.trace.components.size() + er.trace.n0 << " cycles="
              << er.trace.final_cycles << " largest v=" << v1 << " e=" << e1 << " k=" << k1 << '\n';
}

void cmd_experiment(const std::string& config_path, int threads_override,
                    const std::string& out_override, const std::string& predictions_out) {
    nearcrit::ExperimentConfig cfg = nearcrit::parse_config_file(config_path);
    if (threads_override > 0) cfg.threads = threads_override;
    if (!out_override.empty()) cfg.out_path = out_override;
    const nearcrit::ExperimentResult res = nearcrit::run(cfg);
    if (cfg.out_path.empty()) {
        nearcrit::write_csv(res, cfg, std::cout);
    } else {
        auto os = open_out(cfg.out_path);
        nearcrit::write_csv(res, cfg, os);
    }
    if (!predictions_out.empty()) {
        auto os = open_out(predictions_out);
        nearcrit::write_predictions_csv(res.predictions, os);
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"near-critical configuration model toolkit"};
    app.require_subcommand(1);

    std::string degree_path, pmf_path, config_path;
    std::string out_path, trace_path, boundaries_path, predictions_path;
    std::uint64_t seed = 0;
    bool simple = false, with_regime = false;
    int max_attempts = 200, threads = 0;

    auto* stats_cmd = app.add_subcommand("stats", "degree statistics of a degree file");
    stats_cmd->add_option("degree-file", degree_path)->required();
    stats_cmd->add_flag("--regime", with_regime, "append the scaling-regime report");

    auto* survival_cmd = app.add_subcommand("survival", "survival probability of an offspring pmf");
    survival_cmd->add_option("pmf-file", pmf_path)->required();

    auto* generate_cmd = app.add_subcommand("generate", "pair half-edges into a multigraph");
    generate_cmd->add_option("degree-file", degree_path)->required();
    generate_cmd->add_option("--seed", seed);
    generate_cmd->add_flag("--simple", simple, "condition on simplicity by rejection");
    generate_cmd->add_option("--max-attempts", max_attempts);
    generate_cmd->add_option("--out", out_path, "edge-list CSV path (default stdout)");

    auto* explore_cmd = app.add_subcommand("explore", "run the exploration process");
    explore_cmd->add_option("degree-file", degree_path)->required();
    explore_cmd->add_option("--seed", seed);
    explore_cmd->add_option("--trace-out", trace_path, "trace CSV path (default stdout)");
    explore_cmd->add_option("--boundaries-out", boundaries_path, "component boundary CSV path");

    auto* experiment_cmd = app.add_subcommand("experiment", "run a replicated experiment");
    experiment_cmd->add_option("config-file", config_path)->required();
    experiment_cmd->add_option("--threads", threads, "worker pool size (overrides config)");
    experiment_cmd->add_option("--out", out_path, "result CSV path (overrides config)");
    experiment_cmd->add_option("--predictions-out", predictions_path,
                               "per-n prediction bundle CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    const bool seed_given =
        generate_cmd->count("--seed") > 0 || explore_cmd->count("--seed") > 0;
    try {
        if (!seed_given) seed = default_seed();
        if (stats_cmd->parsed()) cmd_stats(degree_path, with_regime);
        else if (survival_cmd->parsed()) cmd_survival(pmf_path);
        else if (generate_cmd->parsed()) cmd_generate(degree_path, seed, simple, max_attempts, out_path);
        else if (explore_cmd->parsed()) cmd_explore(degree_path, seed, trace_path, boundaries_path);
        else if (experiment_cmd->parsed())
            cmd_experiment(config_path, threads, out_path, predictions_path);
    } catch (const nearcrit::config_error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const nearcrit::error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
