#pragma once

#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "nearcrit/config_model.hpp"
#include "nearcrit/degree_model.hpp"
#include "nearcrit/errors.hpp"
#include "nearcrit/exploration.hpp"
#include "nearcrit/gw_survival.hpp"
#include "nearcrit/numerics.hpp"
#include "nearcrit/theory.hpp"

namespace nearcrit {

inline constexpr const char* kVersion = "0.1.0";

inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

enum class family_kind { two_atom, power_law, e3, custom_pmf };
enum class graph_mode { multigraph, simple_conditioned };

// Observables toggles. `graph` drives generation + component statistics,
// `exploration` swaps the generator for the exploration engine and
// cross-checks it against the union-find oracle, `timing` adds the wall_ms
// column (and forfeits byte-identical output).
struct ObservableFlags {
    bool graph = true;
    bool simplicity = true;
    bool exploration = false;
    bool survival = true;
    bool timing = false;
};

struct ExperimentConfig {
    family_kind family = family_kind::two_atom;
    // two-atom
    std::optional<double> eps;
    std::optional<double> p1, p3;
    // power-law
    std::optional<double> gamma;
    // e3: eps = eps_coef n^{-eps_exp}, p = p_coef n^{-p_exp}
    double eps_coef = 1.0, eps_exp = 1.0, p_coef = 1.0, p_exp = 2.0;
    // custom pmf
    std::string pmf_path;

    std::vector<long long> n_grid;
    long long replicates = 1;
    std::uint64_t seed = 0;
    graph_mode mode = graph_mode::multigraph;
    int max_attempts = 200;
    ObservableFlags observables;
    std::string out_path;
    int threads = 1;

    std::string source_text; // raw config bytes, hashed into the output header
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

} // namespace detail

// Config format: a single [experiment] section of `key = value` lines,
// '#'/';' comments, arrays as comma lists.
inline ExperimentConfig parse_config(std::istream& is) {
    ExperimentConfig cfg;
    std::ostringstream raw;
    raw << is.rdbuf();
    cfg.source_text = raw.str();

    std::istringstream text(cfg.source_text);
    std::string line, section;
    std::map<std::string, std::string> kv;
    while (std::getline(text, line)) {
        line = detail::trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[' && line.back() == ']') {
            section = detail::trim(line.substr(1, line.size() - 2));
            if (section != "experiment")
                throw config_error("unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw config_error("expected 'key = value': " + line);
        if (section != "experiment") throw config_error("keys must live in [experiment]");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));
        if (kv.count(key)) throw config_error("duplicate key: " + key);
        kv[key] = val;
    }

    auto take = [&](const char* key) -> std::optional<std::string> {
        auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        std::string v = it->second;
        kv.erase(it);
        return v;
    };
    auto to_double = [](const std::string& v, const char* key) {
        try {
            std::size_t pos = 0;
            const double d = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return d;
        } catch (const std::exception&) {
            throw config_error(std::string("bad numeric value for ") + key + ": " + v);
        }
    };
    auto to_ll = [&](const std::string& v, const char* key) {
        const double d = to_double(v, key);
        if (d != std::floor(d) || std::abs(d) > 9e15)
            throw config_error(std::string("expected integer for ") + key + ": " + v);
        return static_cast<long long>(d);
    };

    const auto fam = take("family");
    if (!fam) throw config_error("missing key: family");
    if (*fam == "two-atom") cfg.family = family_kind::two_atom;
    else if (*fam == "power-law") cfg.family = family_kind::power_law;
    else if (*fam == "e3") cfg.family = family_kind::e3;
    else if (*fam == "custom") cfg.family = family_kind::custom_pmf;
    else throw config_error("unknown family: " + *fam);

    if (auto v = take("eps")) cfg.eps = to_double(*v, "eps");
    if (auto v = take("p1")) cfg.p1 = to_double(*v, "p1");
    if (auto v = take("p3")) cfg.p3 = to_double(*v, "p3");
    if (auto v = take("gamma")) cfg.gamma = to_double(*v, "gamma");
    if (auto v = take("eps_coef")) cfg.eps_coef = to_double(*v, "eps_coef");
    if (auto v = take("eps_exp")) cfg.eps_exp = to_double(*v, "eps_exp");
    if (auto v = take("p_coef")) cfg.p_coef = to_double(*v, "p_coef");
    if (auto v = take("p_exp")) cfg.p_exp = to_double(*v, "p_exp");
    if (auto v = take("pmf")) cfg.pmf_path = *v;

    if (auto v = take("n")) {
        for (const auto& item : detail::split_list(*v)) cfg.n_grid.push_back(to_ll(item, "n"));
    }
    if (auto v = take("replicates")) cfg.replicates = to_ll(*v, "replicates");
    if (auto v = take("seed")) cfg.seed = static_cast<std::uint64_t>(to_ll(*v, "seed"));
    if (auto v = take("max_attempts")) cfg.max_attempts = static_cast<int>(to_ll(*v, "max_attempts"));
    if (auto v = take("threads")) cfg.threads = static_cast<int>(to_ll(*v, "threads"));
    if (auto v = take("out")) cfg.out_path = *v;
    if (auto v = take("mode")) {
        if (*v == "multigraph") cfg.mode = graph_mode::multigraph;
        else if (*v == "simple") cfg.mode = graph_mode::simple_conditioned;
        else throw config_error("mode must be multigraph or simple");
    }
    if (auto v = take("observables")) {
        cfg.observables = ObservableFlags{false, false, false, false, false};
        for (const auto& item : detail::split_list(*v)) {
            if (item == "graph") cfg.observables.graph = true;
            else if (item == "simplicity") cfg.observables.simplicity = true;
            else if (item == "exploration") cfg.observables.exploration = true;
            else if (item == "survival") cfg.observables.survival = true;
            else if (item == "timing") cfg.observables.timing = true;
            else throw config_error("unknown observable: " + item);
        }
    }
    if (!kv.empty()) throw config_error("unknown key: " + kv.begin()->first);

    if (cfg.n_grid.empty()) throw config_error("n grid must be nonempty");
    for (std::size_t i = 1; i < cfg.n_grid.size(); ++i)
        if (cfg.n_grid[i] <= cfg.n_grid[i - 1]) throw config_error("n grid must be ascending");
    if (cfg.replicates < 1) throw config_error("replicates >= 1 required");
    if (cfg.threads < 1) throw config_error("threads >= 1 required");

    switch (cfg.family) {
        case family_kind::two_atom:
            if (!cfg.eps && !cfg.p3) throw config_error("two-atom family needs eps or p1/p3");
            if (cfg.p1 && cfg.p3 && std::abs(*cfg.p1 + *cfg.p3 - 1.0) > 1e-9)
                throw config_error("two-atom: p1 + p3 must be 1");
            break;
        case family_kind::power_law:
            if (!cfg.gamma) throw config_error("power-law family needs gamma");
            break;
        case family_kind::e3:
            if (cfg.observables.graph || cfg.observables.exploration)
                throw config_error("e3 is an offspring family; graph observables unavailable");
            break;
        case family_kind::custom_pmf:
            if (cfg.pmf_path.empty()) throw config_error("custom family needs pmf = <path>");
            break;
    }
    if (cfg.observables.exploration && cfg.mode == graph_mode::simple_conditioned)
        throw config_error("exploration observable requires multigraph mode");
    return cfg;
}

inline ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw config_error("cannot open config file: " + path);
    return parse_config(is);
}

struct ReplicateRow {
    long long n = 0;
    long long replicate = 0;
    double eps = 0;
    double rho = 0;
    long long v1 = 0, e1 = 0, v2 = 0, k1 = 0;
    bool simple = false;
    int attempts = 0;
    double wall_ms = 0;
    bool exploration_consistent = true;
};

struct PredictionBundle {
    long long n = 0;
    double eps = 0, rho = 0, alpha = 0;
    double v1 = 0, v2_scale = 0, chi_n = 0;
    double critical_scale = 0, t1 = 0, margin = 0;
    double simple_prob = 0;
};

struct SummaryEntry {
    long long n = 0;
    std::string observable;
    double mean = 0, median = 0, stderr_ = 0, cv = 0;
    bool cv_defined = true;
    double prediction = 0;
    double ratio_mean = 0, ratio_median = 0; // to prediction, when prediction != 0
};

struct ExperimentResult {
    std::vector<ReplicateRow> rows;
    std::vector<PredictionBundle> predictions;
    std::vector<SummaryEntry> summary;
};

// mean/median/stderr/CV plus the ratio to a prediction. CV is undefined when
// the mean vanishes but the values do not.
inline SummaryEntry summarize(const std::vector<double>& values, double prediction) {
    if (values.empty()) throw insufficient_data_error("summarize: at least one value required");
    SummaryEntry s;
    CompensatedSum<> sum;
    for (double v : values) sum.add(v);
    const double n = static_cast<double>(values.size());
    s.mean = sum.value() / n;
    CompensatedSum<> ss;
    for (double v : values) ss.add((v - s.mean) * (v - s.mean));
    const double sd = values.size() > 1 ? std::sqrt(ss.value() / (n - 1.0)) : 0.0;
    s.stderr_ = sd / std::sqrt(n);
    s.median = median_of(values);
    if (s.mean != 0.0) {
        s.cv = sd / s.mean;
    } else if (sd == 0.0) {
        s.cv = 0.0;
    } else {
        s.cv_defined = false;
    }
    s.prediction = prediction;
    if (prediction != 0.0) {
        s.ratio_mean = s.mean / prediction;
        s.ratio_median = s.median / prediction;
    }
    return s;
}

namespace detail {

inline DegreeSequence build_family_sequence(const ExperimentConfig& cfg, long long n,
                                            const OffspringDistribution* custom,
                                            std::size_t n_index) {
    switch (cfg.family) {
        case family_kind::two_atom:
            if (cfg.p3) return two_atom_sequence(n, *cfg.p3);
            return two_atom_sequence_for_eps(n, *cfg.eps);
        case family_kind::power_law:
            return power_law_sequence(*cfg.gamma, n);
        case family_kind::custom_pmf: {
            Rng rng = Rng::stream(cfg.seed, 0x5eedu + n_index, 0);
            return from_iid_pmf(*custom, n, rng);
        }
        default:
            throw config_error("family has no degree sequence");
    }
}

} // namespace detail

inline ExperimentResult run(const ExperimentConfig& cfg) {
    ExperimentResult res;
    res.rows.resize(static_cast<std::size_t>(cfg.n_grid.size()) *
                    static_cast<std::size_t>(cfg.replicates));

    std::optional<OffspringDistribution> custom;
    if (cfg.family == family_kind::custom_pmf) {
        std::ifstream is(cfg.pmf_path);
        if (!is) throw config_error("cannot open pmf file: " + cfg.pmf_path);
        custom = load_pmf_file(is);
    }

    for (std::size_t ni = 0; ni < cfg.n_grid.size(); ++ni) {
        const long long n = cfg.n_grid[ni];
        PredictionBundle pred;
        pred.n = n;

        if (cfg.family == family_kind::e3) {
            const double eps = cfg.eps_coef * std::pow(static_cast<double>(n), -cfg.eps_exp);
            const double p = cfg.p_coef * std::pow(static_cast<double>(n), -cfg.p_exp);
            const OffspringDistribution law = e3_offspring(n, eps, p);
            const SurvivalSolution sol = solve_rho(law);
            pred.eps = eps;
            pred.rho = sol.rho;
            pred.alpha = sol.alpha;
            res.predictions.push_back(pred);
            for (long long r = 0; r < cfg.replicates; ++r) {
                ReplicateRow row;
                row.n = n;
                row.replicate = r;
                row.eps = eps;
                row.rho = sol.rho;
                res.rows[ni * static_cast<std::size_t>(cfg.replicates) +
                         static_cast<std::size_t>(r)] = row;
            }
            std::vector<double> rhos(static_cast<std::size_t>(cfg.replicates), sol.rho);
            res.summary.push_back(summarize(rhos, 0.0));
            res.summary.back().n = n;
            res.summary.back().observable = "rho";
            continue;
        }

        const DegreeSequence seq = detail::build_family_sequence(cfg, n, custom ? &*custom : nullptr, ni);
        const DegreeStats st = stats(seq);
        SurvivalSolution sol;
        if (st.eps > 0.0) sol = solve_rho(size_biased(seq));
        const RegimeReport regime = regime_report(st);
        pred.eps = st.eps;
        pred.rho = sol.rho;
        pred.alpha = sol.alpha;
        pred.critical_scale = regime.critical_scale;
        pred.t1 = regime.t1;
        pred.margin = regime.margin;
        pred.simple_prob = simple_prob_prediction(st);
        if (sol.rho > 0.0) {
            const GiantPrediction gp = predict_giant(seq, sol.rho);
            pred.v1 = gp.v1;
            pred.v2_scale = gp.v2_order;
            pred.chi_n = chi(seq, sol.rho);
        }
        res.predictions.push_back(pred);

        std::atomic<long long> next{0};
        std::atomic<bool> failed{false};
        std::string failure;
        std::mutex failure_mutex;
        auto worker = [&]() {
            for (;;) {
                const long long r = next.fetch_add(1);
                if (r >= cfg.replicates || failed.load()) break;
                const auto start = std::chrono::steady_clock::now();
                ReplicateRow row;
                row.n = n;
                row.replicate = r;
                row.eps = st.eps;
                row.rho = sol.rho;
                try {
                    Rng rng = Rng::stream(cfg.seed, ni, static_cast<std::uint64_t>(r) + 1);
                    MultiGraph graph;
                    std::optional<ExplorationTrace> trace;
                    if (cfg.observables.exploration) {
                        ExploreResult er = explore(seq, rng);
                        graph = std::move(er.graph);
                        trace = std::move(er.trace);
                    } else if (cfg.mode == graph_mode::simple_conditioned) {
                        SampleSimpleResult sr = sample_simple(seq, rng, cfg.max_attempts);
                        graph = std::move(sr.graph);
                        row.attempts = sr.attempts;
                        row.simple = true;
                    } else {
                        graph = pair_half_edges(seq, rng);
                        row.attempts = 1;
                    }
                    if (cfg.observables.graph || cfg.observables.exploration) {
                        const ComponentStats comp = components(graph);
                        row.v1 = comp.v1;
                        row.e1 = comp.e1;
                        row.v2 = comp.v2;
                        row.k1 = comp.k1;
                        if (trace) {
                            std::vector<ComponentRecord> from_trace =
                                component_sizes_from_trace(*trace);
                            std::vector<std::tuple<long long, long long, long long>> a, b;
                            for (const auto& c : from_trace) a.emplace_back(c.v, c.e, c.k);
                            for (const auto& [cv, ce] : comp.components)
                                b.emplace_back(cv, ce, ce - cv + 1);
                            std::sort(a.begin(), a.end());
                            std::sort(b.begin(), b.end());
                            row.exploration_consistent = a == b;
                        }
                    }
                    if (cfg.observables.simplicity && cfg.mode == graph_mode::multigraph)
                        row.simple = is_simple(graph);
                } catch (const nearcrit::error& e) {
                    bool expected = false;
                    if (failed.compare_exchange_strong(expected, true)) {
                        std::lock_guard<std::mutex> lock(failure_mutex);
                        failure = "n=" + std::to_string(n) + " replicate=" + std::to_string(r) +
                                  ": " + e.what();
                    }
                    break;
                }
                row.wall_ms = std::chrono::duration<double, std::milli>(
                                  std::chrono::steady_clock::now() - start)
                                  .count();
                res.rows[ni * static_cast<std::size_t>(cfg.replicates) +
                         static_cast<std::size_t>(r)] = row;
            }
        };
        const int nthreads = std::max(1, cfg.threads);
        if (nthreads == 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
            for (auto& th : pool) th.join();
        }
        if (failed.load()) throw error(failure);

        if (cfg.observables.graph || cfg.observables.exploration) {
            const auto row_begin = res.rows.begin() + static_cast<std::ptrdiff_t>(
                                                          ni * static_cast<std::size_t>(cfg.replicates));
            auto collect = [&](auto getter) {
                std::vector<double> vals;
                vals.reserve(static_cast<std::size_t>(cfg.replicates));
                for (long long r = 0; r < cfg.replicates; ++r)
                    vals.push_back(static_cast<double>(getter(*(row_begin + r))));
                return vals;
            };
            auto push = [&](const char* name, std::vector<double> vals, double prediction) {
                res.summary.push_back(summarize(vals, prediction));
                res.summary.back().n = n;
                res.summary.back().observable = name;
            };
            push("v1", collect([](const ReplicateRow& r) { return r.v1; }), pred.v1);
            push("e1", collect([](const ReplicateRow& r) { return r.e1; }), pred.v1);
            push("v2", collect([](const ReplicateRow& r) { return r.v2; }), pred.v2_scale);
            push("k1", collect([](const ReplicateRow& r) { return r.k1; }),
                 pred.chi_n * static_cast<double>(n));
            if (cfg.observables.simplicity)
                push("simple", collect([](const ReplicateRow& r) { return r.simple ? 1.0 : 0.0; }),
                     pred.simple_prob);
        }
    }
    return res;
}

// Prediction bundles as plain CSV, one row per grid point.
inline void write_predictions_csv(const std::vector<PredictionBundle>& preds, std::ostream& os) {
    os.precision(12);
    os << "n,eps,rho,alpha,v1,v2_scale,chi_n,critical_scale,t1,margin,simple_prob\n";
    for (const auto& p : preds) {
        os << p.n << ',' << p.eps << ',' << p.rho << ',' << p.alpha << ',' << p.v1 << ','
           << p.v2_scale << ',' << p.chi_n << ',' << p.critical_scale << ',' << p.t1 << ','
           << p.margin << ',' << p.simple_prob << '\n';
    }
}

// CSV output: '#'-prefixed provenance header, one row per replicate, then
// per-n prediction and summary blocks as further '#' lines.
inline void write_csv(const ExperimentResult& res, const ExperimentConfig& cfg, std::ostream& os) {
    os.precision(12);
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(cfg.source_text)));
    os << "# nearcrit-version=" << kVersion << '\n';
    os << "# config-hash=" << hash << '\n';
    os << "# seed=" << cfg.seed << '\n';
    os << "n,replicate,eps,rho,v1,e1,v2,k1,simple,attempts";
    if (cfg.observables.timing) os << ",wall_ms";
    os << '\n';
    for (const auto& r : res.rows) {
        os << r.n << ',' << r.replicate << ',' << r.eps << ',' << r.rho << ',' << r.v1 << ','
           << r.e1 << ',' << r.v2 << ',' << r.k1 << ',' << (r.simple ? 1 : 0) << ',' << r.attempts;
        if (cfg.observables.timing) os << ',' << r.wall_ms;
        os << '\n';
    }
    for (const auto& p : res.predictions) {
        os << "# predict n=" << p.n << " eps=" << p.eps << " rho=" << p.rho << " alpha=" << p.alpha
           << " v1=" << p.v1 << " v2_scale=" << p.v2_scale << " chi_n=" << p.chi_n
           << " critical_scale=" << p.critical_scale << " t1=" << p.t1 << " margin=" << p.margin
           << " simple_prob=" << p.simple_prob << '\n';
    }
    for (const auto& s : res.summary) {
        os << "# summary n=" << s.n << " obs=" << s.observable << " mean=" << s.mean
           << " median=" << s.median << " stderr=" << s.stderr_ << " cv=";
        if (s.cv_defined) os << s.cv;
        else os << "undefined";
        os << " prediction=" << s.prediction << " ratio_mean=" << s.ratio_mean
           << " ratio_median=" << s.ratio_median << '\n';
    }
}

} // namespace nearcrit
