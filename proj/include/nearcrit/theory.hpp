#pragma once

#include <cmath>
#include <map>
#include <string>

#include "nearcrit/degree_model.hpp"
#include "nearcrit/errors.hpp"
#include "nearcrit/gw_survival.hpp"
#include "nearcrit/numerics.hpp"

namespace nearcrit {

// Predicted giant-component growth functions: g_hat(t) = mu t, h_hat = 2 mu t.
inline double g_hat(double mu, double t) { return mu * t; }
inline double h_hat(double mu, double t) { return 2.0 * mu * t; }

// h(x) = (1 + x/2) e^{-x} - 1 + x/2, the complexity kernel. Nonnegative,
// convex, h(x) <= x^3/12. Series below 1e-3, cancellation-free expm1
// decomposition h = phi(x) + (x/2) expm1(-x) above.
inline double complexity_h(double x) {
    if (x < 0.0) throw invalid_parameter_error("complexity_h: x >= 0 required");
    if (x < 1e-3) {
        return x * x * x * (1.0 / 12.0 + x * (-1.0 / 24.0 + x * (1.0 / 80.0 - x / 360.0)));
    }
    return phi(x) + 0.5 * x * std::expm1(-x);
}

struct ChiForms {
    double stable = 0; // E h(alpha D) - (1/2) E D h(2 alpha)
    double direct = 0; // (1/2) mu (1 - e^{-2 alpha}) - E(1 - e^{-alpha D})
};

inline ChiForms chi_forms(const DegreeSequence& seq, double rho) {
    if (!(rho >= 0.0 && rho < 1.0)) throw invalid_parameter_error("chi: rho in [0,1) required");
    ChiForms f;
    if (rho == 0.0) return f;
    const double alpha = -std::log1p(-rho);
    const double n = static_cast<double>(seq.n);
    CompensatedSum<> mu_sum, h_sum, e_sum;
    for (auto it = seq.counts.rbegin(); it != seq.counts.rend(); ++it) {
        const double k = static_cast<double>(it->first);
        const double nk = static_cast<double>(it->second);
        mu_sum.add(k * nk);
        h_sum.add(nk * complexity_h(alpha * k));
        e_sum.add(nk * std::expm1(-alpha * k));
    }
    const double mu = mu_sum.value() / n;
    f.stable = h_sum.value() / n - 0.5 * mu * complexity_h(2.0 * alpha);
    f.direct = e_sum.value() / n - 0.5 * mu * std::expm1(-2.0 * alpha);
    return f;
}

// Per-vertex complexity density chi_n of the largest component. Returns the
// cancellation-free form after checking the two algebraic routes agree.
inline double chi(const DegreeSequence& seq, double rho) {
    const ChiForms f = chi_forms(seq, rho);
    const double tol = std::max(1e-12, 1e-6 * std::abs(f.stable));
    if (std::abs(f.stable - f.direct) > tol)
        throw numerical_instability_error("chi: the two forms disagree (rho not a fixed point?)");
    return f.stable;
}

struct Td3Forms {
    double rho_form = 0; // (kappa mu / 12) rho^3
    double eps_form = 0; // (2 mu / (3 kappa^2)) eps^3
};

// Finite-third-moment closed forms for k(C1)/n; agree within 1 + O(rho)
// when rho ~ 2 eps / kappa.
inline Td3Forms chi_td3_closed_form(const DegreeStats& st, double rho) {
    Td3Forms f;
    if (st.eps <= 0.0) return f;
    f.rho_form = st.kappa_n * st.mu / 12.0 * rho * rho * rho;
    f.eps_form = 2.0 * st.mu / (3.0 * st.kappa_n * st.kappa_n) * st.eps * st.eps * st.eps;
    return f;
}

struct GiantPrediction {
    double v1 = 0;                        // mu rho n
    double e1 = 0;                        // equals v1 (h_hat = 2 g_hat)
    double v2_order = 0;                  // rho n, the upper-envelope scale for C2
    std::map<int, double> degree_profile; // k -> mu rho P(D* = k) n = rho k n_k
    double giant_fraction_exact = 0;      // E(1 - (1-rho)^D) n, the finite-n proxy
};

inline GiantPrediction predict_giant(const DegreeSequence& seq, double rho) {
    GiantPrediction p;
    if (rho <= 0.0) return p; // no giant
    if (rho >= 1.0) throw invalid_parameter_error("predict_giant: rho in (0,1) required");
    const DegreeStats st = stats(seq);
    p.v1 = st.mu * rho * static_cast<double>(st.n);
    p.e1 = p.v1;
    p.v2_order = rho * static_cast<double>(st.n);
    const double l = std::log1p(-rho);
    CompensatedSum<> frac;
    for (auto it = seq.counts.rbegin(); it != seq.counts.rend(); ++it) {
        const double k = static_cast<double>(it->first);
        const double nk = static_cast<double>(it->second);
        if (it->first > 0) p.degree_profile[it->first] = rho * k * nk;
        frac.add(-nk * std::expm1(k * l));
    }
    p.giant_fraction_exact = frac.value();
    return p;
}

struct ThirdMomentForms {
    double td3_value = 0;      // 2 mu eps n / kappa_n
    double tdx_lower = 0;      // same finite-n expression, the proven lower scale
    double win_scale = 0;      // eps n / E D^3
    double reda_rho_scale = 0; // eps / E D^3
    bool reda_valid = false;   // alpha * Delta <= 1, where the min resolves
    bool supercritical = false;
};

inline ThirdMomentForms predict_third_moment_forms(const DegreeStats& st, double alpha) {
    ThirdMomentForms f;
    if (st.eps <= 0.0) return f;
    if (st.kappa_n <= 0.0)
        throw degenerate_sequence_error("predict_third_moment_forms: kappa_n = 0");
    f.supercritical = true;
    const double n = static_cast<double>(st.n);
    f.td3_value = 2.0 * st.mu * st.eps * n / st.kappa_n;
    f.tdx_lower = f.td3_value;
    f.win_scale = st.eps * n / st.R;
    f.reda_rho_scale = st.eps / st.R;
    f.reda_valid = alpha * static_cast<double>(st.delta) <= 1.0;
    return f;
}

enum class phase {
    subcritical,
    critical_window,
    barely_supercritical,
};

inline const char* phase_name(phase p) {
    switch (p) {
        case phase::subcritical: return "subcritical";
        case phase::critical_window: return "critical-window";
        case phase::barely_supercritical: return "barely-supercritical";
    }
    return "?";
}

struct RegimeReport {
    double threshold = 0;       // n^{-1/3} R^{2/3}
    double margin = 0;          // eps / threshold
    double critical_scale = 0;  // n^{2/3} R^{-1/3}
    double t1 = 0;              // (n R)^{-1/3}
    double delta_condition = 0; // Delta / (n R)^{1/3}
    double margin_cut = 10.0;
    phase regime = phase::critical_window;
};

// The supercritical/critical dichotomy has no finite-n boundary in the
// theory; the margin cut (default 10) is a reported artifact convention.
inline RegimeReport regime_report(const DegreeStats& st, double margin_cut = 10.0) {
    RegimeReport r;
    const double n = static_cast<double>(st.n);
    r.margin_cut = margin_cut;
    r.threshold = std::pow(n, -1.0 / 3.0) * std::pow(st.R, 2.0 / 3.0);
    r.margin = st.eps / r.threshold;
    r.critical_scale = std::pow(n, 2.0 / 3.0) * std::pow(st.R, -1.0 / 3.0);
    r.t1 = std::pow(n * st.R, -1.0 / 3.0);
    r.delta_condition = static_cast<double>(st.delta) * r.t1;
    if (r.margin > margin_cut) {
        r.regime = phase::barely_supercritical;
    } else if (r.margin >= -margin_cut) {
        r.regime = phase::critical_window;
    } else {
        r.regime = phase::subcritical;
    }
    return r;
}

} // namespace nearcrit
