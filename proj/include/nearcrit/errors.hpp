#pragma once

#include <stdexcept>
#include <string>

namespace nearcrit {

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct invalid_parameter_error : error {
    using error::error;
};

// All-isolated degree sequence (ell = 0) or a zero-mean pmf: nu is undefined.
struct degenerate_sequence_error : error {
    using error::error;
};

// P(X = 1) = 1: every q in [0,1] is a fixed point of the generating function.
struct degenerate_offspring_error : error {
    using error::error;
};

// truncated_family: base law has P(X=0) < delta, the mass shift is impossible.
struct infeasible_shift_error : error {
    using error::error;
};

// degree_surgery: fewer than 2m vertices of degree 1.
struct infeasible_surgery_error : error {
    using error::error;
};

// Odd number of half-edges cannot be paired.
struct parity_error : error {
    using error::error;
};

struct rejection_failure_error : error {
    int attempts;
    rejection_failure_error(const std::string& msg, int att) : error(msg), attempts(att) {}
};

struct corrupt_trace_error : error {
    using error::error;
};

// The two algebraic forms of chi disagree beyond tolerance.
struct numerical_instability_error : error {
    using error::error;
};

struct insufficient_data_error : error {
    using error::error;
};

struct config_error : error {
    using error::error;
};

} // namespace nearcrit
