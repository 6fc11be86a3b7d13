#pragma once

#include <stdexcept>
#include <string>

namespace peridrift {

// Operation not defined for the given signal class (e.g. theta-derivative
// of a piecewise signal).
struct UnsupportedOperation : std::logic_error {
    using std::logic_error::logic_error;
};

// Euler step produced a non-finite value; carries the failing time.
struct SimulationDiverged : std::runtime_error {
    explicit SimulationDiverged(double when)
        : std::runtime_error("simulation diverged at t=" + std::to_string(when)), t(when) {}
    double t;
};

// A required grid point (theta-multiple, interval endpoint, ...) is missing.
struct GridAlignmentError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InsufficientHorizon : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Asymptotic-regime precondition violated (e.g. overlapping jump intervals
// below the disjointness threshold).
struct RegimeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Search/sampling grid too small (argmax pushed to the boundary).
struct MarginError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Too many replicate-level aborts in a Monte Carlo run.
struct RunAbortError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace peridrift
