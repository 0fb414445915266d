#pragma once

#include <stdexcept>
#include <string>

namespace tend {

// Bad model/dataset/config wiring: shape mismatches, missing paths,
// stage-tag violations.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A caller passed values outside the documented domain (degenerate crop,
// non-positive margin, unknown enum name).
struct ParamError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Dataset-level failures: empty sets, missing classes.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A metric is undefined on the given input (e.g. single-class AUROC).
struct MetricError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace tend
