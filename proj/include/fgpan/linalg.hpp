#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fgpan {

// Row-major so that the flat scalar order of every parameter leaf matches the
// order in which it is written to checkpoints.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Raised when two tensors that must agree in shape do not.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when an on-disk file does not conform to its format.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shortest decimal that round-trips to the same double.
std::string format_double(double value);

/// Parses a full token as a double; throws FormatError on trailing garbage.
double parse_double(std::string_view token);

/// Numerically stable softmax of a vector.
Vector softmax(const Vector& logits);

inline double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace fgpan
