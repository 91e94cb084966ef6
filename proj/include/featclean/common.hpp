#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace featclean {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using RowMatrixXd = RowMatrix<double>;
using RowMatrixXi = RowMatrix<int>;

/// N x d features, one instance per row.
using FeatureMatrix = RowMatrixXd;

/// Class indices in [0, K).
using LabelVector = std::vector<int>;

using FlagVector = std::vector<bool>;

// Error taxonomy. The CLI maps ConfigError to exit 1, DataError (and its
// subclasses) to exit 2 and anything else to exit 3.

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FormatError : public DataError {
public:
    using DataError::DataError;
};

class ValidationError : public DataError {
public:
    using DataError::DataError;
};

class ParseError : public DataError {
public:
    using DataError::DataError;
};

class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class InternalError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

} // namespace featclean
