#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace mvrad {

/// Dense row-major matrix of 64-bit floats; rows are samples.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Binary class labels, one byte per sample (values 0 or 1).
using Labels = std::vector<std::uint8_t>;

/// Ordered set of row indices into a cohort.
using RowIndex = std::vector<std::size_t>;

}  // namespace mvrad
