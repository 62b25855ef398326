#pragma once

#include <Eigen/Core>

#include "prlf/array.hpp"

namespace prlf::detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixView = Eigen::Map<RowMatrix>;
using ConstMatrixView = Eigen::Map<const RowMatrix>;

inline ConstMatrixView view(const DenseArray& a) {
    return ConstMatrixView(a.values().data(), static_cast<Eigen::Index>(a.rows()),
                           static_cast<Eigen::Index>(a.cols()));
}

inline MatrixView view(DenseArray& a) {
    return MatrixView(a.values().data(), static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols()));
}

}  // namespace prlf::detail
