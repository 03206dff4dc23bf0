#pragma once

#include <complex>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace knadi {

using Complex = std::complex<double>;

using SpMat = Eigen::SparseMatrix<double>;                   // compressed column
using SpMatRow = Eigen::SparseMatrix<double, Eigen::RowMajor>;  // compressed row
using SpMatC = Eigen::SparseMatrix<Complex>;

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

enum class NormKind { frobenius, spectral };

}  // namespace knadi
