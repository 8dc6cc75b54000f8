#pragma once

#include <Eigen/Dense>
#include <random>

#include "smcsynth/matkernel.hpp"

namespace testutil {

inline Eigen::MatrixXd to_eigen(const smcsynth::Matrix& m) {
    Eigen::MatrixXd e(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) e(r, c) = m(r, c);
    return e;
}

inline smcsynth::Matrix from_eigen(const Eigen::MatrixXd& e) {
    smcsynth::Matrix m(e.rows(), e.cols());
    for (Eigen::Index r = 0; r < e.rows(); ++r)
        for (Eigen::Index c = 0; c < e.cols(); ++c) m(r, c) = e(r, c);
    return m;
}

inline double eig_min(const smcsynth::Matrix& m) {
    Eigen::MatrixXd e = to_eigen(m);
    e = 0.5 * (e + e.transpose()).eval();
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(e).eigenvalues().minCoeff();
}

inline double eig_max(const smcsynth::Matrix& m) {
    Eigen::MatrixXd e = to_eigen(m);
    e = 0.5 * (e + e.transpose()).eval();
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(e).eigenvalues().maxCoeff();
}

inline smcsynth::Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    smcsynth::Matrix m(r, c);
    for (auto& v : m.data()) v = nd(rng);
    return m;
}

// A A^T + n I.
inline smcsynth::SymMatrix random_pd(std::size_t n, std::mt19937_64& rng) {
    const smcsynth::Matrix a = random_matrix(n, n, rng);
    return smcsynth::SymMatrix(a * a.transpose() + smcsynth::Matrix::identity(n) * double(n));
}

inline double max_abs_diff(const smcsynth::Matrix& a, const smcsynth::Matrix& b) {
    return (a - b).max_abs();
}

}  // namespace testutil
