#pragma once

#include <Eigen/Dense>

#include <cmath>

namespace regret_forge {

/// log sum_b exp(beta * x_b), shifted by the max for overflow safety.
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& x, typename Derived::Scalar beta) {
    using Scalar = typename Derived::Scalar;
    const Scalar shift = beta * x.maxCoeff();
    return shift + std::log((beta * x.array() - shift).exp().sum());
}

/// Boltzmann distribution exp(beta x_a) / sum_b exp(beta x_b) as a column vector.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> softmax(const Eigen::MatrixBase<Derived>& x,
                                                                   typename Derived::Scalar beta) {
    using Scalar = typename Derived::Scalar;
    const Scalar shift = beta * x.maxCoeff();
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> weights = (beta * x.array() - shift).exp().matrix().reshaped();
    return weights / weights.sum();
}

} // namespace regret_forge
