#include "regret_forge/row_solvers.hpp"

#include "regret_forge/errors.hpp"
#include "regret_forge/softmax.hpp"

#include <algorithm>
#include <cmath>

namespace regret_forge {

QuadraticRowTerms QuadraticRowTerms::zeros(int num_actions) {
    return {Eigen::VectorXd::Zero(num_actions), Eigen::VectorXd::Zero(num_actions), Eigen::VectorXd::Zero(num_actions)};
}

QuadraticRowTerms QuadraticRowTerms::from_targets(const std::vector<std::vector<double>>& targets) {
    QuadraticRowTerms terms = zeros(static_cast<int>(targets.size()));
    for (std::size_t a = 0; a < targets.size(); ++a)
        for (double y : targets[a]) terms.add(static_cast<int>(a), y);
    return terms;
}

double rlsvi_row_solve(std::span<const double> targets, double prior, double sigma0_sq) {
    if (!(sigma0_sq > 0.0)) throw InvalidArgs("rlsvi_row_solve: sigma0_sq must be positive");
    double sum = 0.0;
    for (double y : targets) sum += y;
    return ridge_closed_form(sum, static_cast<double>(targets.size()), prior, sigma0_sq);
}

double il_loss(const Eigen::VectorXd& q_row, const Eigen::VectorXd& weights, double beta) {
    return weights.sum() * log_sum_exp(q_row, beta) - beta * weights.dot(q_row);
}

Eigen::VectorXd il_loss_gradient(const Eigen::VectorXd& q_row, const Eigen::VectorXd& weights, double beta) {
    return beta * (weights.sum() * softmax(q_row, beta) - weights);
}

double combined_loss_alpha(double rlsvi_part, double il_part, double alpha, double lambda2, double beta) {
    return alpha * rlsvi_part + (1.0 - alpha) * il_part + lambda2 * beta;
}

double rlsvi_row_loss(const QuadraticRowTerms& quad, const Eigen::VectorXd& prior_row, double sigma0_sq,
                      const Eigen::VectorXd& q_row) {
    // 1/2 sum (q - y)^2 = 1/2 (n q^2 - 2 q sum y + sum y^2)
    const Eigen::ArrayXd q = q_row.array();
    const double td = 0.5 * (quad.count.array() * q.square() - 2.0 * q * quad.target_sum.array() +
                             quad.target_sq_sum.array()).sum();
    return td + (q_row - prior_row).squaredNorm() / (2.0 * sigma0_sq);
}

double irlsvi_row_objective(const QuadraticRowTerms& quad, const Eigen::VectorXd& il_weights, double beta,
                            const Eigen::VectorXd& prior_row, const RowSolverOptions& options,
                            const Eigen::VectorXd& q_row) {
    return options.alpha * rlsvi_row_loss(quad, prior_row, options.sigma0_sq, q_row) +
           (1.0 - options.alpha) * il_loss(q_row, il_weights, beta);
}

Eigen::VectorXd irlsvi_row_solve(const QuadraticRowTerms& quad, const Eigen::VectorXd& il_weights, double beta,
                                 const Eigen::VectorXd& prior_row, const RowSolverOptions& options,
                                 RowSolveInfo* info) {
    if (!(beta >= 0.0)) throw InvalidArgs("irlsvi_row_solve: beta must be nonnegative");
    if (!(options.sigma0_sq > 0.0)) throw InvalidArgs("irlsvi_row_solve: sigma0_sq must be positive");
    if (!(options.alpha > 0.0 && options.alpha <= 1.0))
        throw InvalidArgs("irlsvi_row_solve: alpha must lie in (0, 1]");
    const Eigen::Index A = prior_row.size();
    const double inv_prior_var = 1.0 / options.sigma0_sq;

    Eigen::VectorXd q(A);
    for (Eigen::Index a = 0; a < A; ++a)
        q(a) = ridge_closed_form(quad.target_sum(a), quad.count(a), prior_row(a), options.sigma0_sq);
    if (info) *info = {};

    const double il_total = il_weights.sum();
    if (beta == 0.0 || il_total == 0.0 || options.alpha == 1.0) return q;

    const double alpha = options.alpha;
    const double gamma = 1.0 - alpha;
    const Eigen::ArrayXd curvature = quad.count.array() + inv_prior_var;
    const Eigen::ArrayXd linear = quad.target_sum.array() + prior_row.array() * inv_prior_var;
    auto objective = [&](const Eigen::VectorXd& x) {
        return alpha * (0.5 * (curvature * x.array().square()).sum() - (linear * x.array()).sum()) +
               gamma * il_loss(x, il_weights, beta);
    };

    // Gradient terms grow with the row's data; the tolerance is relative to their size.
    const double scale = 1.0 + std::max(alpha * linear.abs().maxCoeff(), gamma * beta * il_total);
    const double tol = options.tol * scale;

    double value = objective(q);
    for (int iter = 0; iter < options.max_iters; ++iter) {
        const Eigen::VectorXd pi = softmax(q, beta);
        const Eigen::VectorXd gradient =
            alpha * (curvature * q.array() - linear).matrix() + gamma * beta * (il_total * pi - il_weights);
        const double gnorm = gradient.lpNorm<Eigen::Infinity>();
        if (info) *info = {iter, gnorm};
        if (gnorm <= tol) return q;

        Eigen::MatrixXd hessian = gamma * beta * beta * il_total * (Eigen::MatrixXd(pi.asDiagonal()) - pi * pi.transpose());
        hessian.diagonal() += alpha * curvature.matrix();
        const Eigen::VectorXd step = hessian.ldlt().solve(gradient);

        // Near the optimum the decrease falls below the rounding error of the objective.
        const double slack = 1e-13 * (1.0 + std::abs(value));
        double t = 1.0;
        Eigen::VectorXd candidate = q - step;
        double candidate_value = objective(candidate);
        for (int k = 0; k < options.max_halvings && !(candidate_value <= value + slack); ++k) {
            t *= 0.5;
            candidate = q - t * step;
            candidate_value = objective(candidate);
        }
        q = std::move(candidate);
        value = candidate_value;
    }

    const Eigen::VectorXd pi = softmax(q, beta);
    const Eigen::VectorXd gradient =
        alpha * (curvature * q.array() - linear).matrix() + gamma * beta * (il_total * pi - il_weights);
    const double gnorm = gradient.lpNorm<Eigen::Infinity>();
    if (info) *info = {options.max_iters, gnorm};
    if (gnorm <= tol) return q;
    throw SolverDiverged("irlsvi_row_solve: gradient norm " + std::to_string(gnorm) + " above tolerance after " +
                         std::to_string(options.max_iters) + " iterations");
}

} // namespace regret_forge
