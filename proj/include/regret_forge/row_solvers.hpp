#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace regret_forge {

/**
 * Sufficient statistics of the squared TD terms of one Q row: for each action,
 * the number of targets, their sum and their sum of squares.
 */
struct QuadraticRowTerms {
    Eigen::VectorXd count;
    Eigen::VectorXd target_sum;
    Eigen::VectorXd target_sq_sum;

    static QuadraticRowTerms zeros(int num_actions);
    /// Built from explicit per-action target lists.
    static QuadraticRowTerms from_targets(const std::vector<std::vector<double>>& targets);

    void add(int action, double target) {
        count(action) += 1.0;
        target_sum(action) += target;
        target_sq_sum(action) += target * target;
    }
};

struct RowSolverOptions {
    double sigma0_sq = 1.0;
    /// Weight of the value-fitting part; the imitation part gets 1 - alpha.
    double alpha = 0.5;
    /// Gradient tolerance, scaled by 1 + the largest linear coefficient of the row.
    double tol = 1e-8;
    int max_iters = 100;
    /// Step halvings allowed per Newton step before the step is taken anyway.
    int max_halvings = 30;
};

struct RowSolveInfo {
    int iterations = 0;
    double gradient_norm = 0.0;
};

/// argmin_q 1/2 sum (q - y)^2 + (q - prior)^2 / (2 sigma0^2), from sufficient statistics.
inline double ridge_closed_form(double target_sum, double count, double prior, double sigma0_sq) {
    return (target_sum + prior / sigma0_sq) / (count + 1.0 / sigma0_sq);
}

/// Closed-form minimizer of the per-cell quadratic: (sum y + prior/sigma0^2) / (n + 1/sigma0^2).
double rlsvi_row_solve(std::span<const double> targets, double prior, double sigma0_sq);

/// sum_a w_a [log sum_b exp(beta q_b) - beta q_a].
double il_loss(const Eigen::VectorXd& q_row, const Eigen::VectorXd& weights, double beta);

/// Gradient of il_loss in q: beta (W softmax(beta q) - w), W = sum_a w_a.
Eigen::VectorXd il_loss_gradient(const Eigen::VectorXd& q_row, const Eigen::VectorXd& weights, double beta);

/// alpha * rlsvi_part + (1 - alpha) * il_part + lambda2 * beta.
double combined_loss_alpha(double rlsvi_part, double il_part, double alpha, double lambda2, double beta);

/// Value-fitting part of a row objective: TD squares plus the prior penalty, constants included.
double rlsvi_row_loss(const QuadraticRowTerms& quad, const Eigen::VectorXd& prior_row, double sigma0_sq,
                      const Eigen::VectorXd& q_row);

/// alpha * rlsvi_row_loss + (1 - alpha) * il_loss.
double irlsvi_row_objective(const QuadraticRowTerms& quad, const Eigen::VectorXd& il_weights, double beta,
                            const Eigen::VectorXd& prior_row, const RowSolverOptions& options,
                            const Eigen::VectorXd& q_row);

/**
 * Minimizes irlsvi_row_objective over the row by damped Newton, starting from
 * the per-action ridge solution. With beta = 0, no imitation weight or
 * alpha = 1 the ridge solution is returned unchanged. Throws SolverDiverged
 * when the gradient norm is still above the scaled tol after max_iters steps.
 */
Eigen::VectorXd irlsvi_row_solve(const QuadraticRowTerms& quad, const Eigen::VectorXd& il_weights, double beta,
                                 const Eigen::VectorXd& prior_row, const RowSolverOptions& options,
                                 RowSolveInfo* info = nullptr);

} // namespace regret_forge
