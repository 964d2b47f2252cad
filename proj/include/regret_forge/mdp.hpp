#pragma once

#include "regret_forge/random.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace regret_forge {

/// Row-major dense matrix; rows are states, so a row is a contiguous distribution or Q row.
template <typename Scalar>
using RowMatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using RowMatrix = RowMatrixX<double>;
using Vector = Eigen::VectorXd;

/// Occupancy below this is treated as unreachable floating-point dust.
inline constexpr double kReachableCutoff = 1e-15;

/// Tolerance for probability rows summing to one.
inline constexpr double kProbabilityTolerance = 1e-12;

/**
 * Period-indexed state-action table with H+1 slices of shape S x A.
 *
 * Slice H holds the terminal reward r_H(s) replicated over actions; the
 * implicit slice H+1 is zero.
 */
template <typename Scalar>
class BasicQTable {
public:
    using Block = RowMatrixX<Scalar>;

    BasicQTable() = default;
    BasicQTable(int horizon, int num_states, int num_actions)
        : periods_(static_cast<std::size_t>(horizon) + 1, Block::Zero(num_states, num_actions)) {}

    int horizon() const { return static_cast<int>(periods_.size()) - 1; }
    int num_states() const { return periods_.empty() ? 0 : static_cast<int>(periods_.front().rows()); }
    int num_actions() const { return periods_.empty() ? 0 : static_cast<int>(periods_.front().cols()); }

    Block& operator[](int h) { return periods_[static_cast<std::size_t>(h)]; }
    const Block& operator[](int h) const { return periods_[static_cast<std::size_t>(h)]; }

    Scalar& operator()(int h, int s, int a) { return (*this)[h](s, a); }
    Scalar operator()(int h, int s, int a) const { return (*this)[h](s, a); }

    /// max_a Q_h(s, a) for every s.
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> state_values(int h) const {
        return (*this)[h].rowwise().maxCoeff();
    }

    bool all_finite() const {
        for (const auto& block : periods_)
            if (!block.allFinite()) return false;
        return true;
    }

    /// Exact elementwise equality.
    friend bool operator==(const BasicQTable& lhs, const BasicQTable& rhs) {
        if (lhs.periods_.size() != rhs.periods_.size()) return false;
        for (std::size_t h = 0; h < lhs.periods_.size(); ++h) {
            if (lhs.periods_[h].rows() != rhs.periods_[h].rows() ||
                lhs.periods_[h].cols() != rhs.periods_[h].cols())
                return false;
            if ((lhs.periods_[h].array() != rhs.periods_[h].array()).any()) return false;
        }
        return true;
    }

private:
    std::vector<Block> periods_;
};

using QTable = BasicQTable<double>;

/// Action index per (h, s); rows are periods 0..H-1.
struct DeterministicPolicy {
    Eigen::MatrixXi actions;

    int horizon() const { return static_cast<int>(actions.rows()); }
    int num_states() const { return static_cast<int>(actions.cols()); }
    int operator()(int h, int s) const { return actions(h, s); }

    friend bool operator==(const DeterministicPolicy& lhs, const DeterministicPolicy& rhs) {
        return lhs.actions.rows() == rhs.actions.rows() && lhs.actions.cols() == rhs.actions.cols() &&
               (lhs.actions.array() == rhs.actions.array()).all();
    }
};

/// Action distribution per (h, s); one S x A slice per period 0..H-1.
struct StochasticPolicy {
    std::vector<RowMatrix> probs;

    int horizon() const { return static_cast<int>(probs.size()); }
    const RowMatrix& operator[](int h) const { return probs[static_cast<std::size_t>(h)]; }
};

StochasticPolicy to_stochastic(const DeterministicPolicy& policy, int num_actions);
StochasticPolicy uniform_policy(int horizon, int num_states, int num_actions);

struct Transition {
    int h = 0;
    int state = 0;
    int action = 0;
    int next_state = 0;
    double reward = 0.0;

    friend bool operator==(const Transition&, const Transition&) = default;
};

/// One episode: H steps plus the terminal reward collected at period H.
struct Trajectory {
    std::vector<Transition> steps;
    double terminal_reward = 0.0;

    double total_return() const;
    int final_state() const { return steps.empty() ? -1 : steps.back().next_state; }

    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/**
 * Finite-horizon tabular MDP (S, A, H, P, r, nu).
 *
 * transition(h, a) is an S x S row-stochastic matrix with rows indexed by the
 * current state. reward(h) is S x A for h in 0..H; the period-H slice must be
 * constant across actions. All invariants are checked once at construction and
 * the object is immutable afterwards.
 */
class TabularMDP {
public:
    TabularMDP(int num_states, int num_actions, int horizon,
               std::vector<std::vector<RowMatrix>> transitions,
               std::vector<RowMatrix> rewards,
               Vector initial_distribution);

    int num_states() const { return num_states_; }
    int num_actions() const { return num_actions_; }
    int horizon() const { return horizon_; }

    const RowMatrix& transition(int h, int a) const {
        return transitions_[static_cast<std::size_t>(h)][static_cast<std::size_t>(a)];
    }
    double transition(int h, int s, int a, int next) const { return transition(h, a)(s, next); }
    std::span<const double> transition_row(int h, int s, int a) const {
        return {transition(h, a).row(s).data(), static_cast<std::size_t>(num_states_)};
    }

    const RowMatrix& reward(int h) const { return rewards_[static_cast<std::size_t>(h)]; }
    double reward(int h, int s, int a) const { return reward(h)(s, a); }
    double terminal_reward(int s) const { return rewards_.back()(s, 0); }

    const Vector& initial_distribution() const { return initial_; }

    const std::vector<std::vector<RowMatrix>>& transitions() const { return transitions_; }
    const std::vector<RowMatrix>& rewards() const { return rewards_; }

private:
    int num_states_;
    int num_actions_;
    int horizon_;
    std::vector<std::vector<RowMatrix>> transitions_;
    std::vector<RowMatrix> rewards_;
    Vector initial_;
};

/// Optimal Q by backward recursion, Q_h = r_h + P_h max_b Q_{h+1}; Q_H = r_H.
QTable backward_induction(const TabularMDP& mdp);

/// max |Q_h(s,a) - r_h(s,a) - sum_s' P_h(s'|s,a) max_b Q_{h+1}(s',b)| over all entries.
double bellman_residual(const TabularMDP& mdp, const QTable& q);

/**
 * Canonical greedy policy, built forward in h: argmax with lowest-index
 * tiebreak at states reachable under the partial policy, action 0 elsewhere.
 */
DeterministicPolicy greedy_policy(const QTable& q, const TabularMDP& mdp);

/// Exact expected return including the terminal reward, by forward propagation.
double policy_value(const TabularMDP& mdp, const StochasticPolicy& policy);
double policy_value(const TabularMDP& mdp, const DeterministicPolicy& policy);

/// sum_s nu(s) V_0(s) for the optimal values in q.
double optimal_value(const TabularMDP& mdp, const QTable& q);

Trajectory simulate_episode(const TabularMDP& mdp, const StochasticPolicy& policy, RandomStream& rng);
Trajectory simulate_episode(const TabularMDP& mdp, const DeterministicPolicy& policy, RandomStream& rng);

/// Occupancy p_h(s) for h in 0..H (H+1 rows, S columns).
RowMatrix state_visitation(const TabularMDP& mdp, const DeterministicPolicy& policy);

/// Smallest best-minus-second-best gap over reachable (h < H, s) under the canonical optimal policy.
double compute_margin(const TabularMDP& mdp);

/// Smallest positive occupancy p_h(s) over hypotheses, h < H, under each canonical optimal policy.
double compute_p_underbar(std::span<const TabularMDP> hypotheses);

// JSON interchange: {"S","A","H","nu","r","P"}; r is (H+1) x S x A, P is H x S x A x S.
std::string to_json(const TabularMDP& mdp);
TabularMDP mdp_from_json(const std::string& text);
void save_mdp(const TabularMDP& mdp, const std::string& path);
TabularMDP load_mdp(const std::string& path);

} // namespace regret_forge
