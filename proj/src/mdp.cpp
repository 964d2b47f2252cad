#include "regret_forge/mdp.hpp"

#include "regret_forge/errors.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace regret_forge {

namespace {

std::string where(int h, int s, int a) {
    std::ostringstream out;
    out << "(h=" << h << ", s=" << s << ", a=" << a << ")";
    return out.str();
}

void check_distribution(const double* values, int n, const std::string& what) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        if (!(values[i] >= 0.0) || !std::isfinite(values[i]))
            throw InvalidModel(what + ": negative or non-finite probability");
        total += values[i];
    }
    if (std::abs(total - 1.0) > kProbabilityTolerance)
        throw InvalidModel(what + ": probabilities sum to " + std::to_string(total));
}

// Lowest index among the maximal entries of a row.
int argmax_lowest(const auto& row) {
    int best = 0;
    for (int a = 1; a < row.size(); ++a)
        if (row(a) > row(best)) best = a;
    return best;
}

// Distribution at h+1 from the distribution at h under a deterministic policy.
Eigen::RowVectorXd propagate(const TabularMDP& mdp, int h, const Eigen::RowVectorXd& dist,
                             const DeterministicPolicy& policy) {
    Eigen::RowVectorXd next = Eigen::RowVectorXd::Zero(mdp.num_states());
    for (int s = 0; s < mdp.num_states(); ++s) {
        if (dist(s) == 0.0) continue;
        next += dist(s) * mdp.transition(h, policy(h, s)).row(s);
    }
    return next;
}

} // namespace

StochasticPolicy to_stochastic(const DeterministicPolicy& policy, int num_actions) {
    StochasticPolicy out;
    out.probs.reserve(static_cast<std::size_t>(policy.horizon()));
    for (int h = 0; h < policy.horizon(); ++h) {
        RowMatrix probs = RowMatrix::Zero(policy.num_states(), num_actions);
        for (int s = 0; s < policy.num_states(); ++s) probs(s, policy(h, s)) = 1.0;
        out.probs.push_back(std::move(probs));
    }
    return out;
}

StochasticPolicy uniform_policy(int horizon, int num_states, int num_actions) {
    StochasticPolicy out;
    out.probs.assign(static_cast<std::size_t>(horizon),
                     RowMatrix::Constant(num_states, num_actions, 1.0 / num_actions));
    return out;
}

double Trajectory::total_return() const {
    double total = terminal_reward;
    for (const auto& step : steps) total += step.reward;
    return total;
}

TabularMDP::TabularMDP(int num_states, int num_actions, int horizon,
                       std::vector<std::vector<RowMatrix>> transitions,
                       std::vector<RowMatrix> rewards, Vector initial_distribution)
    : num_states_(num_states), num_actions_(num_actions), horizon_(horizon),
      transitions_(std::move(transitions)), rewards_(std::move(rewards)),
      initial_(std::move(initial_distribution)) {
    if (num_states_ < 1 || num_actions_ < 1 || horizon_ < 1)
        throw InvalidModel("TabularMDP: S, A and H must be positive");
    if (transitions_.size() != static_cast<std::size_t>(horizon_))
        throw InvalidModel("TabularMDP: expected H transition periods");
    if (rewards_.size() != static_cast<std::size_t>(horizon_) + 1)
        throw InvalidModel("TabularMDP: expected H+1 reward periods");
    if (initial_.size() != num_states_) throw InvalidModel("TabularMDP: initial distribution has wrong size");
    check_distribution(initial_.data(), num_states_, "initial distribution");

    for (int h = 0; h < horizon_; ++h) {
        const auto& period = transitions_[static_cast<std::size_t>(h)];
        if (period.size() != static_cast<std::size_t>(num_actions_))
            throw InvalidModel("TabularMDP: expected A transition matrices at h=" + std::to_string(h));
        for (int a = 0; a < num_actions_; ++a) {
            const RowMatrix& p = period[static_cast<std::size_t>(a)];
            if (p.rows() != num_states_ || p.cols() != num_states_)
                throw InvalidModel("TabularMDP: transition matrix must be S x S at " + where(h, 0, a));
            for (int s = 0; s < num_states_; ++s)
                check_distribution(p.row(s).data(), num_states_, "transition row " + where(h, s, a));
        }
    }
    for (int h = 0; h <= horizon_; ++h) {
        const RowMatrix& r = rewards_[static_cast<std::size_t>(h)];
        if (r.rows() != num_states_ || r.cols() != num_actions_)
            throw InvalidModel("TabularMDP: reward slice must be S x A at h=" + std::to_string(h));
        if (!r.allFinite()) throw InvalidModel("TabularMDP: non-finite reward at h=" + std::to_string(h));
    }
    const RowMatrix& terminal = rewards_.back();
    for (int s = 0; s < num_states_; ++s)
        for (int a = 1; a < num_actions_; ++a)
            if (terminal(s, a) != terminal(s, 0))
                throw InvalidModel("TabularMDP: terminal reward must not depend on the action, " +
                                   where(horizon_, s, a));
}

QTable backward_induction(const TabularMDP& mdp) {
    const int H = mdp.horizon();
    QTable q(H, mdp.num_states(), mdp.num_actions());
    q[H] = mdp.reward(H);
    for (int h = H - 1; h >= 0; --h) {
        const Vector next_values = q.state_values(h + 1);
        for (int a = 0; a < mdp.num_actions(); ++a)
            q[h].col(a) = mdp.reward(h).col(a) + mdp.transition(h, a) * next_values;
    }
    return q;
}

double bellman_residual(const TabularMDP& mdp, const QTable& q) {
    const int H = mdp.horizon();
    double worst = (q[H] - mdp.reward(H)).cwiseAbs().maxCoeff();
    for (int h = 0; h < H; ++h) {
        const Vector next_values = q.state_values(h + 1);
        for (int a = 0; a < mdp.num_actions(); ++a) {
            const Vector backup = mdp.reward(h).col(a) + mdp.transition(h, a) * next_values;
            worst = std::max(worst, (q[h].col(a) - backup).cwiseAbs().maxCoeff());
        }
    }
    return worst;
}

DeterministicPolicy greedy_policy(const QTable& q, const TabularMDP& mdp) {
    if (q.horizon() != mdp.horizon() || q.num_states() != mdp.num_states() ||
        q.num_actions() != mdp.num_actions())
        throw InvalidArgs("greedy_policy: Q table shape does not match the MDP");
    const int H = mdp.horizon();
    DeterministicPolicy policy{Eigen::MatrixXi::Zero(H, mdp.num_states())};
    Eigen::RowVectorXd dist = mdp.initial_distribution().transpose();
    for (int h = 0; h < H; ++h) {
        for (int s = 0; s < mdp.num_states(); ++s)
            policy.actions(h, s) = dist(s) > kReachableCutoff ? argmax_lowest(q[h].row(s)) : 0;
        dist = propagate(mdp, h, dist, policy);
    }
    return policy;
}

double policy_value(const TabularMDP& mdp, const StochasticPolicy& policy) {
    const int H = mdp.horizon();
    if (policy.horizon() != H) throw InvalidArgs("policy_value: policy horizon does not match the MDP");
    Eigen::RowVectorXd dist = mdp.initial_distribution().transpose();
    double value = 0.0;
    for (int h = 0; h < H; ++h) {
        const RowMatrix& probs = policy[h];
        value += (probs.cwiseProduct(mdp.reward(h)).rowwise().sum()).dot(dist.transpose());
        Eigen::RowVectorXd next = Eigen::RowVectorXd::Zero(mdp.num_states());
        for (int a = 0; a < mdp.num_actions(); ++a)
            next += dist.cwiseProduct(probs.col(a).transpose()) * mdp.transition(h, a);
        dist = std::move(next);
    }
    value += dist.dot(mdp.reward(H).col(0));
    return value;
}

double policy_value(const TabularMDP& mdp, const DeterministicPolicy& policy) {
    return policy_value(mdp, to_stochastic(policy, mdp.num_actions()));
}

double optimal_value(const TabularMDP& mdp, const QTable& q) {
    return mdp.initial_distribution().dot(q.state_values(0));
}

namespace {

template <typename ChooseAction>
Trajectory rollout(const TabularMDP& mdp, RandomStream& rng, ChooseAction&& choose) {
    const Vector& nu = mdp.initial_distribution();
    Trajectory traj;
    traj.steps.reserve(static_cast<std::size_t>(mdp.horizon()));
    int s = rng.categorical({nu.data(), static_cast<std::size_t>(nu.size())});
    for (int h = 0; h < mdp.horizon(); ++h) {
        const int a = choose(h, s);
        const int next = rng.categorical(mdp.transition_row(h, s, a));
        traj.steps.push_back({h, s, a, next, mdp.reward(h, s, a)});
        s = next;
    }
    traj.terminal_reward = mdp.terminal_reward(s);
    return traj;
}

} // namespace

Trajectory simulate_episode(const TabularMDP& mdp, const StochasticPolicy& policy, RandomStream& rng) {
    return rollout(mdp, rng, [&](int h, int s) {
        const RowMatrix& probs = policy[h];
        return rng.categorical({probs.row(s).data(), static_cast<std::size_t>(probs.cols())});
    });
}

Trajectory simulate_episode(const TabularMDP& mdp, const DeterministicPolicy& policy, RandomStream& rng) {
    return rollout(mdp, rng, [&](int h, int s) { return policy(h, s); });
}

RowMatrix state_visitation(const TabularMDP& mdp, const DeterministicPolicy& policy) {
    const int H = mdp.horizon();
    RowMatrix occupancy(H + 1, mdp.num_states());
    Eigen::RowVectorXd dist = mdp.initial_distribution().transpose();
    occupancy.row(0) = dist;
    for (int h = 0; h < H; ++h) {
        dist = propagate(mdp, h, dist, policy);
        occupancy.row(h + 1) = dist;
    }
    return occupancy;
}

double compute_margin(const TabularMDP& mdp) {
    if (mdp.num_actions() == 1) return std::numeric_limits<double>::infinity();
    const QTable q = backward_induction(mdp);
    const RowMatrix occupancy = state_visitation(mdp, greedy_policy(q, mdp));
    double margin = std::numeric_limits<double>::infinity();
    for (int h = 0; h < mdp.horizon(); ++h) {
        for (int s = 0; s < mdp.num_states(); ++s) {
            if (!(occupancy(h, s) > kReachableCutoff)) continue;
            double best = -std::numeric_limits<double>::infinity();
            double second = best;
            for (int a = 0; a < mdp.num_actions(); ++a) {
                const double v = q(h, s, a);
                if (v > best) {
                    second = best;
                    best = v;
                } else if (v > second) {
                    second = v;
                }
            }
            const double gap = best - second;
            if (gap == 0.0)
                throw MarginZero("compute_margin: tied optimal actions at reachable state (h=" +
                                 std::to_string(h) + ", s=" + std::to_string(s) + ")");
            margin = std::min(margin, gap);
        }
    }
    return margin;
}

double compute_p_underbar(std::span<const TabularMDP> hypotheses) {
    if (hypotheses.empty()) throw InvalidArgs("compute_p_underbar: empty hypothesis list");
    double lowest = 1.0;
    for (const TabularMDP& mdp : hypotheses) {
        const RowMatrix occupancy = state_visitation(mdp, greedy_policy(backward_induction(mdp), mdp));
        for (int h = 0; h < mdp.horizon(); ++h)
            for (int s = 0; s < mdp.num_states(); ++s)
                if (occupancy(h, s) > kReachableCutoff) lowest = std::min(lowest, occupancy(h, s));
    }
    return lowest;
}

} // namespace regret_forge
