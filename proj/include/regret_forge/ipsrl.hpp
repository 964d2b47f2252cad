#pragma once

#include "regret_forge/expert.hpp"
#include "regret_forge/mdp.hpp"
#include "regret_forge/random.hpp"
#include "regret_forge/regret.hpp"

#include <optional>
#include <ostream>
#include <vector>

namespace regret_forge {

/**
 * Finite hypothesis set over transition models with a prior. All hypotheses
 * share S, A, H, r and nu. Optimal Q tables, canonical optimal policies and
 * optimal values are computed once at construction.
 */
class HypothesisSet {
public:
    HypothesisSet(std::vector<TabularMDP> hypotheses, Vector prior);
    static HypothesisSet uniform(std::vector<TabularMDP> hypotheses);

    int size() const { return static_cast<int>(hypotheses_.size()); }
    const TabularMDP& operator[](int k) const { return hypotheses_[static_cast<std::size_t>(k)]; }
    const std::vector<TabularMDP>& hypotheses() const { return hypotheses_; }
    const Vector& prior() const { return prior_; }

    const QTable& optimal_q(int k) const { return optimal_q_[static_cast<std::size_t>(k)]; }
    const DeterministicPolicy& optimal_policy(int k) const { return optimal_policy_[static_cast<std::size_t>(k)]; }
    double optimal_value(int k) const { return optimal_value_[static_cast<std::size_t>(k)]; }

    int num_states() const { return hypotheses_.front().num_states(); }
    int num_actions() const { return hypotheses_.front().num_actions(); }
    int horizon() const { return hypotheses_.front().horizon(); }

private:
    std::vector<TabularMDP> hypotheses_;
    Vector prior_;
    std::vector<QTable> optimal_q_;
    std::vector<DeterministicPolicy> optimal_policy_;
    std::vector<double> optimal_value_;
};

/// Normalized log-weights over a hypothesis set (log-sum-exp equals zero).
class PosteriorBelief {
public:
    /// Normalizes raw log-weights; throws ImpossibleData when all are -inf.
    explicit PosteriorBelief(Vector log_weights);

    const Vector& log_weights() const { return log_weights_; }
    Vector weights() const { return log_weights_.array().exp().matrix(); }
    int size() const { return static_cast<int>(log_weights_.size()); }

    int sample(RandomStream& rng) const;

private:
    Vector log_weights_;
};

/// Prior times transition and softmax-expert action likelihoods of the offline data.
PosteriorBelief informed_posterior(const HypothesisSet& hs, const OfflineDataset& data, double beta);

/// Bayes update with the transition likelihoods of the agent's own trajectory.
PosteriorBelief online_update(const PosteriorBelief& belief, const HypothesisSet& hs, const Trajectory& traj);

/// Per-episode record of an informed posterior sampling run.
struct IpsrlTrace {
    RegretCurve curve;
    std::vector<int> sampled_hypothesis;
    /// Whether the sampled canonical optimal policy differs from the true one.
    std::vector<bool> policy_mismatch;
};

/// Informed PSRL for T episodes against hypothesis true_index.
IpsrlTrace ipsrl_trace(const HypothesisSet& hs, const OfflineDataset& data, double beta, int true_index,
                       int episodes, RandomStream& rng);

RegretCurve ipsrl_run(const HypothesisSet& hs, const OfflineDataset& data, double beta, int true_index,
                      int episodes, RandomStream& rng);

/**
 * Plug-in optimal-policy estimate from action counts: argmax_a N_h(s,a) where
 * N_h(s) >= delta * L, action 0 elsewhere, lowest-index ties.
 */
DeterministicPolicy construct_pi_hat(const OfflineDataset& data, double delta, int num_states, int num_actions,
                                     int horizon);

/// Deliberateness above which the plug-in estimate is consistent: [log 3 - log p + log(H-1) + log(A-1)] / margin.
double beta_threshold(double margin, double p_underbar, int horizon, int num_actions);

/// min{1, 2SH[exp(-L p^2 / 18) + exp(-L p / 36)]}.
double epsilon_bound(int num_states, int horizon, int num_episodes, double p_underbar);

struct EpsilonReport {
    int L = 0;
    double mc_estimate_pi_tilde = 0.0;
    double mc_estimate_pi_hat = 0.0;
    double bound_eps_L = 1.0;
    int n_trials = 0;
    double se_pi_tilde = 0.0;
    double se_pi_hat = 0.0;
};

/**
 * Monte-Carlo frequency that the first posterior-sampled policy, and the
 * plug-in estimate, differ from the true canonical optimal policy. Each trial
 * draws the truth from the prior and fresh expert data. delta defaults to p/2.
 */
EpsilonReport estimate_epsilon_mc(const HypothesisSet& hs, double beta, int num_episodes, int n_trials,
                                  RandomStream& rng, std::optional<double> delta = std::nullopt,
                                  unsigned threads = 1);

/// Frequency of a mismatched sampled policy at each of the first `episodes` episodes.
std::vector<double> mismatch_by_episode(const HypothesisSet& hs, double beta, int num_episodes, int episodes,
                                        int n_trials, RandomStream& rng, unsigned threads = 1);

void write_epsilon_csv_header(std::ostream& out);
void write_epsilon_csv_row(std::ostream& out, const EpsilonReport& report);

} // namespace regret_forge
