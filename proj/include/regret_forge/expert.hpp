#pragma once

#include "regret_forge/mdp.hpp"
#include "regret_forge/random.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace regret_forge {

inline constexpr double kInfinite = std::numeric_limits<double>::infinity();

/// Upper clamp for the entropy-based deliberateness estimate.
inline constexpr double kBetaMax = 1e4;

/**
 * Expert competence: deliberateness beta (softmax inverse temperature) and
 * knowledgeability lambda (precision of the expert's Q estimate). lambda2 is
 * the rate of the exponential prior over beta used by the full MAP loss.
 */
struct Competence {
    double beta = 0.0;
    double lambda = kInfinite;
    double lambda2 = 1.0;
};

struct OfflineTransition {
    int episode = 0;
    int h = 0;
    int state = 0;
    int action = 0;
    int next_state = 0;
    /// r_h(s, a); the last step of an episode also carries the terminal reward r_H(s_H).
    double reward = 0.0;

    friend bool operator==(const OfflineTransition&, const OfflineTransition&) = default;
};

struct DatasetMetadata {
    std::string env;
    double beta = 0.0;
    double lambda = kInfinite;
    double kappa = 0.0;
    std::uint64_t seed = 0;

    friend bool operator==(const DatasetMetadata&, const DatasetMetadata&) = default;
};

/// Expert demonstrations: L complete episodes of H transitions each.
struct OfflineDataset {
    int num_states = 0;
    int num_actions = 0;
    int horizon = 0;
    int num_episodes = 0;
    std::vector<OfflineTransition> transitions;
    DatasetMetadata metadata;

    bool empty() const { return transitions.empty(); }

    /// N_h(s, a) as one S x A integer matrix per period h < H.
    std::vector<Eigen::MatrixXi> state_action_counts() const;

    friend bool operator==(const OfflineDataset&, const OfflineDataset&) = default;
};

/// Episode count for a data ratio: round(kappa * A * S / H).
int episodes_for_data_ratio(double kappa, int num_states, int num_actions, int horizon);

/// Row-wise Boltzmann policy over Q_h(s, .) for h < H.
StochasticPolicy softmax_policy(const QTable& q, double beta);

/// Q + N(0, 1/lambda^2) noise per entry; the input unchanged when lambda is infinite.
QTable perturb_q(const QTable& q, double lambda, RandomStream& rng);

/**
 * Draws one noisy expert Q once, then rolls out L episodes of its softmax
 * policy. metadata.kappa is the realized ratio L*H/(S*A) unless overwritten.
 */
OfflineDataset generate_offline(const TabularMDP& mdp, const Competence& competence, int num_episodes,
                                RandomStream& rng, const std::string& env_description = "");

/// min(c0 / H(mu_A), kBetaMax) with H the natural-log entropy of the empirical action marginal.
double estimate_beta_entropy(const OfflineDataset& data, double c0 = 1.0);

/// Entropy-based estimate from raw action counts.
double estimate_beta_from_counts(const std::vector<long>& action_counts, double c0 = 1.0);

// JSON-lines persistence: one {"l","h","s","a","sn","r"} object per line plus a
// sidecar {"beta","lambda","kappa","seed","env","S","A","H","L"}; an infinite
// lambda is written as null.
void save_dataset(const OfflineDataset& data, const std::string& jsonl_path, const std::string& metadata_path);
OfflineDataset load_dataset(const std::string& jsonl_path, const std::string& metadata_path);

} // namespace regret_forge
