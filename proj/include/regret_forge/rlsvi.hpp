#pragma once

#include "regret_forge/expert.hpp"
#include "regret_forge/mdp.hpp"
#include "regret_forge/random.hpp"
#include "regret_forge/regret.hpp"
#include "regret_forge/row_solvers.hpp"

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace regret_forge {

/// uRLSVI ignores offline data, piRLSVI fits its transitions, iRLSVI also imitates its actions.
enum class AgentKind { uninformed, partially_informed, informed };

std::string to_string(AgentKind kind);
/// Accepts urlsvi/pirlsvi/irlsvi and the long names.
AgentKind parse_agent_kind(const std::string& name);

/// How the informed agent obtains the expert's deliberateness.
struct BetaMode {
    enum class Kind { known, entropy, misspecified };
    Kind kind = Kind::known;
    /// c0 for entropy, the assumed beta for misspecified; unused for known.
    double value = 1.0;

    static BetaMode known() { return {Kind::known, 0.0}; }
    static BetaMode entropy(double c0 = 1.0) { return {Kind::entropy, c0}; }
    static BetaMode misspecified(double beta) { return {Kind::misspecified, beta}; }
};

struct RlsviConfig {
    double sigma0_sq = 1.0;
    double sigma_sq = 0.1;
    int buffer_B = 20;
    AgentKind agent_kind = AgentKind::informed;
    BetaMode beta_mode = BetaMode::known();
    /// Weight of the value-fitting loss; 0.5 weighs both parts equally, 1 disables imitation.
    double alpha = 0.5;
    /// Exp(1) imitation weights on all offline actions plus an alternating beta fit.
    bool use_full_map_loss = false;
    double lambda2 = 1.0;
    double solver_tol = 1e-8;
    int solver_max_iters = 100;

    void validate() const;
    RowSolverOptions row_options() const;
};

/**
 * One resample's randomness: target noise per data entry (offline entries
 * first when used, then online), the imitation subset with its weights, and
 * the prior draw Q^prior for periods 0..H-1.
 */
struct PerturbedBatch {
    std::vector<double> noise;
    std::vector<int> il_indices;
    std::vector<double> il_weights;
    QTable prior;
};

/// Draws a PerturbedBatch; consumes exactly one 64-bit value from rng.
PerturbedBatch draw_perturbations(int offline_size, int online_size, const TabularMDP& shape_of,
                                  const RlsviConfig& config, RandomStream& rng);

struct SampleDiagnostics {
    int newton_rows = 0;
    int max_iterations = 0;
    double max_gradient_norm = 0.0;
    double fitted_beta = 0.0;
};

/**
 * Solves the perturbed backward recursion for a fixed batch. Q_H is zero
 * (the terminal reward is carried by the last transition's reward); for
 * h = H-1..0 each row minimizes the ridge TD loss, plus the imitation loss on
 * the period-h subset for the informed agent.
 */
QTable solve_q_hat(const std::vector<Transition>& online_buffer, const OfflineDataset& offline_data,
                   const RlsviConfig& config, double beta, const PerturbedBatch& batch, int num_states,
                   int num_actions, int horizon, SampleDiagnostics* diagnostics = nullptr);

/// draw_perturbations followed by solve_q_hat (with the alternating beta fit under the full MAP loss).
QTable sample_q_hat(const std::vector<Transition>& online_buffer, const OfflineDataset& offline_data,
                    const RlsviConfig& config, double beta, const TabularMDP& env_shape, RandomStream& rng,
                    SampleDiagnostics* diagnostics = nullptr);

/// Deliberateness the informed agent uses for a given offline dataset.
double resolve_agent_beta(const RlsviConfig& config, const OfflineDataset& offline_data);

struct AgentHooks {
    /// Called with each episode's sampled Q table before acting.
    std::function<void(int, const QTable&)> on_sample;
    /// When set, one JSON line of solver diagnostics per episode.
    std::ostream* solver_log = nullptr;
};

/**
 * Runs T episodes: resample Q-hat, act greedily with uniform tie-breaking,
 * append the observed transitions to the online buffer. Regret is measured
 * against the optimal value of env.
 */
RegretCurve run_agent(const TabularMDP& env, const OfflineDataset& offline_data, const RlsviConfig& config,
                      int episodes, RandomStream& rng, const AgentHooks& hooks = {});

} // namespace regret_forge
