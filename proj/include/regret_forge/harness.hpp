#pragma once

#include "regret_forge/expert.hpp"
#include "regret_forge/mdp.hpp"
#include "regret_forge/regret.hpp"
#include "regret_forge/rlsvi.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace regret_forge {

/// Environment selector: Deep Sea of a given size, or a seeded margin-certified random MDP.
struct EnvSpec {
    std::string kind = "deep_sea";
    int size = 10;
    int num_states = 2;
    int num_actions = 2;
    int horizon = 2;
    double margin = 0.1;
    std::uint64_t seed = 0;

    std::string describe() const;
};

TabularMDP make_env(const EnvSpec& spec);

struct ExperimentConfig {
    EnvSpec env;
    std::vector<AgentKind> agents{AgentKind::informed, AgentKind::partially_informed, AgentKind::uninformed};
    int episodes = 300;
    int n_seeds = 50;
    std::vector<double> kappa_grid{5.0};
    std::vector<double> beta_grid{10.0};
    /// Assumed deliberateness values for the informed agent; empty means beta_mode decides.
    std::vector<double> beta_tilde_grid;
    double lambda = kInfinite;
    /// Agent hyperparameters; agent_kind is set per run, beta_mode is replaced by each beta_tilde.
    RlsviConfig agent;
    std::uint64_t master_seed = 0;
    std::string output_dir;
    /// 0 selects default_thread_count().
    unsigned threads = 0;

    void validate() const;
    std::string snapshot() const;
};

/// Regret-versus-beta sweep: Deep Sea M=10, kappa {1,5}, beta {0.1,1,5,10,50}, all three agents.
ExperimentConfig figure1_preset();
/// Misspecification sweep: M=10, true beta 5, kappa {1,5}, beta_tilde grid.
ExperimentConfig figure2_preset();

/// Labels of one run inside an experiment.
struct RunKey {
    AgentKind agent = AgentKind::uninformed;
    double beta = 0.0;
    double kappa = 0.0;
    /// Set when the informed agent ran with an assumed beta.
    std::optional<double> beta_tilde;
    int seed_index = 0;
};

struct RunRecord {
    RunKey key;
    RegretCurve curve;
    bool ok = true;
    std::string error;
};

struct SummaryRow {
    AgentKind agent = AgentKind::uninformed;
    double beta = 0.0;
    double kappa = 0.0;
    std::optional<double> beta_tilde;
    double mean_cumulative = 0.0;
    double stderr_cumulative = 0.0;
    int n_seeds = 0;
    /// Set when only one seed contributed, so the standard error is reported as zero.
    bool single_seed = false;
    /// Set when some seeds failed.
    bool incomplete = false;
};

struct SummaryTable {
    std::vector<SummaryRow> rows;

    /// First row matching the labels; throws when absent.
    const SummaryRow& find(AgentKind agent, double beta, double kappa,
                           std::optional<double> beta_tilde = std::nullopt) const;
};

struct ExperimentResult {
    SummaryTable summary;
    std::vector<RunRecord> runs;
};

/// Mean and standard error (sample std / sqrt(n)) of final cumulative regrets.
SummaryTable summarize(const std::vector<RunRecord>& runs);

/**
 * Runs every (kappa, beta) grid point and seed. Each (grid point, seed) task
 * derives its stream from (master_seed, grid index, seed index), generates one
 * offline dataset, and runs every agent on it from the same agent stream.
 * Writes summary.csv, curves/seed_<n>.csv and config.txt when output_dir is set.
 */
ExperimentResult run_experiment(const ExperimentConfig& config);

void write_summary_csv(std::ostream& out, const SummaryTable& table);
void write_curves_csv_header(std::ostream& out);
void write_curve_rows(std::ostream& out, const RunRecord& record);
void write_experiment_outputs(const ExperimentConfig& config, const ExperimentResult& result);

} // namespace regret_forge
