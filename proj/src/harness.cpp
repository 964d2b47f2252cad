#include "regret_forge/harness.hpp"

#include "regret_forge/environments.hpp"
#include "regret_forge/errors.hpp"
#include "regret_forge/parallel.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace regret_forge {

namespace {

std::string format_number(double x) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.17g", x);
    return buffer;
}

std::string format_optional(const std::optional<double>& x) { return x ? format_number(*x) : std::string{}; }

std::string join(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + format_number(values[i]);
    return out;
}

bool same_label(const RunKey& key, const SummaryRow& row) {
    return key.agent == row.agent && key.beta == row.beta && key.kappa == row.kappa && key.beta_tilde == row.beta_tilde;
}

} // namespace

std::string EnvSpec::describe() const {
    std::ostringstream out;
    if (kind == "deep_sea") {
        out << "env=deep_sea,M=" << size;
    } else {
        out << "env=random,S=" << num_states << ",A=" << num_actions << ",H=" << horizon
            << ",margin=" << format_number(margin) << ",seed=" << seed;
    }
    return out.str();
}

TabularMDP make_env(const EnvSpec& spec) {
    if (spec.kind == "deep_sea") {
        DeepSeaSpec deep_sea;
        deep_sea.size = spec.size;
        return make_deep_sea(deep_sea);
    }
    if (spec.kind == "random") {
        RandomStream rng(spec.seed);
        return make_random_margin_mdp(spec.num_states, spec.num_actions, spec.horizon, spec.margin, rng);
    }
    throw ConfigError("unknown environment '" + spec.kind + "' (expected deep_sea or random)");
}

void ExperimentConfig::validate() const {
    if (episodes < 1) throw ConfigError("T must be at least 1");
    if (n_seeds < 1) throw ConfigError("n_seeds must be at least 1");
    if (agents.empty()) throw ConfigError("agent list is empty");
    if (kappa_grid.empty() || beta_grid.empty()) throw ConfigError("kappa and beta grids must be nonempty");
    for (double k : kappa_grid)
        if (!(k >= 0.0)) throw ConfigError("kappa values must be nonnegative");
    for (double b : beta_grid)
        if (!(b >= 0.0)) throw ConfigError("beta values must be nonnegative");
    for (double b : beta_tilde_grid)
        if (!(b >= 0.0)) throw ConfigError("beta_tilde values must be nonnegative");
    if (!(lambda > 0.0)) throw ConfigError("lambda must be positive or inf");
    if (env.kind != "deep_sea" && env.kind != "random") throw ConfigError("unknown environment '" + env.kind + "'");
    agent.validate();
}

std::string ExperimentConfig::snapshot() const {
    std::ostringstream out;
    out << env.describe() << ";agents=";
    for (std::size_t i = 0; i < agents.size(); ++i) out << (i ? "," : "") << to_string(agents[i]);
    out << ";T=" << episodes << ";n_seeds=" << n_seeds << ";kappa=" << join(kappa_grid) << ";beta=" << join(beta_grid)
        << ";beta_tilde=" << join(beta_tilde_grid) << ";lambda=" << format_number(lambda)
        << ";sigma0_sq=" << format_number(agent.sigma0_sq) << ";sigma_sq=" << format_number(agent.sigma_sq)
        << ";buffer_B=" << agent.buffer_B << ";alpha=" << format_number(agent.alpha)
        << ";full_map=" << (agent.use_full_map_loss ? 1 : 0) << ";lambda2=" << format_number(agent.lambda2)
        << ";beta_mode=";
    switch (agent.beta_mode.kind) {
    case BetaMode::Kind::known: out << "known"; break;
    case BetaMode::Kind::entropy: out << "entropy(" << format_number(agent.beta_mode.value) << ")"; break;
    case BetaMode::Kind::misspecified: out << "misspecified(" << format_number(agent.beta_mode.value) << ")"; break;
    }
    out << ";master_seed=" << master_seed;
    return out.str();
}

ExperimentConfig figure1_preset() {
    ExperimentConfig config;
    config.kappa_grid = {1.0, 5.0};
    config.beta_grid = {0.1, 1.0, 5.0, 10.0, 50.0};
    return config;
}

ExperimentConfig figure2_preset() {
    ExperimentConfig config;
    config.kappa_grid = {1.0, 5.0};
    config.beta_grid = {5.0};
    config.beta_tilde_grid = {0.05, 0.5, 2.5, 5.0, 10.0, 50.0};
    return config;
}

const SummaryRow& SummaryTable::find(AgentKind agent, double beta, double kappa,
                                     std::optional<double> beta_tilde) const {
    for (const auto& row : rows)
        if (row.agent == agent && row.beta == beta && row.kappa == kappa && row.beta_tilde == beta_tilde) return row;
    throw InvalidArgs("SummaryTable::find: no row for agent " + to_string(agent));
}

SummaryTable summarize(const std::vector<RunRecord>& runs) {
    SummaryTable table;
    std::vector<std::vector<double>> finals;
    for (const auto& run : runs) {
        std::size_t slot = 0;
        while (slot < table.rows.size() && !same_label(run.key, table.rows[slot])) ++slot;
        if (slot == table.rows.size()) {
            SummaryRow row;
            row.agent = run.key.agent;
            row.beta = run.key.beta;
            row.kappa = run.key.kappa;
            row.beta_tilde = run.key.beta_tilde;
            table.rows.push_back(row);
            finals.emplace_back();
        }
        if (run.ok)
            finals[slot].push_back(run.curve.final_cumulative());
        else
            table.rows[slot].incomplete = true;
    }
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        SummaryRow& row = table.rows[i];
        const auto& values = finals[i];
        row.n_seeds = static_cast<int>(values.size());
        if (values.empty()) continue;
        double mean = 0.0;
        for (double v : values) mean += v;
        mean /= static_cast<double>(values.size());
        row.mean_cumulative = mean;
        if (values.size() == 1) {
            row.single_seed = true;
            row.stderr_cumulative = 0.0;
            continue;
        }
        double ss = 0.0;
        for (double v : values) ss += (v - mean) * (v - mean);
        const double n = static_cast<double>(values.size());
        row.stderr_cumulative = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    }
    return table;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    const TabularMDP env = make_env(config.env);
    const std::string env_description = config.env.describe();
    const std::string snapshot = config.snapshot();

    struct GridPoint {
        double kappa;
        double beta;
    };
    std::vector<GridPoint> grid;
    for (double kappa : config.kappa_grid)
        for (double beta : config.beta_grid) grid.push_back({kappa, beta});

    // Runs per task: each agent once, the informed agent once per beta_tilde.
    std::vector<RunKey> variants;
    for (AgentKind agent : config.agents) {
        if (agent == AgentKind::informed && !config.beta_tilde_grid.empty()) {
            for (double beta_tilde : config.beta_tilde_grid) variants.push_back({agent, 0.0, 0.0, beta_tilde, 0});
        } else {
            variants.push_back({agent, 0.0, 0.0, std::nullopt, 0});
        }
    }

    const std::size_t seeds = static_cast<std::size_t>(config.n_seeds);
    const std::size_t tasks = grid.size() * seeds;
    std::vector<std::vector<RunRecord>> results(tasks);
    const unsigned threads = config.threads ? config.threads : default_thread_count();

    parallel_for(tasks, threads, [&](std::size_t task) {
        const std::size_t g = task / seeds;
        const std::size_t n = task % seeds;
        const GridPoint point = grid[g];
        std::vector<RunRecord>& out = results[task];

        OfflineDataset data;
        std::string data_error;
        try {
            RandomStream data_stream = RandomStream::derive(config.master_seed, {g, n, 0});
            const int L = episodes_for_data_ratio(point.kappa, env.num_states(), env.num_actions(), env.horizon());
            data = generate_offline(env, Competence{point.beta, config.lambda, config.agent.lambda2}, L, data_stream,
                                    env_description);
            data.metadata.kappa = point.kappa;
        } catch (const std::exception& e) {
            data_error = std::string("offline data: ") + e.what();
        }
        const RandomStream agent_stream = RandomStream::derive(config.master_seed, {g, n, 1});

        for (const RunKey& variant : variants) {
            RunRecord record;
            record.key = variant;
            record.key.beta = point.beta;
            record.key.kappa = point.kappa;
            record.key.seed_index = static_cast<int>(n);
            if (!data_error.empty()) {
                record.ok = false;
                record.error = data_error;
                out.push_back(std::move(record));
                continue;
            }
            RlsviConfig agent_config = config.agent;
            agent_config.agent_kind = variant.agent;
            if (variant.beta_tilde) agent_config.beta_mode = BetaMode::misspecified(*variant.beta_tilde);
            try {
                RandomStream rng = agent_stream;
                record.curve = run_agent(env, data, agent_config, config.episodes, rng);
                record.curve.seed = n;
                record.curve.config_snapshot = snapshot;
            } catch (const std::exception& e) {
                record.ok = false;
                record.error = e.what();
            }
            out.push_back(std::move(record));
        }
    });

    ExperimentResult result;
    for (auto& task_runs : results)
        for (auto& run : task_runs) result.runs.push_back(std::move(run));
    result.summary = summarize(result.runs);
    for (const auto& row : result.summary.rows) {
        if (row.single_seed)
            std::cerr << "warning: " << to_string(row.agent) << " beta=" << row.beta << " kappa=" << row.kappa
                      << " has a single seed; standard error reported as 0\n";
        if (row.incomplete)
            std::cerr << "warning: " << to_string(row.agent) << " beta=" << row.beta << " kappa=" << row.kappa
                      << " is incomplete (" << row.n_seeds << " seeds succeeded)\n";
    }
    if (!config.output_dir.empty()) write_experiment_outputs(config, result);
    return result;
}

void write_summary_csv(std::ostream& out, const SummaryTable& table) {
    out << "agent,beta,kappa,beta_tilde,mean_cumreg_T,stderr,n_seeds\n";
    for (const auto& row : table.rows)
        out << to_string(row.agent) << ',' << format_number(row.beta) << ',' << format_number(row.kappa) << ','
            << format_optional(row.beta_tilde) << ',' << format_number(row.mean_cumulative) << ','
            << format_number(row.stderr_cumulative) << ',' << row.n_seeds << '\n';
}

void write_curves_csv_header(std::ostream& out) {
    out << "agent,beta,kappa,beta_tilde,seed,episode,per_episode_regret,cumulative_regret\n";
}

void write_curve_rows(std::ostream& out, const RunRecord& record) {
    if (!record.ok) return;
    const std::string prefix = to_string(record.key.agent) + ',' + format_number(record.key.beta) + ',' +
                               format_number(record.key.kappa) + ',' + format_optional(record.key.beta_tilde) + ',' +
                               std::to_string(record.key.seed_index) + ',';
    for (std::size_t t = 0; t < record.curve.per_episode.size(); ++t)
        out << prefix << t << ',' << format_number(record.curve.per_episode[t]) << ','
            << format_number(record.curve.cumulative[t]) << '\n';
}

void write_experiment_outputs(const ExperimentConfig& config, const ExperimentResult& result) {
    namespace fs = std::filesystem;
    const fs::path root(config.output_dir);
    fs::create_directories(root / "curves");

    std::ofstream summary(root / "summary.csv");
    if (!summary) throw Error("cannot write " + (root / "summary.csv").string());
    write_summary_csv(summary, result.summary);

    std::ofstream snapshot(root / "config.txt");
    snapshot << config.snapshot() << '\n';

    for (int n = 0; n < config.n_seeds; ++n) {
        char name[32];
        std::snprintf(name, sizeof name, "seed_%04d.csv", n);
        std::ofstream curves(root / "curves" / name);
        if (!curves) throw Error("cannot write curve file " + std::string(name));
        write_curves_csv_header(curves);
        for (const auto& run : result.runs)
            if (run.key.seed_index == n) write_curve_rows(curves, run);
    }

    bool any_failure = false;
    for (const auto& run : result.runs) any_failure = any_failure || !run.ok;
    if (any_failure) {
        std::ofstream failures(root / "failures.csv");
        failures << "agent,beta,kappa,beta_tilde,seed,error\n";
        for (const auto& run : result.runs)
            if (!run.ok)
                failures << to_string(run.key.agent) << ',' << format_number(run.key.beta) << ','
                         << format_number(run.key.kappa) << ',' << format_optional(run.key.beta_tilde) << ','
                         << run.key.seed_index << ",\"" << run.error << "\"\n";
    }
}

} // namespace regret_forge
