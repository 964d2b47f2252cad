#include "regret_forge/cli.hpp"

#include "regret_forge/environments.hpp"
#include "regret_forge/errors.hpp"
#include "regret_forge/expert.hpp"
#include "regret_forge/harness.hpp"
#include "regret_forge/ipsrl.hpp"
#include "regret_forge/parallel.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace regret_forge {

namespace {

double parse_positive_or_inf(const std::string& text, const std::string& what) {
    double value = 0.0;
    try {
        std::size_t used = 0;
        value = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
    } catch (const std::exception&) {
        throw ConfigError(what + ": cannot parse '" + text + "'");
    }
    if (!(value > 0.0)) throw ConfigError(what + " must be positive or inf");
    return value;
}

std::string four_digits(double x) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.4g", x);
    return buffer;
}

void add_env_options(CLI::App* app, EnvSpec& env) {
    app->add_option("--env", env.kind, "deep_sea or random")->check(CLI::IsMember({"deep_sea", "random"}));
    app->add_option("--M,--size", env.size, "Deep Sea size");
    app->add_option("--S,--num_states", env.num_states, "states of the random MDP");
    app->add_option("--A,--num_actions", env.num_actions, "actions of the random MDP");
    app->add_option("--H,--horizon", env.horizon, "horizon of the random MDP");
    app->add_option("--margin", env.margin, "minimum margin of the random MDP");
    app->add_option("--env-seed,--env_seed", env.seed, "seed of the random MDP");
}

/// Options shared by run and sweep. Keys of the config file are the long option names.
struct ExperimentFlags {
    ExperimentConfig config;
    std::vector<std::string> agents;
    std::string lambda;
    std::string beta_mode;
    double c0 = 1.0;
    std::string preset;
    std::string config_file;
};

void add_experiment_options(CLI::App* app, ExperimentFlags& flags) {
    ExperimentConfig& c = flags.config;
    add_env_options(app, c.env);
    app->add_option("--agent,--agents", flags.agents, "urlsvi, pirlsvi, irlsvi")->delimiter(',');
    app->add_option("--T,--episodes", c.episodes, "episodes per run");
    app->add_option("--seeds,--n_seeds", c.n_seeds, "seeds per grid point");
    app->add_option("--kappa,--kappa_grid", c.kappa_grid, "data ratios")->delimiter(',');
    app->add_option("--beta,--beta_grid", c.beta_grid, "expert deliberateness values")->delimiter(',');
    app->add_option("--beta-tilde,--beta_tilde_grid", c.beta_tilde_grid, "assumed beta values for irlsvi")
        ->delimiter(',');
    app->add_option("--lambda", flags.lambda, "expert knowledge (inf for exact)");
    app->add_option("--master-seed,--master_seed", c.master_seed, "master seed");
    app->add_option("--out,--output_dir", c.output_dir, "output directory");
    app->add_option("--threads", c.threads, "worker threads (0: REGRET_FORGE_THREADS or hardware)");
    app->add_option("--sigma0-sq,--sigma0_sq", c.agent.sigma0_sq, "prior variance");
    app->add_option("--sigma-sq,--sigma_sq", c.agent.sigma_sq, "target noise variance");
    app->add_option("--buffer-B,--buffer_B", c.agent.buffer_B, "imitation subset size");
    app->add_option("--alpha", c.agent.alpha, "weight of the value-fitting loss");
    app->add_flag("--full-map,--use_full_map_loss", c.agent.use_full_map_loss, "full MAP loss with beta fit");
    app->add_option("--lambda2", c.agent.lambda2, "beta regularization weight");
    app->add_option("--beta-mode,--beta_mode", flags.beta_mode, "known or entropy")
        ->check(CLI::IsMember({"known", "entropy"}));
    app->add_option("--c0", flags.c0, "constant of the entropy estimator");
    app->add_option("--solver-tol,--solver_tol", c.agent.solver_tol, "Newton gradient tolerance");
    app->add_option("--solver-max-iters,--solver_max_iters", c.agent.solver_max_iters, "Newton iteration cap");
    app->add_option("--preset", flags.preset, "fig1 or fig2")->check(CLI::IsMember({"fig1", "fig2"}));
    app->add_option("--config", flags.config_file, "flat key = value file; flags override it")
        ->check(CLI::ExistingFile);
}

/**
 * Resolves the preset, reapplies command-line values on top of it, then fills
 * the options left unset from the config file.
 */
ExperimentConfig resolve_experiment(CLI::App* app, ExperimentFlags& flags) {
    std::vector<CLI::ConfigItem> items;
    if (!flags.config_file.empty()) items = CLI::ConfigTOML().from_file(flags.config_file);

    std::string preset = flags.preset;
    for (const auto& item : items)
        if (item.name == "preset" && preset.empty() && !item.inputs.empty()) preset = item.inputs.front();

    if (!preset.empty()) {
        if (preset == "fig1")
            flags.config = figure1_preset();
        else if (preset == "fig2")
            flags.config = figure2_preset();
        else
            throw ConfigError("unknown preset '" + preset + "'");
        for (CLI::Option* option : app->get_options())
            if (option->count() > 0) option->run_callback();
    }

    for (const auto& item : items) {
        if (item.name == "preset" || item.name == "config") continue;
        if (!item.parents.empty()) throw ConfigError("config file: sections are not supported ('" + item.fullname() + "')");
        CLI::Option* option = app->get_option_no_throw("--" + item.name);
        if (option == nullptr) throw ConfigError("config file: unknown key '" + item.name + "'");
        if (option->count() > 0) continue;
        option->add_result(item.inputs);
        option->run_callback();
    }

    ExperimentConfig config = flags.config;
    if (!flags.agents.empty()) {
        config.agents.clear();
        for (const auto& name : flags.agents) config.agents.push_back(parse_agent_kind(name));
    }
    if (!flags.lambda.empty()) config.lambda = parse_positive_or_inf(flags.lambda, "lambda");
    if (flags.beta_mode == "entropy")
        config.agent.beta_mode = BetaMode::entropy(flags.c0);
    else if (flags.beta_mode == "known")
        config.agent.beta_mode = BetaMode::known();
    config.validate();
    return config;
}

int run_experiment_command(const ExperimentConfig& config, std::ostream& out, std::ostream& err) {
    const ExperimentResult result = run_experiment(config);
    write_summary_csv(out, result.summary);
    int failures = 0;
    for (const auto& run : result.runs)
        if (!run.ok) {
            ++failures;
            err << "run failed: " << to_string(run.key.agent) << " beta=" << run.key.beta
                << " kappa=" << run.key.kappa << " seed=" << run.key.seed_index << ": " << run.error << '\n';
        }
    if (!config.output_dir.empty()) err << "wrote " << config.output_dir << "/summary.csv and curves/\n";
    if (failures > 0 && static_cast<std::size_t>(failures) == result.runs.size()) return kExitRuntime;
    return kExitOk;
}

struct GenOfflineFlags {
    EnvSpec env;
    double beta = 0.0;
    std::string lambda = "inf";
    double lambda2 = 1.0;
    std::optional<double> kappa;
    std::optional<int> episodes;
    std::uint64_t seed = 0;
    std::string out;
    bool write_env = false;
};

int gen_offline_command(const GenOfflineFlags& flags, std::ostream& out) {
    const TabularMDP env = make_env(flags.env);
    if (!(flags.beta >= 0.0)) throw ConfigError("beta must be nonnegative");
    int L = 0;
    if (flags.episodes) {
        L = *flags.episodes;
    } else {
        if (!(*flags.kappa >= 0.0)) throw ConfigError("kappa must be nonnegative");
        L = episodes_for_data_ratio(*flags.kappa, env.num_states(), env.num_actions(), env.horizon());
    }
    if (L < 0) throw ConfigError("L must be nonnegative");
    RandomStream rng(flags.seed);
    const Competence competence{flags.beta, parse_positive_or_inf(flags.lambda, "lambda"), flags.lambda2};
    OfflineDataset data = generate_offline(env, competence, L, rng, flags.env.describe());
    if (flags.kappa) data.metadata.kappa = *flags.kappa;
    save_dataset(data, flags.out + ".jsonl", flags.out + ".meta.json");
    out << "wrote " << data.transitions.size() << " transitions (L=" << L << ") to " << flags.out << ".jsonl\n";
    if (flags.write_env) {
        save_mdp(env, flags.out + ".env.json");
        out << "wrote " << flags.out << ".env.json\n";
    }
    return kExitOk;
}

struct BoundFlags {
    int num_states = 0;
    int horizon = 0;
    double p_underbar = 0.0;
    int episodes = 0;
    std::optional<double> margin;
    std::optional<int> num_actions;
};

int bound_command(const BoundFlags& flags, std::ostream& out) {
    if (flags.num_states < 1 || flags.horizon < 1 || flags.episodes < 0)
        throw ConfigError("S and H must be positive and L nonnegative");
    if (!(flags.p_underbar > 0.0 && flags.p_underbar <= 1.0)) throw ConfigError("p must lie in (0, 1]");
    out << "epsilon_L " << four_digits(epsilon_bound(flags.num_states, flags.horizon, flags.episodes, flags.p_underbar))
        << '\n';
    if (flags.margin || flags.num_actions) {
        if (!flags.margin || !flags.num_actions) throw ConfigError("beta_underbar needs both --margin and --A");
        if (!(*flags.margin > 0.0)) throw ConfigError("margin must be positive");
        out << "beta_underbar "
            << four_digits(beta_threshold(*flags.margin, flags.p_underbar, flags.horizon, *flags.num_actions)) << '\n';
    }
    return kExitOk;
}

struct EstimateFlags {
    RandomHypothesisOptions hypotheses;
    std::uint64_t hypothesis_seed = 1;
    std::optional<double> beta;
    double beta_factor = 2.0;
    std::vector<int> episodes{0, 25, 50, 100, 200};
    int trials = 2000;
    std::uint64_t seed = 0;
    std::optional<double> delta;
    unsigned threads = 0;
    std::string out;
};

int estimate_command(const EstimateFlags& flags, std::ostream& out, std::ostream& err) {
    if (flags.trials < 1) throw ConfigError("trials must be at least 1");
    if (flags.hypotheses.count < 1) throw ConfigError("count must be at least 1");
    RandomStream hypothesis_rng(flags.hypothesis_seed);
    const HypothesisSet hs = HypothesisSet::uniform(make_random_hypothesis_set(flags.hypotheses, hypothesis_rng));
    double margin = kInfinite;
    for (const auto& mdp : hs.hypotheses()) margin = std::min(margin, compute_margin(mdp));
    const double p = compute_p_underbar(hs.hypotheses());
    double beta = 0.0;
    if (flags.beta) {
        beta = *flags.beta;
    } else {
        beta = flags.beta_factor * beta_threshold(margin, p, hs.horizon(), hs.num_actions());
    }
    err << "hypotheses=" << hs.size() << " margin=" << margin << " p_underbar=" << p << " beta=" << beta << '\n';

    std::ofstream file;
    std::ostream* sink = &out;
    if (!flags.out.empty()) {
        file.open(flags.out);
        if (!file) throw Error("cannot write " + flags.out);
        sink = &file;
    }
    const unsigned threads = flags.threads ? flags.threads : default_thread_count();
    RandomStream rng(flags.seed);
    write_epsilon_csv_header(*sink);
    for (int L : flags.episodes) {
        if (L < 0) throw ConfigError("L values must be nonnegative");
        RandomStream stream = RandomStream::derive(rng.seed(), {static_cast<std::uint64_t>(L)});
        write_epsilon_csv_row(*sink, estimate_epsilon_mc(hs, beta, L, flags.trials, stream, flags.delta, threads));
    }
    return kExitOk;
}

} // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Informed posterior sampling and bootstrapped RLSVI agents on Deep Sea", "regret_forge"};
    app.require_subcommand(1);

    ExperimentFlags run_flags;
    run_flags.config.n_seeds = 1;
    run_flags.config.output_dir = "regret_forge_run";
    CLI::App* run = app.add_subcommand("run", "one experiment (single or small grid)");
    add_experiment_options(run, run_flags);

    ExperimentFlags sweep_flags;
    sweep_flags.config.output_dir = "regret_forge_sweep";
    CLI::App* sweep = app.add_subcommand("sweep", "grid experiment from a config file or preset");
    add_experiment_options(sweep, sweep_flags);

    GenOfflineFlags gen_flags;
    CLI::App* gen = app.add_subcommand("gen-offline", "write an expert dataset");
    add_env_options(gen, gen_flags.env);
    gen->add_option("--beta", gen_flags.beta, "expert deliberateness")->required();
    gen->add_option("--lambda", gen_flags.lambda, "expert knowledge (inf for exact)");
    gen->add_option("--lambda2", gen_flags.lambda2, "stored with the competence");
    auto* kappa_opt = gen->add_option("--kappa", gen_flags.kappa, "data ratio");
    auto* episodes_opt = gen->add_option("--L", gen_flags.episodes, "episode count");
    kappa_opt->excludes(episodes_opt);
    gen->add_option("--seed", gen_flags.seed, "seed");
    gen->add_option("--out", gen_flags.out, "output prefix (.jsonl and .meta.json)")->required();
    gen->add_flag("--write-env", gen_flags.write_env, "also write the MDP as .env.json");

    BoundFlags bound_flags;
    CLI::App* bound = app.add_subcommand("bound", "print epsilon_L and beta_underbar");
    bound->add_option("--S", bound_flags.num_states, "states")->required();
    bound->add_option("--H", bound_flags.horizon, "horizon")->required();
    bound->add_option("--p", bound_flags.p_underbar, "minimum positive occupancy")->required();
    bound->add_option("--L", bound_flags.episodes, "offline episodes")->required();
    bound->add_option("--margin", bound_flags.margin, "optimality margin");
    bound->add_option("--A", bound_flags.num_actions, "actions");

    EstimateFlags estimate_flags;
    CLI::App* estimate = app.add_subcommand("estimate-eps", "Monte-Carlo policy mismatch on a random hypothesis set");
    RandomHypothesisOptions& h = estimate_flags.hypotheses;
    estimate->add_option("--count", h.count, "number of hypotheses");
    estimate->add_option("--S", h.num_states, "states");
    estimate->add_option("--A", h.num_actions, "actions");
    estimate->add_option("--H", h.horizon, "horizon");
    estimate->add_option("--margin", h.min_margin, "minimum margin per hypothesis");
    estimate->add_option("--min-p", h.min_p_underbar, "minimum p_underbar per hypothesis");
    estimate->add_option("--hyp-seed", estimate_flags.hypothesis_seed, "seed of the hypothesis set");
    auto* beta_opt = estimate->add_option("--beta", estimate_flags.beta, "expert beta");
    auto* factor_opt = estimate->add_option("--beta-factor", estimate_flags.beta_factor, "beta as a multiple of beta_underbar");
    beta_opt->excludes(factor_opt);
    estimate->add_option("--L", estimate_flags.episodes, "offline episode counts")->delimiter(',');
    estimate->add_option("--trials", estimate_flags.trials, "Monte-Carlo trials");
    estimate->add_option("--seed", estimate_flags.seed, "seed");
    estimate->add_option("--delta", estimate_flags.delta, "count threshold fraction (default p_underbar/2)");
    estimate->add_option("--threads", estimate_flags.threads, "worker threads");
    estimate->add_option("--out", estimate_flags.out, "CSV path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        const auto parsed = app.get_subcommands();
        err << (parsed.empty() ? app.help() : parsed.front()->help());
        return kExitConfig;
    }

    try {
        if (run->parsed()) return run_experiment_command(resolve_experiment(run, run_flags), out, err);
        if (sweep->parsed()) {
            if (sweep_flags.config_file.empty() && sweep_flags.preset.empty())
                throw ConfigError("sweep needs --config or --preset");
            return run_experiment_command(resolve_experiment(sweep, sweep_flags), out, err);
        }
        if (gen->parsed()) {
            if (!gen_flags.kappa && !gen_flags.episodes) throw ConfigError("gen-offline needs --kappa or --L");
            return gen_offline_command(gen_flags, out);
        }
        if (bound->parsed()) return bound_command(bound_flags, out);
        if (estimate->parsed()) return estimate_command(estimate_flags, out, err);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const InvalidArgs& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const CLI::ParseError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitConfig;
}

} // namespace regret_forge
