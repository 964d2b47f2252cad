#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "regret_forge/environments.hpp"
#include "regret_forge/errors.hpp"
#include "regret_forge/harness.hpp"
#include "regret_forge/regret.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace regret_forge;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

ExperimentConfig small_config(const fs::path& out) {
    ExperimentConfig config;
    config.env.size = 4;
    config.episodes = 12;
    config.n_seeds = 3;
    config.kappa_grid = {0.0, 2.0};
    config.beta_grid = {1.0, 10.0};
    config.master_seed = 99;
    config.output_dir = out.string();
    config.threads = 1;
    return config;
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("regret_forge_test_harness_" + name);
    fs::remove_all(dir);
    return dir;
}

} // namespace

TEST_CASE("regret against the optimal value") {
    const TabularMDP env = make_deep_sea({.size = 10});
    const double optimal = optimal_value(env, backward_induction(env));

    const std::vector<double> perfect(5, optimal);
    const RegretCurve zero = compute_regret(env, perfect);
    for (double r : zero.per_episode) CHECK(r == 0.0);

    const std::vector<double> left_only(7, policy_value(env, DeterministicPolicy{Eigen::MatrixXi::Zero(10, 121)}));
    CHECK(left_only.front() == 0.0);
    const RegretCurve left = compute_regret(env, left_only);
    for (double r : left.per_episode) CHECK(r == optimal);

    std::vector<double> returns;
    RandomStream rng(1);
    for (int t = 0; t < 300; ++t) returns.push_back(rng.uniform());
    const RegretCurve curve = compute_regret(optimal, returns);
    double sum = 0.0;
    for (std::size_t t = 0; t < returns.size(); ++t) {
        sum += optimal - returns[t];
        CHECK(std::abs(curve.cumulative[t] - sum) <= 1e-9);
    }
}

TEST_CASE("summary statistics") {
    auto record = [](AgentKind agent, int seed, double final_regret, bool ok = true) {
        RunRecord r;
        r.key = {agent, 1.0, 5.0, std::nullopt, seed};
        r.curve.per_episode = {final_regret};
        r.curve.cumulative = {final_regret};
        r.ok = ok;
        return r;
    };
    const SummaryTable table = summarize({record(AgentKind::uninformed, 0, 1.0), record(AgentKind::uninformed, 1, 2.0),
                                          record(AgentKind::uninformed, 2, 6.0), record(AgentKind::informed, 0, 4.0),
                                          record(AgentKind::informed, 1, 0.0, false)});
    const SummaryRow& u = table.find(AgentKind::uninformed, 1.0, 5.0);
    CHECK(u.mean_cumulative == 3.0);
    CHECK(u.stderr_cumulative == doctest::Approx(std::sqrt(7.0 / 3.0)));
    CHECK(u.n_seeds == 3);
    CHECK_FALSE(u.incomplete);

    const SummaryRow& i = table.find(AgentKind::informed, 1.0, 5.0);
    CHECK(i.n_seeds == 1);
    CHECK(i.stderr_cumulative == 0.0);
    CHECK(i.single_seed);
    CHECK(i.incomplete);
    CHECK_THROWS_AS(table.find(AgentKind::partially_informed, 1.0, 5.0), InvalidArgs);
}

TEST_CASE("configuration checks and presets") {
    ExperimentConfig config;
    config.episodes = 0;
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config = ExperimentConfig{};
    config.beta_grid.clear();
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config = ExperimentConfig{};
    config.env.kind = "grid_world";
    CHECK_THROWS_AS(config.validate(), ConfigError);
    CHECK_THROWS_AS(make_env(config.env), ConfigError);

    const ExperimentConfig fig1 = figure1_preset();
    CHECK(fig1.env.size == 10);
    CHECK(fig1.episodes == 300);
    CHECK(fig1.n_seeds == 50);
    CHECK(fig1.agents.size() == 3);
    CHECK(fig1.kappa_grid == std::vector<double>{1.0, 5.0});
    CHECK(fig1.beta_grid == std::vector<double>{0.1, 1.0, 5.0, 10.0, 50.0});
    const ExperimentConfig fig2 = figure2_preset();
    CHECK(fig2.beta_grid == std::vector<double>{5.0});
    CHECK(!fig2.beta_tilde_grid.empty());

    EnvSpec random;
    random.kind = "random";
    random.num_states = 3;
    random.horizon = 3;
    random.margin = 0.05;
    random.seed = 4;
    CHECK(to_json(make_env(random)) == to_json(make_env(random)));
    CHECK(compute_margin(make_env(random)) >= 0.05);
    CHECK(random.describe() == "env=random,S=3,A=2,H=3,margin=0.050000000000000003,seed=4");
    CHECK(EnvSpec{}.describe() == "env=deep_sea,M=10");
}

TEST_CASE("experiment outputs are deterministic and thread-independent") {
    const fs::path a = scratch("a"), b = scratch("b"), c = scratch("c");
    ExperimentConfig config = small_config(a);
    run_experiment(config);
    config.output_dir = b.string();
    run_experiment(config);
    config.output_dir = c.string();
    config.threads = 8;
    const ExperimentResult result = run_experiment(config);

    const std::string summary = read_file(a / "summary.csv");
    CHECK(summary == read_file(b / "summary.csv"));
    CHECK(summary == read_file(c / "summary.csv"));
    for (int n = 0; n < 3; ++n) {
        const std::string name = "seed_000" + std::to_string(n) + ".csv";
        CHECK(read_file(a / "curves" / name) == read_file(c / "curves" / name));
    }
    CHECK(result.summary.rows.size() == 2 * 2 * 3);
    CHECK(fs::exists(a / "config.txt"));
    fs::remove_all(a);
    fs::remove_all(b);
    fs::remove_all(c);
}

TEST_CASE("summary means agree with the emitted curves") {
    const fs::path dir = scratch("curves");
    const ExperimentResult result = run_experiment(small_config(dir));

    std::map<std::string, std::pair<double, int>> finals;
    for (int n = 0; n < 3; ++n) {
        std::ifstream in(dir / "curves" / ("seed_000" + std::to_string(n) + ".csv"));
        std::string line;
        std::getline(in, line);
        CHECK(line == "agent,beta,kappa,beta_tilde,seed,episode,per_episode_regret,cumulative_regret");
        while (std::getline(in, line)) {
            const auto cells = split(line);
            REQUIRE(cells.size() == 8);
            CHECK(std::stoi(cells[4]) == n);
            if (std::stoi(cells[5]) == 11) {
                auto& entry = finals[cells[0] + "," + cells[1] + "," + cells[2]];
                entry.first += std::stod(cells[7]);
                entry.second += 1;
            }
        }
    }
    std::ifstream in(dir / "summary.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "agent,beta,kappa,beta_tilde,mean_cumreg_T,stderr,n_seeds");
    int rows = 0;
    while (std::getline(in, line)) {
        const auto cells = split(line);
        REQUIRE(cells.size() == 7);
        const auto& entry = finals.at(cells[0] + "," + cells[1] + "," + cells[2]);
        CHECK(entry.second == 3);
        CHECK(std::abs(entry.first / entry.second - std::stod(cells[4])) <= 1e-9);
        ++rows;
    }
    CHECK(rows == static_cast<int>(result.summary.rows.size()));
    fs::remove_all(dir);
}

TEST_CASE("agents within a task share the offline data and agent stream") {
    ExperimentConfig config = small_config("");
    config.kappa_grid = {0.0};
    config.beta_grid = {0.0};
    const ExperimentResult result = run_experiment(config);
    // Without offline data all three agents reduce to the same algorithm.
    std::map<int, std::vector<std::vector<double>>> by_seed;
    for (const auto& run : result.runs) by_seed[run.key.seed_index].push_back(run.curve.per_episode);
    for (const auto& [seed, curves] : by_seed) {
        REQUIRE(curves.size() == 3);
        CHECK(curves[0] == curves[1]);
        CHECK(curves[1] == curves[2]);
    }
}

TEST_CASE("misspecified runs and recorded failures") {
    ExperimentConfig config = small_config("");
    config.kappa_grid = {2.0};
    config.beta_grid = {5.0};
    config.beta_tilde_grid = {0.0, 5.0};
    const ExperimentResult result = run_experiment(config);
    CHECK(result.summary.rows.size() == 4);
    CHECK(result.summary.find(AgentKind::informed, 5.0, 2.0, 0.0).n_seeds == 3);
    // beta_tilde = 0 removes imitation, so it matches the partially informed agent.
    for (const auto& run : result.runs)
        if (run.key.agent == AgentKind::informed && run.key.beta_tilde == 0.0)
            for (const auto& other : result.runs)
                if (other.key.agent == AgentKind::partially_informed && other.key.seed_index == run.key.seed_index)
                    CHECK(other.curve.per_episode == run.curve.per_episode);

    config.beta_tilde_grid.clear();
    config.agent.solver_tol = 1e-300;
    config.agent.solver_max_iters = 1;
    const ExperimentResult failing = run_experiment(config);
    const SummaryRow& informed = failing.summary.find(AgentKind::informed, 5.0, 2.0);
    CHECK(informed.incomplete);
    CHECK(informed.n_seeds == 0);
    CHECK(failing.summary.find(AgentKind::uninformed, 5.0, 2.0).n_seeds == 3);
    for (const auto& run : failing.runs)
        if (run.key.agent == AgentKind::informed) CHECK_FALSE(run.error.empty());
}
