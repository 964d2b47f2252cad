#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "regret_forge/environments.hpp"
#include "regret_forge/errors.hpp"
#include "regret_forge/expert.hpp"
#include "regret_forge/rlsvi.hpp"
#include "regret_forge/row_solvers.hpp"

#include <json.hpp>

#include <cmath>
#include <set>
#include <sstream>

using namespace regret_forge;

namespace {

TabularMDP bandit() {
    std::vector<std::vector<RowMatrix>> P{{RowMatrix::Ones(1, 1), RowMatrix::Ones(1, 1)}};
    std::vector<RowMatrix> r{RowMatrix::Zero(1, 2), RowMatrix::Zero(1, 2)};
    return TabularMDP(1, 2, 1, P, r, Vector::Ones(1));
}

RlsviConfig config_for(AgentKind kind) {
    RlsviConfig config;
    config.agent_kind = kind;
    return config;
}

std::vector<QTable> sampled_tables(const TabularMDP& env, const OfflineDataset& data, const RlsviConfig& config,
                                   int episodes, std::uint64_t seed) {
    std::vector<QTable> tables;
    AgentHooks hooks;
    hooks.on_sample = [&](int, const QTable& q) { tables.push_back(q); };
    RandomStream rng(seed);
    run_agent(env, data, config, episodes, rng, hooks);
    return tables;
}

} // namespace

TEST_CASE("ridge row solve") {
    const std::vector<double> targets{1.0, 0.0};
    CHECK(std::abs(rlsvi_row_solve(targets, 0.0, 1.0) - 1.0 / 3.0) <= 1e-15);
    CHECK(rlsvi_row_solve({}, 0.7, 1.0) == 0.7);

    RandomStream rng(1);
    for (int i = 0; i < 1000; ++i) {
        const int n = rng.index(30);
        std::vector<double> ys;
        for (int k = 0; k < n; ++k) ys.push_back(rng.normal(0.0, 2.0));
        const double prior = rng.normal();
        const double sigma0_sq = 0.1 + 3.0 * rng.uniform();
        // Derivative of 1/2 sum (q - y)^2 + (q - prior)^2 / (2 sigma0^2), summed term by term.
        auto slope = [&](double q) {
            double total = (q - prior) / sigma0_sq;
            for (double y : ys) total += q - y;
            return total;
        };
        const double oracle_q = oracle::bisect_minimizer(slope, -20.0, 20.0);
        CHECK(std::abs(rlsvi_row_solve(ys, prior, sigma0_sq) - oracle_q) <= 1e-8);
    }
}

TEST_CASE("imitation loss") {
    const Eigen::Vector2d q(std::log(3.0), 0.0);
    CHECK(std::abs(il_loss(q, Eigen::Vector2d(1.0, 0.0), 1.0) - std::log(4.0 / 3.0)) <= 1e-15);
    CHECK(std::abs(il_loss(Eigen::Vector3d(0.3, -1.0, 2.0), Eigen::Vector3d(2.0, 1.0, 4.0), 0.0) - 7.0 * std::log(3.0)) <=
          1e-14);

    RandomStream rng(2);
    for (int i = 0; i < 100; ++i) {
        const int A = 2 + rng.index(4);
        Eigen::VectorXd row(A), w(A);
        for (int a = 0; a < A; ++a) {
            row(a) = rng.normal(0.0, 2.0);
            w(a) = rng.index(4);
        }
        const double beta = 0.1 + 5.0 * rng.uniform();
        const Eigen::VectorXd fd =
            oracle::finite_difference_gradient([&](const Eigen::VectorXd& x) { return il_loss(x, w, beta); }, row);
        CHECK((il_loss_gradient(row, w, beta) - fd).cwiseAbs().maxCoeff() <= 1e-6);
        const double shift = rng.normal(0.0, 10.0);
        CHECK(std::abs(il_loss(row.array() + shift, w, beta) - il_loss(row, w, beta)) <= 1e-12);
    }
}

TEST_CASE("alpha-weighted loss") {
    CHECK(combined_loss_alpha(2.0, 4.0, 1.0, 0.5, 0.2) == 2.0 + 0.1);
    CHECK(combined_loss_alpha(2.0, 4.0, 0.0, 0.5, 0.2) == 4.0 + 0.1);
    CHECK(std::abs(combined_loss_alpha(2.0, 4.0, 0.5, 0.5, 0.2) - 3.1) <= 1e-15);
    for (double alpha : {0.0, 0.25, 0.5, 0.75, 1.0})
        CHECK(combined_loss_alpha(2.0, 4.0, alpha, 1.0, 0.5) == 4.0 - 2.0 * alpha + 0.5);
}

TEST_CASE("Newton row solve") {
    RowSolverOptions options;
    SUBCASE("beta=0 reduces to per-action ridge") {
        QuadraticRowTerms quad = QuadraticRowTerms::from_targets({{1.0, 0.0}, {0.5}});
        const Eigen::Vector2d prior(0.1, -0.2);
        const Eigen::VectorXd q = irlsvi_row_solve(quad, Eigen::Vector2d(3.0, 1.0), 0.0, prior, options);
        CHECK(q(0) == rlsvi_row_solve(std::vector<double>{1.0, 0.0}, 0.1, 1.0));
        CHECK(q(1) == rlsvi_row_solve(std::vector<double>{0.5}, -0.2, 1.0));
    }
    SUBCASE("imitation alone raises the observed action") {
        const Eigen::VectorXd q = irlsvi_row_solve(QuadraticRowTerms::zeros(2), Eigen::Vector2d(1.0, 0.0), 100.0,
                                                   Eigen::Vector2d::Zero(), options);
        CHECK(q(0) > q(1));
    }
    SUBCASE("alpha=1 ignores imitation and invalid alpha is rejected") {
        options.alpha = 1.0;
        const Eigen::VectorXd q = irlsvi_row_solve(QuadraticRowTerms::zeros(2), Eigen::Vector2d(5.0, 0.0), 10.0,
                                                   Eigen::Vector2d(0.3, 0.4), options);
        CHECK(q == Eigen::Vector2d(0.3, 0.4));
        options.alpha = 0.0;
        CHECK_THROWS_AS(irlsvi_row_solve(QuadraticRowTerms::zeros(2), Eigen::Vector2d(1.0, 0.0), 1.0,
                                         Eigen::Vector2d::Zero(), options),
                        InvalidArgs);
    }
    SUBCASE("output beats the ridge point and matches grid search") {
        RandomStream rng(3);
        for (int i = 0; i < 20; ++i) {
            QuadraticRowTerms quad = QuadraticRowTerms::zeros(2);
            for (int k = rng.index(6); k > 0; --k) quad.add(rng.index(2), rng.normal(0.0, 0.7));
            const Eigen::Vector2d w(rng.index(4), rng.index(4) + 1);
            const Eigen::Vector2d prior(rng.normal(0.0, 0.5), rng.normal(0.0, 0.5));
            const double beta = 0.5 + 5.0 * rng.uniform();
            const Eigen::VectorXd q = irlsvi_row_solve(quad, w, beta, prior, options);
            const Eigen::VectorXd ridge = irlsvi_row_solve(quad, w, 0.0, prior, options);
            CHECK(irlsvi_row_objective(quad, w, beta, prior, options, q) <=
                  irlsvi_row_objective(quad, w, beta, prior, options, ridge) + 1e-12);
            const Eigen::Vector2d grid = oracle::grid_search_2d([&](const Eigen::Vector2d& x) {
                return irlsvi_row_objective(quad, w, beta, prior, options, x);
            });
            CHECK((q - grid).cwiseAbs().maxCoeff() <= 2e-3);
        }
    }
    SUBCASE("gradient is zero at the output") {
        RandomStream rng(4);
        QuadraticRowTerms quad = QuadraticRowTerms::zeros(3);
        for (int k = 0; k < 2000; ++k) quad.add(rng.index(3), rng.normal(0.5, 1.0));
        const Eigen::Vector3d w(3.0, 12.0, 5.0);
        const Eigen::Vector3d prior(0.1, 0.2, 0.3);
        RowSolveInfo info;
        const Eigen::VectorXd q = irlsvi_row_solve(quad, w, 10.0, prior, options, &info);
        const Eigen::VectorXd fd = oracle::finite_difference_gradient(
            [&](const Eigen::VectorXd& x) { return irlsvi_row_objective(quad, w, 10.0, prior, options, x); }, q, 1e-4);
        CHECK(fd.cwiseAbs().maxCoeff() <= 1e-4);
        CHECK(info.iterations < options.max_iters);
    }
}

TEST_CASE("solve_q_hat closed forms") {
    const TabularMDP env = bandit();
    const RlsviConfig config = config_for(AgentKind::uninformed);
    PerturbedBatch batch;
    batch.noise = {0.0, 0.0};
    batch.prior = QTable(1, 1, 2);
    batch.prior(0, 0, 1) = 0.25;
    const std::vector<Transition> online{{0, 0, 0, 0, 1.0}, {0, 0, 0, 0, 0.0}};
    const QTable q = solve_q_hat(online, OfflineDataset{}, config, 0.0, batch, 1, 2, 1);
    CHECK(std::abs(q(0, 0, 0) - 1.0 / 3.0) <= 1e-15);
    CHECK(q(0, 0, 1) == 0.25);
    CHECK(q(1, 0, 0) == 0.0);
}

TEST_CASE("cells with only quadratic data match the ridge recursion") {
    const TabularMDP env = make_deep_sea({.size = 4});
    RandomStream data_rng(5);
    const OfflineDataset data = generate_offline(env, Competence{2.0}, 10, data_rng);
    const RlsviConfig config = config_for(AgentKind::partially_informed);
    std::vector<Transition> online;
    RandomStream sim(6);
    const StochasticPolicy uniform = uniform_policy(4, env.num_states(), 2);
    for (int e = 0; e < 5; ++e) {
        Trajectory traj = simulate_episode(env, uniform, sim);
        traj.steps.back().reward += traj.terminal_reward;
        online.insert(online.end(), traj.steps.begin(), traj.steps.end());
    }
    RandomStream rng(7);
    const PerturbedBatch batch = draw_perturbations(static_cast<int>(data.transitions.size()),
                                                    static_cast<int>(online.size()), env, config, rng);
    const QTable q = solve_q_hat(online, data, config, 0.0, batch, env.num_states(), 2, 4);

    // Independent recursion: explicit target lists per cell.
    QTable expected(4, env.num_states(), 2);
    for (int h = 3; h >= 0; --h) {
        std::vector<std::vector<std::vector<double>>> targets(env.num_states(), std::vector<std::vector<double>>(2));
        std::size_t i = 0;
        auto add = [&](int th, int s, int a, int next, double r) {
            if (th == h) targets[s][a].push_back(r + batch.noise[i] + expected[h + 1].row(next).maxCoeff());
            ++i;
        };
        for (const auto& t : data.transitions) add(t.h, t.state, t.action, t.next_state, t.reward);
        for (const auto& t : online) add(t.h, t.state, t.action, t.next_state, t.reward);
        for (int s = 0; s < env.num_states(); ++s)
            for (int a = 0; a < 2; ++a) expected(h, s, a) = rlsvi_row_solve(targets[s][a], batch.prior(h, s, a), 1.0);
    }
    for (int h = 0; h < 4; ++h) CHECK((q[h] - expected[h]).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("reduction identities are bitwise") {
    const TabularMDP env = make_deep_sea({.size = 6});
    RandomStream data_rng(8);
    OfflineDataset data = generate_offline(env, Competence{0.0}, 20, data_rng);

    RlsviConfig informed = config_for(AgentKind::informed);
    informed.beta_mode = BetaMode::known();
    const auto irlsvi = sampled_tables(env, data, informed, 20, 9);
    const auto pirlsvi = sampled_tables(env, data, config_for(AgentKind::partially_informed), 20, 9);
    REQUIRE(irlsvi.size() == 20);
    for (std::size_t t = 0; t < 20; ++t) CHECK(irlsvi[t] == pirlsvi[t]);

    const OfflineDataset empty;
    const auto pi_empty = sampled_tables(env, empty, config_for(AgentKind::partially_informed), 20, 10);
    const auto uninformed = sampled_tables(env, empty, config_for(AgentKind::uninformed), 20, 10);
    for (std::size_t t = 0; t < 20; ++t) CHECK(pi_empty[t] == uninformed[t]);
}

TEST_CASE("perturbations") {
    const TabularMDP env = make_deep_sea({.size = 4});
    SUBCASE("noise count and imitation subset") {
        RandomStream rng(11);
        const PerturbedBatch u = draw_perturbations(40, 8, env, config_for(AgentKind::uninformed), rng);
        CHECK(u.noise.size() == 8);
        CHECK(u.il_indices.empty());
        const PerturbedBatch p = draw_perturbations(40, 8, env, config_for(AgentKind::partially_informed), rng);
        CHECK(p.noise.size() == 48);
        CHECK(p.il_indices.empty());
        const PerturbedBatch i = draw_perturbations(40, 8, env, config_for(AgentKind::informed), rng);
        CHECK(i.il_indices.size() == 20);
        CHECK(std::set<int>(i.il_indices.begin(), i.il_indices.end()).size() == 20);
        const PerturbedBatch small = draw_perturbations(7, 0, env, config_for(AgentKind::informed), rng);
        CHECK(std::set<int>(small.il_indices.begin(), small.il_indices.end()) == std::set<int>{0, 1, 2, 3, 4, 5, 6});
    }
    SUBCASE("one draw consumes one value from the stream") {
        RandomStream a(12), b(12);
        draw_perturbations(40, 8, env, config_for(AgentKind::informed), a);
        b.next_u64();
        CHECK(a.next_u64() == b.next_u64());
    }
    SUBCASE("consecutive resamples draw fresh priors") {
        RandomStream rng(13);
        std::vector<double> x, y;
        for (int k = 0; k < 1000; ++k) {
            x.push_back(draw_perturbations(0, 0, env, config_for(AgentKind::uninformed), rng).prior(0, 0, 0));
            y.push_back(draw_perturbations(0, 0, env, config_for(AgentKind::uninformed), rng).prior(0, 0, 0));
        }
        const auto [mx, sx] = oracle::mean_and_stderr(x);
        const auto [my, sy] = oracle::mean_and_stderr(y);
        double cov = 0.0, vx = 0.0, vy = 0.0;
        for (int k = 0; k < 1000; ++k) {
            cov += (x[k] - mx) * (y[k] - my);
            vx += (x[k] - mx) * (x[k] - mx);
            vy += (y[k] - my) * (y[k] - my);
        }
        CHECK(std::abs(cov / std::sqrt(vx * vy)) < 0.1);
        CHECK(vx / 999.0 == doctest::Approx(1.0).epsilon(0.15));
    }
}

TEST_CASE("beta resolution") {
    const TabularMDP env = make_deep_sea({.size = 4});
    RandomStream data_rng(14);
    const OfflineDataset data = generate_offline(env, Competence{3.0}, 20, data_rng);
    RlsviConfig config = config_for(AgentKind::informed);
    CHECK(resolve_agent_beta(config, data) == 3.0);
    config.beta_mode = BetaMode::misspecified(0.5);
    CHECK(resolve_agent_beta(config, data) == 0.5);
    config.beta_mode = BetaMode::entropy(1.0);
    const double estimate = resolve_agent_beta(config, data);
    CHECK(estimate == estimate_beta_entropy(data, 1.0));

    // The estimate is fixed for the whole run: identical to passing it as an assumed beta.
    RlsviConfig fixed = config_for(AgentKind::informed);
    fixed.beta_mode = BetaMode::misspecified(estimate);
    const auto a = sampled_tables(env, data, config, 10, 15);
    const auto b = sampled_tables(env, data, fixed, 10, 15);
    for (std::size_t t = 0; t < a.size(); ++t) CHECK(a[t] == b[t]);
}

TEST_CASE("run_agent") {
    const TabularMDP env = make_deep_sea({.size = 5});
    RandomStream data_rng(16);
    const OfflineDataset data = generate_offline(env, Competence{5.0}, 30, data_rng);

    SUBCASE("regret curve bookkeeping and determinism") {
        for (AgentKind kind : {AgentKind::uninformed, AgentKind::partially_informed, AgentKind::informed}) {
            RandomStream a(17), b(17);
            const RegretCurve curve = run_agent(env, data, config_for(kind), 25, a);
            CHECK(curve.agent == to_string(kind));
            REQUIRE(curve.episodes() == 25);
            double sum = 0.0;
            for (std::size_t t = 0; t < 25; ++t) {
                sum += curve.per_episode[t];
                CHECK(std::abs(curve.cumulative[t] - sum) <= 1e-9);
                CHECK(curve.per_episode[t] >= -1.1);
            }
            CHECK(run_agent(env, data, config_for(kind), 25, b).per_episode == curve.per_episode);
        }
    }
    SUBCASE("solver log has one JSON line per episode") {
        std::ostringstream log;
        AgentHooks hooks;
        hooks.solver_log = &log;
        RandomStream rng(18);
        run_agent(env, data, config_for(AgentKind::informed), 6, rng, hooks);
        std::istringstream lines(log.str());
        std::string line;
        int count = 0;
        while (std::getline(lines, line)) {
            const auto j = nlohmann::json::parse(line);
            CHECK(j.at("episode").get<int>() == count);
            CHECK(j.at("newton_rows").get<int>() > 0);
            ++count;
        }
        CHECK(count == 6);
    }
    SUBCASE("full MAP loss runs and fits a beta") {
        RlsviConfig config = config_for(AgentKind::informed);
        config.use_full_map_loss = true;
        std::ostringstream log;
        AgentHooks hooks;
        hooks.solver_log = &log;
        RandomStream rng(19);
        const RegretCurve curve = run_agent(env, data, config, 5, rng, hooks);
        CHECK(curve.episodes() == 5);
        const auto first = nlohmann::json::parse(log.str().substr(0, log.str().find('\n')));
        const double fitted = first.at("beta").get<double>();
        CHECK(fitted >= 0.0);
        CHECK(fitted <= 100.0);
    }
    SUBCASE("shape mismatch is rejected") {
        RandomStream rng(20);
        CHECK_THROWS_AS(run_agent(make_deep_sea({.size = 4}), data, config_for(AgentKind::informed), 1, rng),
                        InvalidArgs);
    }
}

TEST_CASE("agent configuration") {
    CHECK(parse_agent_kind("urlsvi") == AgentKind::uninformed);
    CHECK(parse_agent_kind("pirlsvi") == AgentKind::partially_informed);
    CHECK(parse_agent_kind("irlsvi") == AgentKind::informed);
    CHECK_THROWS_AS(parse_agent_kind("dqn"), ConfigError);
    RlsviConfig config;
    config.alpha = 0.0;
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config.alpha = 0.5;
    config.sigma_sq = -1.0;
    CHECK_THROWS_AS(config.validate(), ConfigError);
}
