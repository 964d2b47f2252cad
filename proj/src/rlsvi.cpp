#include "regret_forge/rlsvi.hpp"

#include "regret_forge/errors.hpp"
#include "regret_forge/softmax.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace regret_forge {

std::string to_string(AgentKind kind) {
    switch (kind) {
    case AgentKind::uninformed: return "urlsvi";
    case AgentKind::partially_informed: return "pirlsvi";
    case AgentKind::informed: return "irlsvi";
    }
    return "unknown";
}

AgentKind parse_agent_kind(const std::string& name) {
    std::string lower = name;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "urlsvi" || lower == "uninformed") return AgentKind::uninformed;
    if (lower == "pirlsvi" || lower == "partially_informed") return AgentKind::partially_informed;
    if (lower == "irlsvi" || lower == "informed") return AgentKind::informed;
    throw ConfigError("unknown agent '" + name + "' (expected urlsvi, pirlsvi or irlsvi)");
}

void RlsviConfig::validate() const {
    if (!(sigma0_sq > 0.0)) throw ConfigError("sigma0_sq must be positive");
    if (!(sigma_sq > 0.0)) throw ConfigError("sigma_sq must be positive");
    if (buffer_B < 1) throw ConfigError("buffer_B must be positive");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
    if (!(lambda2 > 0.0)) throw ConfigError("lambda2 must be positive");
    if (!(solver_tol > 0.0) || solver_max_iters < 1) throw ConfigError("solver_tol and solver_max_iters must be positive");
    if (beta_mode.kind == BetaMode::Kind::entropy && !(beta_mode.value > 0.0))
        throw ConfigError("entropy beta mode needs c0 > 0");
    if (beta_mode.kind == BetaMode::Kind::misspecified && !(beta_mode.value >= 0.0))
        throw ConfigError("misspecified beta must be nonnegative");
}

RowSolverOptions RlsviConfig::row_options() const {
    RowSolverOptions options;
    options.sigma0_sq = sigma0_sq;
    options.alpha = alpha;
    options.tol = solver_tol;
    options.max_iters = solver_max_iters;
    return options;
}

namespace {

bool uses_offline_targets(AgentKind kind) { return kind != AgentKind::uninformed; }

} // namespace

PerturbedBatch draw_perturbations(int offline_size, int online_size, const TabularMDP& shape_of,
                                  const RlsviConfig& config, RandomStream& rng) {
    const std::uint64_t seed = rng.next_u64();
    const int S = shape_of.num_states(), A = shape_of.num_actions(), H = shape_of.horizon();
    PerturbedBatch batch;

    RandomStream prior_stream = RandomStream::derive(seed, {0});
    batch.prior = QTable(H, S, A);
    const double prior_sd = std::sqrt(config.sigma0_sq);
    for (int h = 0; h < H; ++h)
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) batch.prior(h, s, a) = prior_sd * prior_stream.normal();

    RandomStream noise_stream = RandomStream::derive(seed, {1});
    const int entries = (uses_offline_targets(config.agent_kind) ? offline_size : 0) + online_size;
    const double noise_sd = std::sqrt(config.sigma_sq);
    batch.noise.resize(static_cast<std::size_t>(entries));
    for (double& z : batch.noise) z = noise_sd * noise_stream.normal();

    if (config.agent_kind == AgentKind::informed && offline_size > 0) {
        RandomStream il_stream = RandomStream::derive(seed, {2});
        if (config.use_full_map_loss) {
            batch.il_indices.resize(static_cast<std::size_t>(offline_size));
            std::iota(batch.il_indices.begin(), batch.il_indices.end(), 0);
            batch.il_weights.resize(batch.il_indices.size());
            for (double& w : batch.il_weights) w = il_stream.exponential();
        } else {
            // Partial Fisher-Yates: the first B slots form a uniform subset without replacement.
            std::vector<int> pool(static_cast<std::size_t>(offline_size));
            std::iota(pool.begin(), pool.end(), 0);
            const int take = std::min(config.buffer_B, offline_size);
            for (int i = 0; i < take; ++i) {
                const int j = i + il_stream.index(offline_size - i);
                std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
            }
            batch.il_indices.assign(pool.begin(), pool.begin() + take);
            batch.il_weights.assign(static_cast<std::size_t>(take), 1.0);
        }
    }
    return batch;
}

QTable solve_q_hat(const std::vector<Transition>& online_buffer, const OfflineDataset& offline_data,
                   const RlsviConfig& config, double beta, const PerturbedBatch& batch, int num_states,
                   int num_actions, int horizon, SampleDiagnostics* diagnostics) {
    const int S = num_states, A = num_actions, H = horizon;
    const bool with_offline = uses_offline_targets(config.agent_kind);
    const std::size_t offline_count = with_offline ? offline_data.transitions.size() : 0;
    if (batch.noise.size() != offline_count + online_buffer.size())
        throw InvalidArgs("solve_q_hat: perturbation batch does not match the data buffer");

    // Data entry i < offline_count is offline transition i, the rest are online.
    std::vector<std::vector<std::size_t>> by_period(static_cast<std::size_t>(H));
    struct Fields { int h, s, a, next; double r; };
    auto fields = [&](std::size_t i) -> Fields {
        if (i < offline_count) {
            const auto& t = offline_data.transitions[i];
            return {t.h, t.state, t.action, t.next_state, t.reward};
        }
        const auto& t = online_buffer[i - offline_count];
        return {t.h, t.state, t.action, t.next_state, t.reward};
    };
    for (std::size_t i = 0; i < batch.noise.size(); ++i) by_period[static_cast<std::size_t>(fields(i).h)].push_back(i);

    std::vector<std::vector<std::size_t>> il_by_period(static_cast<std::size_t>(H));
    for (std::size_t k = 0; k < batch.il_indices.size(); ++k)
        il_by_period[static_cast<std::size_t>(offline_data.transitions[static_cast<std::size_t>(batch.il_indices[k])].h)]
            .push_back(k);

    const RowSolverOptions options = config.row_options();
    const bool imitation = config.agent_kind == AgentKind::informed;
    QTable q(H, S, A);  // slice H stays zero
    for (int h = H - 1; h >= 0; --h) {
        const Vector next_values = q.state_values(h + 1);
        RowMatrix count = RowMatrix::Zero(S, A);
        RowMatrix sum = RowMatrix::Zero(S, A);
        RowMatrix sq_sum = RowMatrix::Zero(S, A);
        for (std::size_t i : by_period[static_cast<std::size_t>(h)]) {
            const Fields f = fields(i);
            const double target = f.r + batch.noise[i] + next_values(f.next);
            count(f.s, f.a) += 1.0;
            sum(f.s, f.a) += target;
            sq_sum(f.s, f.a) += target * target;
        }
        RowMatrix il = RowMatrix::Zero(S, A);
        if (imitation) {
            for (std::size_t k : il_by_period[static_cast<std::size_t>(h)]) {
                const auto& t = offline_data.transitions[static_cast<std::size_t>(batch.il_indices[k])];
                il(t.state, t.action) += batch.il_weights[k];
            }
        }
        for (int s = 0; s < S; ++s) {
            const Vector prior_row = batch.prior[h].row(s).transpose();
            if (imitation && beta > 0.0 && options.alpha < 1.0 && il.row(s).sum() > 0.0) {
                const QuadraticRowTerms terms{count.row(s).transpose(), sum.row(s).transpose(), sq_sum.row(s).transpose()};
                RowSolveInfo info;
                q[h].row(s) = irlsvi_row_solve(terms, il.row(s).transpose(), beta, prior_row, options, &info).transpose();
                if (diagnostics) {
                    diagnostics->newton_rows += 1;
                    diagnostics->max_iterations = std::max(diagnostics->max_iterations, info.iterations);
                    diagnostics->max_gradient_norm = std::max(diagnostics->max_gradient_norm, info.gradient_norm);
                }
            } else {
                for (int a = 0; a < A; ++a)
                    q(h, s, a) = ridge_closed_form(sum(s, a), count(s, a), prior_row(a), options.sigma0_sq);
            }
        }
    }
    if (diagnostics) diagnostics->fitted_beta = beta;
    return q;
}

namespace {

// argmin over beta in [0, 100] of (1 - alpha) * weighted imitation loss + lambda2 * beta, Q held fixed.
double fit_beta(const QTable& q, const OfflineDataset& offline_data, const PerturbedBatch& batch,
                const RlsviConfig& config) {
    auto objective = [&](double beta) {
        double il = 0.0;
        for (std::size_t k = 0; k < batch.il_indices.size(); ++k) {
            const auto& t = offline_data.transitions[static_cast<std::size_t>(batch.il_indices[k])];
            const auto row = q[t.h].row(t.state);
            il += batch.il_weights[k] * (log_sum_exp(row, beta) - beta * row(t.action));
        }
        return (1.0 - config.alpha) * il + config.lambda2 * beta;
    };
    const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = 0.0, hi = 100.0;
    double x1 = hi - ratio * (hi - lo), x2 = lo + ratio * (hi - lo);
    double f1 = objective(x1), f2 = objective(x2);
    while (hi - lo > 1e-6) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = objective(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = objective(x2);
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace

QTable sample_q_hat(const std::vector<Transition>& online_buffer, const OfflineDataset& offline_data,
                    const RlsviConfig& config, double beta, const TabularMDP& env_shape, RandomStream& rng,
                    SampleDiagnostics* diagnostics) {
    const int S = env_shape.num_states(), A = env_shape.num_actions(), H = env_shape.horizon();
    const PerturbedBatch batch = draw_perturbations(static_cast<int>(offline_data.transitions.size()),
                                                    static_cast<int>(online_buffer.size()), env_shape, config, rng);
    if (config.use_full_map_loss && config.agent_kind == AgentKind::informed && !batch.il_indices.empty()) {
        double current = beta;
        for (int round = 0; round < 3; ++round) {
            const QTable q = solve_q_hat(online_buffer, offline_data, config, current, batch, S, A, H);
            current = fit_beta(q, offline_data, batch, config);
        }
        return solve_q_hat(online_buffer, offline_data, config, current, batch, S, A, H, diagnostics);
    }
    return solve_q_hat(online_buffer, offline_data, config, beta, batch, S, A, H, diagnostics);
}

double resolve_agent_beta(const RlsviConfig& config, const OfflineDataset& offline_data) {
    switch (config.beta_mode.kind) {
    case BetaMode::Kind::known: return offline_data.metadata.beta;
    case BetaMode::Kind::entropy: return estimate_beta_entropy(offline_data, config.beta_mode.value);
    case BetaMode::Kind::misspecified: return config.beta_mode.value;
    }
    return 0.0;
}

RegretCurve run_agent(const TabularMDP& env, const OfflineDataset& offline_data, const RlsviConfig& config,
                      int episodes, RandomStream& rng, const AgentHooks& hooks) {
    config.validate();
    if (episodes < 0) throw InvalidArgs("run_agent: episode count must be nonnegative");
    if (!offline_data.empty() &&
        (offline_data.num_states != env.num_states() || offline_data.num_actions != env.num_actions() ||
         offline_data.horizon != env.horizon()))
        throw InvalidArgs("run_agent: offline data shape does not match the environment");

    const double beta = config.agent_kind == AgentKind::informed && !offline_data.empty()
                            ? resolve_agent_beta(config, offline_data)
                            : 0.0;
    const double optimal = optimal_value(env, backward_induction(env));
    const int H = env.horizon();
    const Vector& nu = env.initial_distribution();

    std::vector<Transition> online;
    online.reserve(static_cast<std::size_t>(episodes) * static_cast<std::size_t>(H));
    std::vector<double> returns;
    returns.reserve(static_cast<std::size_t>(episodes));
    std::vector<int> best;
    for (int t = 0; t < episodes; ++t) {
        SampleDiagnostics diagnostics;
        QTable q_hat;
        try {
            q_hat = sample_q_hat(online, offline_data, config, beta, env, rng, &diagnostics);
        } catch (const SolverDiverged& e) {
            throw SolverDiverged("episode " + std::to_string(t) + ": " + e.what());
        }
        if (hooks.on_sample) hooks.on_sample(t, q_hat);
        if (hooks.solver_log) {
            nlohmann::json line = {{"episode", t},
                                   {"newton_rows", diagnostics.newton_rows},
                                   {"max_iterations", diagnostics.max_iterations},
                                   {"max_gradient_norm", diagnostics.max_gradient_norm},
                                   {"beta", diagnostics.fitted_beta}};
            *hooks.solver_log << line.dump() << '\n';
        }

        int s = rng.categorical({nu.data(), static_cast<std::size_t>(nu.size())});
        double realized = 0.0;
        for (int h = 0; h < H; ++h) {
            const auto row = q_hat[h].row(s);
            const double top = row.maxCoeff();
            best.clear();
            for (int a = 0; a < env.num_actions(); ++a)
                if (row(a) == top) best.push_back(a);
            const int a = best.size() == 1 ? best.front() : best[static_cast<std::size_t>(rng.index(static_cast<int>(best.size())))];
            const int next = rng.categorical(env.transition_row(h, s, a));
            double reward = env.reward(h, s, a);
            if (h == H - 1) reward += env.terminal_reward(next);
            online.push_back({h, s, a, next, reward});
            realized += reward;
            s = next;
        }
        returns.push_back(realized);
    }
    RegretCurve curve = compute_regret(optimal, returns);
    curve.seed = rng.seed();
    curve.agent = to_string(config.agent_kind);
    return curve;
}

} // namespace regret_forge
