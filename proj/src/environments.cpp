#include "regret_forge/environments.hpp"

#include "regret_forge/errors.hpp"

#include <algorithm>
#include <set>
#include <vector>

namespace regret_forge {

TabularMDP make_deep_sea(const DeepSeaSpec& spec) {
    const int M = spec.size;
    if (M < 2) throw InvalidArgs("make_deep_sea: size must be at least 2");
    const double slip = spec.resolved_slip();
    if (!(slip >= 0.0 && slip < 1.0)) throw InvalidArgs("make_deep_sea: slip must lie in [0, 1)");
    const double cost = spec.resolved_move_cost();
    const int S = (M + 1) * (M + 1);
    const int H = M;

    RowMatrix left = RowMatrix::Zero(S, S);
    RowMatrix right = RowMatrix::Zero(S, S);
    for (int x = 0; x <= M; ++x) {
        for (int d = 0; d <= M; ++d) {
            const int s = deep_sea_state(M, x, d);
            const int next_d = std::min(d + 1, M);
            if (x > d) {
                // Unreachable from (0, 0); kept so the state space stays (M+1)^2.
                left(s, deep_sea_state(M, x, next_d)) = 1.0;
                right(s, deep_sea_state(M, x, next_d)) = 1.0;
                continue;
            }
            left(s, deep_sea_state(M, std::max(x - 1, 0), next_d)) = 1.0;
            const int up = std::min(x + 1, M);
            right(s, deep_sea_state(M, up, next_d)) += 1.0 - slip;
            right(s, deep_sea_state(M, x, next_d)) += slip;
        }
    }

    std::vector<std::vector<RowMatrix>> transitions(static_cast<std::size_t>(H), {left, right});
    std::vector<RowMatrix> rewards;
    RowMatrix step = RowMatrix::Zero(S, 2);
    step.col(kRight).setConstant(cost);
    for (int h = 0; h < H; ++h) rewards.push_back(step);
    RowMatrix terminal = RowMatrix::Zero(S, 2);
    terminal.row(deep_sea_state(M, M, M)).setConstant(spec.bonus);
    rewards.push_back(std::move(terminal));

    Vector nu = Vector::Zero(S);
    nu(deep_sea_state(M, 0, 0)) = 1.0;
    return TabularMDP(S, 2, H, std::move(transitions), std::move(rewards), std::move(nu));
}

namespace {

Vector dirichlet_flat(int n, RandomStream& rng) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v(i) = rng.exponential();
    return v / v.sum();
}

std::vector<std::vector<RowMatrix>> random_transitions(int S, int A, int H, RandomStream& rng) {
    std::vector<std::vector<RowMatrix>> transitions(static_cast<std::size_t>(H));
    for (auto& period : transitions) {
        for (int a = 0; a < A; ++a) {
            RowMatrix p(S, S);
            for (int s = 0; s < S; ++s) p.row(s) = dirichlet_flat(S, rng).transpose();
            period.push_back(std::move(p));
        }
    }
    return transitions;
}

std::vector<RowMatrix> random_rewards(int S, int A, int H, RandomStream& rng) {
    std::vector<RowMatrix> rewards;
    for (int h = 0; h < H; ++h) {
        RowMatrix r(S, A);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) r(s, a) = 2.0 * rng.uniform() - 1.0;
        rewards.push_back(std::move(r));
    }
    RowMatrix terminal(S, A);
    for (int s = 0; s < S; ++s) terminal.row(s).setConstant(2.0 * rng.uniform() - 1.0);
    rewards.push_back(std::move(terminal));
    return rewards;
}

bool certified(const TabularMDP& mdp, double min_margin) {
    try {
        return compute_margin(mdp) >= min_margin;
    } catch (const MarginZero&) {
        return false;
    }
}

} // namespace

TabularMDP make_random_margin_mdp(int num_states, int num_actions, int horizon, double min_margin,
                                  RandomStream& rng, int max_attempts) {
    if (!(min_margin > 0.0)) throw InvalidArgs("make_random_margin_mdp: min_margin must be positive");
    if (num_states < 1 || num_actions < 1 || horizon < 1)
        throw InvalidArgs("make_random_margin_mdp: S, A and H must be positive");
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        TabularMDP mdp(num_states, num_actions, horizon,
                       random_transitions(num_states, num_actions, horizon, rng),
                       random_rewards(num_states, num_actions, horizon, rng),
                       dirichlet_flat(num_states, rng));
        if (!certified(mdp, min_margin)) continue;
        const TabularMDP one[] = {mdp};
        if (compute_p_underbar(one) > 0.0) return mdp;
    }
    throw GenerationFailed("make_random_margin_mdp: no certified instance after " +
                           std::to_string(max_attempts) + " attempts");
}

std::vector<TabularMDP> make_random_hypothesis_set(const RandomHypothesisOptions& options, RandomStream& rng) {
    const int S = options.num_states, A = options.num_actions, H = options.horizon;
    if (options.count < 1 || S < 1 || A < 1 || H < 1)
        throw InvalidArgs("make_random_hypothesis_set: count, S, A and H must be positive");
    if (!(options.min_margin > 0.0)) throw InvalidArgs("make_random_hypothesis_set: min_margin must be positive");

    for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
        const std::vector<RowMatrix> rewards = random_rewards(S, A, H, rng);
        const Vector nu = dirichlet_flat(S, rng);

        std::vector<TabularMDP> set;
        for (int k = 0; k < options.count; ++k) {
            for (int draw = 0; draw < options.max_attempts; ++draw) {
                TabularMDP candidate(S, A, H, random_transitions(S, A, H, rng), rewards, nu);
                if (certified(candidate, options.min_margin)) {
                    set.push_back(std::move(candidate));
                    break;
                }
            }
            if (static_cast<int>(set.size()) != k + 1) break;
        }
        if (static_cast<int>(set.size()) != options.count) continue;

        if (compute_p_underbar(set) < options.min_p_underbar) continue;
        if (options.distinct_policies && options.count >= 2) {
            std::set<std::vector<int>> policies;
            for (const auto& mdp : set) {
                const DeterministicPolicy pi = greedy_policy(backward_induction(mdp), mdp);
                policies.insert(std::vector<int>(pi.actions.data(), pi.actions.data() + pi.actions.size()));
            }
            if (policies.size() < 2) continue;
        }
        return set;
    }
    throw GenerationFailed("make_random_hypothesis_set: no certified set after " +
                           std::to_string(options.max_attempts) + " attempts");
}

} // namespace regret_forge
