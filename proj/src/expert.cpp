#include "regret_forge/expert.hpp"

#include "regret_forge/errors.hpp"
#include "regret_forge/softmax.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

namespace regret_forge {

std::vector<Eigen::MatrixXi> OfflineDataset::state_action_counts() const {
    std::vector<Eigen::MatrixXi> counts(static_cast<std::size_t>(horizon), Eigen::MatrixXi::Zero(num_states, num_actions));
    for (const auto& t : transitions) counts[static_cast<std::size_t>(t.h)](t.state, t.action) += 1;
    return counts;
}

int episodes_for_data_ratio(double kappa, int num_states, int num_actions, int horizon) {
    if (kappa < 0.0 || horizon < 1) throw InvalidArgs("episodes_for_data_ratio: need kappa >= 0 and H >= 1");
    return static_cast<int>(std::lround(kappa * num_actions * num_states / horizon));
}

StochasticPolicy softmax_policy(const QTable& q, double beta) {
    if (!(beta >= 0.0)) throw InvalidArgs("softmax_policy: beta must be nonnegative");
    StochasticPolicy policy;
    policy.probs.reserve(static_cast<std::size_t>(q.horizon()));
    for (int h = 0; h < q.horizon(); ++h) {
        RowMatrix probs(q.num_states(), q.num_actions());
        for (int s = 0; s < q.num_states(); ++s) probs.row(s) = softmax(q[h].row(s), beta).transpose();
        policy.probs.push_back(std::move(probs));
    }
    return policy;
}

QTable perturb_q(const QTable& q, double lambda, RandomStream& rng) {
    if (!(lambda > 0.0)) throw InvalidArgs("perturb_q: lambda must be positive or infinite");
    if (std::isinf(lambda)) return q;
    QTable noisy = q;
    const double stddev = 1.0 / lambda;
    for (int h = 0; h <= q.horizon(); ++h)
        for (int s = 0; s < q.num_states(); ++s)
            for (int a = 0; a < q.num_actions(); ++a) noisy(h, s, a) += stddev * rng.normal();
    return noisy;
}

OfflineDataset generate_offline(const TabularMDP& mdp, const Competence& competence, int num_episodes,
                                RandomStream& rng, const std::string& env_description) {
    if (num_episodes < 0) throw InvalidArgs("generate_offline: episode count must be nonnegative");
    OfflineDataset data;
    data.num_states = mdp.num_states();
    data.num_actions = mdp.num_actions();
    data.horizon = mdp.horizon();
    data.num_episodes = num_episodes;
    data.metadata.env = env_description;
    data.metadata.beta = competence.beta;
    data.metadata.lambda = competence.lambda;
    data.metadata.kappa = static_cast<double>(num_episodes) * mdp.horizon() / (mdp.num_states() * mdp.num_actions());
    data.metadata.seed = rng.seed();

    const QTable expert_q = perturb_q(backward_induction(mdp), competence.lambda, rng);
    const StochasticPolicy expert = softmax_policy(expert_q, competence.beta);
    data.transitions.reserve(static_cast<std::size_t>(num_episodes) * static_cast<std::size_t>(mdp.horizon()));
    for (int l = 0; l < num_episodes; ++l) {
        const Trajectory traj = simulate_episode(mdp, expert, rng);
        for (const Transition& step : traj.steps)
            data.transitions.push_back({l, step.h, step.state, step.action, step.next_state, step.reward});
        data.transitions.back().reward += traj.terminal_reward;
    }
    return data;
}

double estimate_beta_from_counts(const std::vector<long>& action_counts, double c0) {
    if (!(c0 > 0.0)) throw InvalidArgs("estimate_beta_entropy: c0 must be positive");
    double total = 0.0;
    for (long c : action_counts) total += static_cast<double>(c);
    if (total <= 0.0) throw EmptyDataset("estimate_beta_entropy: no recorded actions");
    double entropy = 0.0;
    for (long c : action_counts) {
        if (c <= 0) continue;
        const double p = static_cast<double>(c) / total;
        entropy -= p * std::log(p);
    }
    if (entropy <= 0.0) return kBetaMax;
    return std::min(c0 / entropy, kBetaMax);
}

double estimate_beta_entropy(const OfflineDataset& data, double c0) {
    if (data.empty()) throw EmptyDataset("estimate_beta_entropy: dataset is empty");
    std::vector<long> counts(static_cast<std::size_t>(std::max(data.num_actions, 1)), 0);
    for (const auto& t : data.transitions) {
        if (t.action >= static_cast<int>(counts.size())) counts.resize(static_cast<std::size_t>(t.action) + 1, 0);
        counts[static_cast<std::size_t>(t.action)] += 1;
    }
    return estimate_beta_from_counts(counts, c0);
}

using nlohmann::json;

void save_dataset(const OfflineDataset& data, const std::string& jsonl_path, const std::string& metadata_path) {
    std::ofstream lines(jsonl_path);
    if (!lines) throw Error("save_dataset: cannot open " + jsonl_path);
    for (const auto& t : data.transitions) {
        json row = {{"l", t.episode}, {"h", t.h}, {"s", t.state}, {"a", t.action}, {"sn", t.next_state}, {"r", t.reward}};
        lines << row.dump() << '\n';
    }
    std::ofstream meta(metadata_path);
    if (!meta) throw Error("save_dataset: cannot open " + metadata_path);
    json doc = {{"beta", data.metadata.beta},
                {"kappa", data.metadata.kappa},
                {"seed", data.metadata.seed},
                {"env", data.metadata.env},
                {"S", data.num_states},
                {"A", data.num_actions},
                {"H", data.horizon},
                {"L", data.num_episodes}};
    doc["lambda"] = std::isinf(data.metadata.lambda) ? json(nullptr) : json(data.metadata.lambda);
    meta << doc.dump(2) << '\n';
}

OfflineDataset load_dataset(const std::string& jsonl_path, const std::string& metadata_path) {
    OfflineDataset data;
    try {
        std::ifstream meta(metadata_path);
        if (!meta) throw Error("load_dataset: cannot open " + metadata_path);
        const json doc = json::parse(meta);
        data.num_states = doc.at("S").get<int>();
        data.num_actions = doc.at("A").get<int>();
        data.horizon = doc.at("H").get<int>();
        data.num_episodes = doc.at("L").get<int>();
        data.metadata.beta = doc.at("beta").get<double>();
        data.metadata.kappa = doc.at("kappa").get<double>();
        data.metadata.seed = doc.at("seed").get<std::uint64_t>();
        data.metadata.env = doc.value("env", std::string{});
        data.metadata.lambda = doc.at("lambda").is_null() ? kInfinite : doc.at("lambda").get<double>();

        std::ifstream lines(jsonl_path);
        if (!lines) throw Error("load_dataset: cannot open " + jsonl_path);
        std::string line;
        while (std::getline(lines, line)) {
            if (line.empty()) continue;
            const json row = json::parse(line);
            data.transitions.push_back({row.at("l").get<int>(), row.at("h").get<int>(), row.at("s").get<int>(),
                                        row.at("a").get<int>(), row.at("sn").get<int>(), row.at("r").get<double>()});
        }
    } catch (const json::exception& e) {
        throw Error(std::string("load_dataset: ") + e.what());
    }
    if (data.transitions.size() != static_cast<std::size_t>(data.num_episodes) * static_cast<std::size_t>(data.horizon))
        throw Error("load_dataset: transition count does not equal L * H");
    return data;
}

} // namespace regret_forge
