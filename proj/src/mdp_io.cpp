#include "regret_forge/errors.hpp"
#include "regret_forge/mdp.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace regret_forge {

using nlohmann::json;

std::string to_json(const TabularMDP& mdp) {
    const int S = mdp.num_states(), A = mdp.num_actions(), H = mdp.horizon();
    json doc;
    doc["S"] = S;
    doc["A"] = A;
    doc["H"] = H;
    doc["nu"] = std::vector<double>(mdp.initial_distribution().data(), mdp.initial_distribution().data() + S);

    json rewards = json::array();
    for (int h = 0; h <= H; ++h) {
        json slice = json::array();
        for (int s = 0; s < S; ++s) {
            const auto row = mdp.reward(h).row(s);
            slice.push_back(std::vector<double>(row.data(), row.data() + A));
        }
        rewards.push_back(std::move(slice));
    }
    doc["r"] = std::move(rewards);

    json transitions = json::array();
    for (int h = 0; h < H; ++h) {
        json by_state = json::array();
        for (int s = 0; s < S; ++s) {
            json by_action = json::array();
            for (int a = 0; a < A; ++a) {
                const auto row = mdp.transition_row(h, s, a);
                by_action.push_back(std::vector<double>(row.begin(), row.end()));
            }
            by_state.push_back(std::move(by_action));
        }
        transitions.push_back(std::move(by_state));
    }
    doc["P"] = std::move(transitions);
    return doc.dump();
}

TabularMDP mdp_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw InvalidModel(std::string("mdp_from_json: ") + e.what());
    }
    try {
        const int S = doc.at("S").get<int>();
        const int A = doc.at("A").get<int>();
        const int H = doc.at("H").get<int>();
        if (S < 1 || A < 1 || H < 1) throw InvalidModel("mdp_from_json: S, A and H must be positive");

        const auto nu_values = doc.at("nu").get<std::vector<double>>();
        if (nu_values.size() != static_cast<std::size_t>(S)) throw InvalidModel("mdp_from_json: nu has wrong size");
        Vector nu = Eigen::Map<const Vector>(nu_values.data(), S);

        const auto& r = doc.at("r");
        if (r.size() != static_cast<std::size_t>(H) + 1) throw InvalidModel("mdp_from_json: r must have H+1 slices");
        std::vector<RowMatrix> rewards;
        for (int h = 0; h <= H; ++h) {
            RowMatrix slice(S, A);
            if (r[h].size() != static_cast<std::size_t>(S)) throw InvalidModel("mdp_from_json: r slice has wrong size");
            for (int s = 0; s < S; ++s) {
                const auto row = r[h][s].get<std::vector<double>>();
                if (row.size() != static_cast<std::size_t>(A)) throw InvalidModel("mdp_from_json: r row has wrong size");
                for (int a = 0; a < A; ++a) slice(s, a) = row[static_cast<std::size_t>(a)];
            }
            rewards.push_back(std::move(slice));
        }

        const auto& p = doc.at("P");
        if (p.size() != static_cast<std::size_t>(H)) throw InvalidModel("mdp_from_json: P must have H periods");
        std::vector<std::vector<RowMatrix>> transitions(static_cast<std::size_t>(H),
                                                        std::vector<RowMatrix>(static_cast<std::size_t>(A), RowMatrix(S, S)));
        for (int h = 0; h < H; ++h) {
            if (p[h].size() != static_cast<std::size_t>(S)) throw InvalidModel("mdp_from_json: P period has wrong size");
            for (int s = 0; s < S; ++s) {
                if (p[h][s].size() != static_cast<std::size_t>(A)) throw InvalidModel("mdp_from_json: P state has wrong size");
                for (int a = 0; a < A; ++a) {
                    const auto row = p[h][s][a].get<std::vector<double>>();
                    if (row.size() != static_cast<std::size_t>(S)) throw InvalidModel("mdp_from_json: P row has wrong size");
                    for (int n = 0; n < S; ++n)
                        transitions[static_cast<std::size_t>(h)][static_cast<std::size_t>(a)](s, n) = row[static_cast<std::size_t>(n)];
                }
            }
        }
        return TabularMDP(S, A, H, std::move(transitions), std::move(rewards), std::move(nu));
    } catch (const json::exception& e) {
        throw InvalidModel(std::string("mdp_from_json: ") + e.what());
    }
}

void save_mdp(const TabularMDP& mdp, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("save_mdp: cannot open " + path);
    out << to_json(mdp) << '\n';
}

TabularMDP load_mdp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("load_mdp: cannot open " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return mdp_from_json(buffer.str());
}

} // namespace regret_forge
