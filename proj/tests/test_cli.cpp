#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "regret_forge/cli.hpp"
#include "regret_forge/expert.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace regret_forge;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "regret_forge");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("regret_forge_test_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int count_lines(const std::string& text) {
    int n = 0;
    for (char c : text) n += c == '\n';
    return n;
}

} // namespace

TEST_CASE("bound") {
    const Outcome r = invoke({"bound", "--S", "2", "--H", "2", "--p", "0.5", "--L", "400"});
    CHECK(r.code == kExitOk);
    CHECK(r.out == "epsilon_L 0.06185\n");

    const Outcome both = invoke({"bound", "--S", "2", "--H", "2", "--p", "0.5", "--L", "0", "--margin", "0.1", "--A", "2"});
    CHECK(both.code == kExitOk);
    CHECK(both.out.find("epsilon_L 1\n") == 0);
    CHECK(both.out.find("beta_underbar ") != std::string::npos);

    CHECK(invoke({"bound", "--S", "2", "--H", "2", "--p", "0.5", "--L", "4", "--margin", "0.1"}).code == kExitConfig);
    CHECK(invoke({"bound", "--S", "2", "--H", "2", "--p", "1.5", "--L", "4"}).code == kExitConfig);
}

TEST_CASE("usage errors") {
    const Outcome unknown = invoke({"run", "--no-such-flag"});
    CHECK(unknown.code == kExitConfig);
    CHECK(unknown.err.find("Usage") != std::string::npos);
    CHECK(invoke({}).code == kExitConfig);
    CHECK(invoke({"bound", "--S", "2"}).code == kExitConfig);
    CHECK(invoke({"run", "--T", "0"}).code == kExitConfig);
    CHECK(invoke({"run", "--agent", "dqn"}).code == kExitConfig);
    CHECK(invoke({"run", "--lambda", "-1"}).code == kExitConfig);
    CHECK(invoke({"sweep"}).code == kExitConfig);
    CHECK(invoke({"--help"}).code == kExitOk);
}

TEST_CASE("run writes a summary and one curve file per seed") {
    const fs::path dir = scratch("run");
    const Outcome r = invoke({"run", "--env", "deep_sea", "--M", "10", "--agent", "urlsvi", "--T", "10", "--seeds", "2",
                              "--out", dir.string(), "--threads", "2"});
    CHECK(r.code == kExitOk);
    CHECK(r.out.find("agent,beta,kappa,beta_tilde,mean_cumreg_T,stderr,n_seeds\n") == 0);
    CHECK(r.out.find("\nurlsvi,") != std::string::npos);
    CHECK(count_lines(r.out) == 2);
    CHECK(fs::exists(dir / "summary.csv"));
    CHECK(fs::exists(dir / "curves" / "seed_0000.csv"));
    CHECK(fs::exists(dir / "curves" / "seed_0001.csv"));
    CHECK_FALSE(fs::exists(dir / "curves" / "seed_0002.csv"));
    fs::remove_all(dir);
}

TEST_CASE("config file with flag overrides") {
    const fs::path dir = scratch("config");
    const fs::path config = dir / "sweep.toml";
    {
        std::ofstream file(config);
        file << "# small sweep\nM = 4\nT = 5\nn_seeds = 2\nagents = [\"urlsvi\", \"pirlsvi\"]\n"
             << "kappa_grid = [1.0]\nbeta_grid = [1.0, 5.0]\nmaster_seed = 3\n";
    }
    const Outcome r = invoke({"sweep", "--config", config.string(), "--seeds", "1", "--out", (dir / "out").string()});
    CHECK(r.code == kExitOk);
    CHECK(count_lines(r.out) == 1 + 4);
    CHECK(r.out.find(",1\n") != std::string::npos);
    CHECK(r.out.find(",2\n") == std::string::npos);

    const Outcome again = invoke({"sweep", "--config", config.string(), "--seeds", "1", "--out", (dir / "again").string()});
    CHECK(again.out == r.out);

    {
        std::ofstream file(dir / "bad.toml");
        file << "no_such_key = 1\n";
    }
    CHECK(invoke({"sweep", "--config", (dir / "bad.toml").string()}).code == kExitConfig);
    {
        std::ofstream file(dir / "section.toml");
        file << "[env]\nM = 3\n";
    }
    CHECK(invoke({"sweep", "--config", (dir / "section.toml").string()}).code == kExitConfig);
    CHECK(invoke({"sweep", "--config", (dir / "missing.toml").string()}).code == kExitConfig);
    fs::remove_all(dir);
}

TEST_CASE("gen-offline writes a loadable dataset") {
    const fs::path dir = scratch("gen");
    const std::string prefix = (dir / "expert").string();
    const Outcome r = invoke({"gen-offline", "--M", "4", "--beta", "2", "--kappa", "1", "--seed", "7", "--out", prefix,
                              "--write-env"});
    CHECK(r.code == kExitOk);
    const OfflineDataset data = load_dataset(prefix + ".jsonl", prefix + ".meta.json");
    CHECK(data.num_episodes == episodes_for_data_ratio(1.0, 25, 2, 4));
    CHECK(data.metadata.beta == 2.0);
    CHECK(data.metadata.seed == 7);
    CHECK(fs::exists(prefix + ".env.json"));

    CHECK(invoke({"gen-offline", "--beta", "2", "--kappa", "1", "--L", "3", "--out", prefix}).code == kExitConfig);
    CHECK(invoke({"gen-offline", "--beta", "2", "--L", "3", "--out", (dir / "missing" / "x").string()}).code ==
          kExitRuntime);
    fs::remove_all(dir);
}

TEST_CASE("estimate-eps writes one row per L") {
    const fs::path dir = scratch("eps");
    const std::string csv = (dir / "eps.csv").string();
    const Outcome r = invoke({"estimate-eps", "--count", "4", "--S", "2", "--A", "2", "--H", "2", "--margin", "0.3",
                              "--L", "0,10", "--trials", "50", "--threads", "1", "--out", csv});
    CHECK(r.code == kExitOk);
    std::ifstream in(csv);
    std::string header, first, second, extra;
    std::getline(in, header);
    std::getline(in, first);
    std::getline(in, second);
    CHECK(header == "L,mc_pi_tilde,mc_pi_hat,bound,n_trials,se_pi_tilde,se_pi_hat");
    CHECK(first.rfind("0,", 0) == 0);
    CHECK(second.rfind("10,", 0) == 0);
    CHECK_FALSE(std::getline(in, extra));
    fs::remove_all(dir);
}
