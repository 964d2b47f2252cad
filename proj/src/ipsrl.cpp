#include "regret_forge/ipsrl.hpp"

#include "regret_forge/errors.hpp"
#include "regret_forge/parallel.hpp"
#include "regret_forge/softmax.hpp"

#include <cmath>
#include <limits>

namespace regret_forge {

namespace {

bool same_structure(const TabularMDP& a, const TabularMDP& b) {
    if (a.num_states() != b.num_states() || a.num_actions() != b.num_actions() || a.horizon() != b.horizon())
        return false;
    if ((a.initial_distribution().array() != b.initial_distribution().array()).any()) return false;
    for (int h = 0; h <= a.horizon(); ++h)
        if ((a.reward(h).array() != b.reward(h).array()).any()) return false;
    return true;
}

double log_or_ninf(double p) { return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity(); }

double binomial_se(double p, int n) { return n > 0 ? std::sqrt(p * (1.0 - p) / n) : 0.0; }

} // namespace

HypothesisSet::HypothesisSet(std::vector<TabularMDP> hypotheses, Vector prior)
    : hypotheses_(std::move(hypotheses)), prior_(std::move(prior)) {
    if (hypotheses_.empty()) throw InvalidArgs("HypothesisSet: empty hypothesis list");
    if (prior_.size() != static_cast<Eigen::Index>(hypotheses_.size()))
        throw InvalidArgs("HypothesisSet: prior size does not match the hypothesis count");
    if ((prior_.array() < 0.0).any() || std::abs(prior_.sum() - 1.0) > 1e-12)
        throw InvalidArgs("HypothesisSet: prior must be a probability vector");
    for (const auto& mdp : hypotheses_)
        if (!same_structure(hypotheses_.front(), mdp))
            throw InvalidArgs("HypothesisSet: hypotheses must share S, A, H, r and nu");
    for (const auto& mdp : hypotheses_) {
        optimal_q_.push_back(backward_induction(mdp));
        optimal_policy_.push_back(greedy_policy(optimal_q_.back(), mdp));
        optimal_value_.push_back(regret_forge::optimal_value(mdp, optimal_q_.back()));
    }
}

HypothesisSet HypothesisSet::uniform(std::vector<TabularMDP> hypotheses) {
    const auto n = static_cast<Eigen::Index>(hypotheses.size());
    if (n == 0) throw InvalidArgs("HypothesisSet: empty hypothesis list");
    return HypothesisSet(std::move(hypotheses), Vector::Constant(n, 1.0 / static_cast<double>(n)));
}

PosteriorBelief::PosteriorBelief(Vector log_weights) : log_weights_(std::move(log_weights)) {
    if (log_weights_.size() == 0) throw InvalidArgs("PosteriorBelief: no hypotheses");
    if (log_weights_.hasNaN()) throw InvalidArgs("PosteriorBelief: NaN log-weight");
    const double top = log_weights_.maxCoeff();
    if (!std::isfinite(top)) throw ImpossibleData("every hypothesis assigns zero likelihood to the data");
    const double norm = top + std::log((log_weights_.array() - top).exp().sum());
    log_weights_.array() -= norm;
}

int PosteriorBelief::sample(RandomStream& rng) const {
    const Vector w = weights();
    return rng.categorical({w.data(), static_cast<std::size_t>(w.size())});
}

PosteriorBelief informed_posterior(const HypothesisSet& hs, const OfflineDataset& data, double beta) {
    if (!(beta >= 0.0)) throw InvalidArgs("informed_posterior: beta must be nonnegative");
    Vector log_weights(hs.size());
    for (int k = 0; k < hs.size(); ++k) {
        const TabularMDP& theta = hs[k];
        const QTable& q = hs.optimal_q(k);
        std::vector<RowMatrix> log_policy;
        for (int h = 0; h < theta.horizon(); ++h) {
            RowMatrix lp(theta.num_states(), theta.num_actions());
            for (int s = 0; s < theta.num_states(); ++s)
                lp.row(s) = (beta * q[h].row(s).array() - log_sum_exp(q[h].row(s), beta)).matrix();
            log_policy.push_back(std::move(lp));
        }
        double total = log_or_ninf(hs.prior()(k));
        for (const auto& t : data.transitions) {
            total += log_or_ninf(theta.transition(t.h, t.state, t.action, t.next_state));
            total += log_policy[static_cast<std::size_t>(t.h)](t.state, t.action);
        }
        log_weights(k) = total;
    }
    return PosteriorBelief(std::move(log_weights));
}

PosteriorBelief online_update(const PosteriorBelief& belief, const HypothesisSet& hs, const Trajectory& traj) {
    Vector log_weights = belief.log_weights();
    for (int k = 0; k < hs.size(); ++k)
        for (const auto& step : traj.steps)
            log_weights(k) += log_or_ninf(hs[k].transition(step.h, step.state, step.action, step.next_state));
    return PosteriorBelief(std::move(log_weights));
}

IpsrlTrace ipsrl_trace(const HypothesisSet& hs, const OfflineDataset& data, double beta, int true_index,
                       int episodes, RandomStream& rng) {
    if (true_index < 0 || true_index >= hs.size()) throw InvalidArgs("ipsrl_run: true hypothesis index out of range");
    const TabularMDP& truth = hs[true_index];
    IpsrlTrace trace;
    std::vector<double> returns;
    returns.reserve(static_cast<std::size_t>(episodes));
    PosteriorBelief belief = informed_posterior(hs, data, beta);
    for (int t = 0; t < episodes; ++t) {
        const int sampled = belief.sample(rng);
        const Trajectory traj = simulate_episode(truth, hs.optimal_policy(sampled), rng);
        returns.push_back(traj.total_return());
        trace.sampled_hypothesis.push_back(sampled);
        trace.policy_mismatch.push_back(!(hs.optimal_policy(sampled) == hs.optimal_policy(true_index)));
        belief = online_update(belief, hs, traj);
    }
    trace.curve = compute_regret(hs.optimal_value(true_index), returns);
    trace.curve.seed = rng.seed();
    trace.curve.agent = "ipsrl";
    return trace;
}

RegretCurve ipsrl_run(const HypothesisSet& hs, const OfflineDataset& data, double beta, int true_index,
                      int episodes, RandomStream& rng) {
    return ipsrl_trace(hs, data, beta, true_index, episodes, rng).curve;
}

DeterministicPolicy construct_pi_hat(const OfflineDataset& data, double delta, int num_states, int num_actions,
                                     int horizon) {
    if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgs("construct_pi_hat: delta must lie in (0, 1)");
    std::vector<Eigen::MatrixXi> counts(static_cast<std::size_t>(horizon), Eigen::MatrixXi::Zero(num_states, num_actions));
    for (const auto& t : data.transitions) counts[static_cast<std::size_t>(t.h)](t.state, t.action) += 1;

    const double threshold = delta * data.num_episodes;
    DeterministicPolicy policy{Eigen::MatrixXi::Zero(horizon, num_states)};
    for (int h = 0; h < horizon; ++h) {
        const Eigen::MatrixXi& n = counts[static_cast<std::size_t>(h)];
        for (int s = 0; s < num_states; ++s) {
            if (static_cast<double>(n.row(s).sum()) < threshold) continue;
            int best = 0;
            for (int a = 1; a < num_actions; ++a)
                if (n(s, a) > n(s, best)) best = a;
            policy.actions(h, s) = best;
        }
    }
    return policy;
}

double beta_threshold(double margin, double p_underbar, int horizon, int num_actions) {
    if (horizon < 2 || num_actions < 2) throw InvalidArgs("beta_threshold: requires H >= 2 and A >= 2");
    if (!(margin > 0.0)) throw InvalidArgs("beta_threshold: margin must be positive");
    if (!(p_underbar > 0.0 && p_underbar <= 1.0)) throw InvalidArgs("beta_threshold: p_underbar must lie in (0, 1]");
    return (std::log(3.0) - std::log(p_underbar) + std::log(horizon - 1.0) + std::log(num_actions - 1.0)) / margin;
}

double epsilon_bound(int num_states, int horizon, int num_episodes, double p_underbar) {
    const double L = num_episodes;
    const double tail = std::exp(-L * p_underbar * p_underbar / 18.0) + std::exp(-L * p_underbar / 36.0);
    return std::min(1.0, 2.0 * num_states * horizon * tail);
}

EpsilonReport estimate_epsilon_mc(const HypothesisSet& hs, double beta, int num_episodes, int n_trials,
                                  RandomStream& rng, std::optional<double> delta, unsigned threads) {
    if (n_trials < 1) throw InvalidArgs("estimate_epsilon_mc: n_trials must be positive");
    const double p_underbar = compute_p_underbar(hs.hypotheses());
    const double threshold = delta.value_or(p_underbar / 2.0);
    const std::uint64_t master = rng.next_u64();

    std::vector<char> tilde_miss(static_cast<std::size_t>(n_trials), 0);
    std::vector<char> hat_miss(static_cast<std::size_t>(n_trials), 0);
    parallel_for(static_cast<std::size_t>(n_trials), threads, [&](std::size_t trial) {
        RandomStream stream = RandomStream::derive(master, {trial});
        const int truth = stream.categorical({hs.prior().data(), static_cast<std::size_t>(hs.size())});
        const OfflineDataset data = generate_offline(hs[truth], Competence{beta}, num_episodes, stream);
        const int sampled = informed_posterior(hs, data, beta).sample(stream);
        const DeterministicPolicy& target = hs.optimal_policy(truth);
        tilde_miss[trial] = !(hs.optimal_policy(sampled) == target);
        const DeterministicPolicy pi_hat =
            construct_pi_hat(data, threshold, hs.num_states(), hs.num_actions(), hs.horizon());
        hat_miss[trial] = !(pi_hat == target);
    });

    EpsilonReport report;
    report.L = num_episodes;
    report.n_trials = n_trials;
    double tilde = 0.0, hat = 0.0;
    for (int i = 0; i < n_trials; ++i) {
        tilde += tilde_miss[static_cast<std::size_t>(i)];
        hat += hat_miss[static_cast<std::size_t>(i)];
    }
    report.mc_estimate_pi_tilde = tilde / n_trials;
    report.mc_estimate_pi_hat = hat / n_trials;
    report.se_pi_tilde = binomial_se(report.mc_estimate_pi_tilde, n_trials);
    report.se_pi_hat = binomial_se(report.mc_estimate_pi_hat, n_trials);
    report.bound_eps_L = epsilon_bound(hs.num_states(), hs.horizon(), num_episodes, p_underbar);
    return report;
}

std::vector<double> mismatch_by_episode(const HypothesisSet& hs, double beta, int num_episodes, int episodes,
                                        int n_trials, RandomStream& rng, unsigned threads) {
    if (n_trials < 1 || episodes < 1) throw InvalidArgs("mismatch_by_episode: need positive trials and episodes");
    const std::uint64_t master = rng.next_u64();
    std::vector<std::vector<bool>> flags(static_cast<std::size_t>(n_trials));
    parallel_for(static_cast<std::size_t>(n_trials), threads, [&](std::size_t trial) {
        RandomStream stream = RandomStream::derive(master, {trial});
        const int truth = stream.categorical({hs.prior().data(), static_cast<std::size_t>(hs.size())});
        const OfflineDataset data = generate_offline(hs[truth], Competence{beta}, num_episodes, stream);
        flags[trial] = ipsrl_trace(hs, data, beta, truth, episodes, stream).policy_mismatch;
    });
    std::vector<double> frequency(static_cast<std::size_t>(episodes), 0.0);
    for (const auto& trial : flags)
        for (int k = 0; k < episodes; ++k) frequency[static_cast<std::size_t>(k)] += trial[static_cast<std::size_t>(k)];
    for (double& f : frequency) f /= n_trials;
    return frequency;
}

void write_epsilon_csv_header(std::ostream& out) {
    out << "L,mc_pi_tilde,mc_pi_hat,bound,n_trials,se_pi_tilde,se_pi_hat\n";
}

void write_epsilon_csv_row(std::ostream& out, const EpsilonReport& r) {
    out << r.L << ',' << r.mc_estimate_pi_tilde << ',' << r.mc_estimate_pi_hat << ',' << r.bound_eps_L << ','
        << r.n_trials << ',' << r.se_pi_tilde << ',' << r.se_pi_hat << '\n';
}

} // namespace regret_forge
