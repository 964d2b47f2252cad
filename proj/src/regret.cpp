#include "regret_forge/regret.hpp"

namespace regret_forge {

RegretCurve compute_regret(double optimal_value, std::span<const double> returns) {
    RegretCurve curve;
    curve.per_episode.reserve(returns.size());
    curve.cumulative.reserve(returns.size());
    double running = 0.0;
    for (double realized : returns) {
        const double regret = optimal_value - realized;
        running += regret;
        curve.per_episode.push_back(regret);
        curve.cumulative.push_back(running);
    }
    return curve;
}

RegretCurve compute_regret(const TabularMDP& env, std::span<const double> returns) {
    return compute_regret(optimal_value(env, backward_induction(env)), returns);
}

} // namespace regret_forge
