#include "lrcvar/oracle.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "lrcvar/error.hpp"

namespace lrcvar {

namespace {

constexpr double kTieTolerance = 1e-9;

bool nearly_equal(double a, double b) { return std::abs(a - b) <= kTieTolerance * std::max(1.0, std::abs(b)); }

template <typename Objective, typename TiePreference>
OptimumResult search(const MdpModel& model, double phi, double lambda, std::uint64_t budget, Objective objective,
                     TiePreference prefer)
{
    require_valid(model);
    const auto total = count_deterministic_policies(model);
    if (total > budget)
        throw InvalidArgument("policy enumeration needs " + std::to_string(total) + " evaluations, budget is " +
                              std::to_string(budget));
    std::optional<OptimumResult> best;
    std::optional<bool> best_preferred;
    std::uint64_t evaluated = 0;
    std::uint64_t skipped = 0;
    for (const auto& policy : enumerate_deterministic_policies(model)) {
        PolicyEvaluation eval;
        try {
            eval = evaluate_policy(model, policy, phi, lambda);
        } catch (const ReducibleChain&) {
            ++skipped;
            continue;
        }
        ++evaluated;
        const double value = objective(eval);
        if (!best) {
            best = OptimumResult{policy, std::move(eval), 0, 0};
            continue;
        }
        const double incumbent = objective(best->evaluation);
        if (nearly_equal(value, incumbent)) {
            if (!best_preferred)
                best_preferred = prefer(best->policy);
            if (!*best_preferred && prefer(policy)) {
                best = OptimumResult{policy, std::move(eval), 0, 0};
                best_preferred = true;
            }
        } else if (value < incumbent) {
            best = OptimumResult{policy, std::move(eval), 0, 0};
            best_preferred.reset();
        }
    }
    if (!best)
        throw ReducibleChain("no deterministic policy induces a chain with a single recurrent class");
    best->evaluated = evaluated;
    best->skipped_reducible = skipped;
    return *best;
}

} // namespace

std::vector<int> LocalOptimalityReport::violating_states(double tol) const
{
    std::vector<int> out;
    for (const auto& s : states)
        if (s.gap > tol)
            out.push_back(s.state);
    return out;
}

std::vector<MixtureComponent> occupancy_mixture(const MdpModel& model, const StateActionDist& occupancy)
{
    std::vector<MixtureComponent> mix;
    for (int s = 0; s < model.n_states; ++s)
        for (int a = 0; a < model.n_actions; ++a)
            if (occupancy.weights(s, a) > 0.0)
                mix.push_back({occupancy.weights(s, a), &model.cost(s, a)});
    return mix;
}

PolicyEvaluation evaluate_policy(const MdpModel& model, const RandomizedPolicy& policy, double phi, double lambda)
{
    PolicyEvaluation out;
    out.policy = policy;
    out.occupancy = stationary_distribution(model, policy);
    const auto mix = occupancy_mixture(model, out.occupancy);
    out.risk = mixture_risk(mix, phi);
    out.objective = out.risk.cvar + lambda * out.risk.mean;
    return out;
}

PolicyEvaluation evaluate_policy(const MdpModel& model, const DeterministicPolicy& policy, double phi, double lambda)
{
    return evaluate_policy(model, to_randomized(model, policy), phi, lambda);
}

std::uint64_t count_deterministic_policies(const MdpModel& model)
{
    std::uint64_t total = 1;
    for (int s = 0; s < model.n_states; ++s) {
        const auto k = static_cast<std::uint64_t>(model.feasible_count(s));
        if (k == 0)
            return 0;
        if (total > std::numeric_limits<std::uint64_t>::max() / k)
            return std::numeric_limits<std::uint64_t>::max();
        total *= k;
    }
    return total;
}

DeterministicPolicyRange::DeterministicPolicyRange(const MdpModel& model)
{
    choices_.resize(static_cast<std::size_t>(model.n_states));
    for (int s = 0; s < model.n_states; ++s)
        for (int a = 0; a < model.n_actions; ++a)
            if (model.is_feasible(s, a))
                choices_[static_cast<std::size_t>(s)].push_back(a);
}

DeterministicPolicyRange::iterator DeterministicPolicyRange::begin() const
{
    iterator it;
    for (const auto& c : choices_)
        if (c.empty())
            return it;
    it.choices_ = &choices_;
    it.cursor_.assign(choices_.size(), 0);
    it.current_.action.resize(choices_.size());
    for (std::size_t s = 0; s < choices_.size(); ++s)
        it.current_.action[s] = choices_[s][0];
    it.done_ = choices_.empty();
    return it;
}

DeterministicPolicyRange::iterator& DeterministicPolicyRange::iterator::operator++()
{
    const auto& choices = *choices_;
    for (std::size_t i = choices.size(); i-- > 0;) {
        if (++cursor_[i] < choices[i].size()) {
            current_.action[i] = choices[i][cursor_[i]];
            return *this;
        }
        cursor_[i] = 0;
        current_.action[i] = choices[i][0];
    }
    done_ = true;
    return *this;
}

DeterministicPolicyRange enumerate_deterministic_policies(const MdpModel& model) { return DeterministicPolicyRange(model); }

ValueFunction relative_value_function(const MdpModel& model, const RandomizedPolicy& policy, double phi, double lambda,
                                      int reference_state)
{
    if (reference_state < 0 || reference_state >= model.n_states)
        throw InvalidArgument("reference state out of range");
    const PolicyEvaluation eval = evaluate_policy(model, policy, phi, lambda);
    const int S = model.n_states;
    const Eigen::MatrixXd P = induced_chain(model, policy);

    Eigen::VectorXd stage_cost = Eigen::VectorXd::Zero(S);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < model.n_actions; ++a)
            if (policy.probs(s, a) > 0.0) {
                const auto& c = model.cost(s, a);
                stage_cost(s) += policy.probs(s, a) * (tilde_c_exact(c, eval.risk.var, phi) + lambda * dist_mean(c));
            }

    // Unknowns (V, g): (I - P) V + g 1 = r, V(ref) = 0.
    Eigen::MatrixXd system = Eigen::MatrixXd::Zero(S + 1, S + 1);
    system.topLeftCorner(S, S) = Eigen::MatrixXd::Identity(S, S) - P;
    system.topRightCorner(S, 1).setOnes();
    system(S, reference_state) = 1.0;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(S + 1);
    rhs.head(S) = stage_cost;

    const Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
    if (!lu.isInvertible())
        throw NumericalFailure("Poisson system is singular");
    const Eigen::VectorXd sol = lu.solve(rhs);

    ValueFunction out;
    out.values = sol.head(S);
    out.values(reference_state) = 0.0;
    out.gain = sol(S);
    out.reference_state = reference_state;

    const double scale = std::max(1.0, stage_cost.lpNorm<Eigen::Infinity>());
    const double residual =
        (out.values - P * out.values + Eigen::VectorXd::Constant(S, out.gain) - stage_cost).lpNorm<Eigen::Infinity>();
    if (!(residual <= 1e-10 * scale))
        throw NumericalFailure("Poisson residual " + std::to_string(residual) + " exceeds tolerance");
    if (!(std::abs(out.gain - eval.objective) <= 1e-8 * std::max(1.0, std::abs(eval.objective))))
        throw NumericalFailure("Poisson gain disagrees with the steady-state objective");
    return out;
}

Eigen::MatrixXd policy_q_values(const MdpModel& model, const PolicyEvaluation& evaluation, const ValueFunction& value,
                                double phi, double lambda)
{
    Eigen::MatrixXd q = Eigen::MatrixXd::Constant(model.n_states, model.n_actions, std::numeric_limits<double>::infinity());
    for (int s = 0; s < model.n_states; ++s)
        for (int a = 0; a < model.n_actions; ++a)
            if (model.is_feasible(s, a)) {
                const auto& c = model.cost(s, a);
                q(s, a) = tilde_c_exact(c, evaluation.risk.var, phi) + lambda * dist_mean(c) +
                          model.kernel_row(s, a).dot(value.values);
            }
    return q;
}

LocalOptimalityReport check_local_optimality(const MdpModel& model, const DeterministicPolicy& policy, double phi,
                                             double lambda, double tol, int reference_state)
{
    LocalOptimalityReport report;
    const RandomizedPolicy d = to_randomized(model, policy);
    report.evaluation = evaluate_policy(model, d, phi, lambda);
    report.value = relative_value_function(model, d, phi, lambda, reference_state);
    report.q = policy_q_values(model, report.evaluation, report.value, phi, lambda);
    report.locally_optimal = true;
    for (int s = 0; s < model.n_states; ++s) {
        int best = -1;
        for (int a = 0; a < model.n_actions; ++a)
            if (model.is_feasible(s, a) && (best < 0 || report.q(s, a) < report.q(s, best)))
                best = a;
        const int chosen = policy.action[static_cast<std::size_t>(s)];
        const double gap = report.q(s, chosen) - report.q(s, best);
        report.states.push_back({s, chosen, best, gap});
        if (gap > tol)
            report.locally_optimal = false;
    }
    return report;
}

OptimumResult global_optimum(const MdpModel& model, double phi, double lambda, std::uint64_t budget, int reference_state)
{
    return search(
        model, phi, lambda, budget, [](const PolicyEvaluation& e) { return e.objective; },
        [&](const DeterministicPolicy& p) {
            try {
                return check_local_optimality(model, p, phi, lambda, kDefaultLocalTolerance, reference_state).locally_optimal;
            } catch (const Error&) {
                return false;
            }
        });
}

OptimumResult mean_optimum(const MdpModel& model, double phi, std::uint64_t budget)
{
    return search(
        model, phi, 0.0, budget, [](const PolicyEvaluation& e) { return e.risk.mean; },
        [](const DeterministicPolicy&) { return false; });
}

} // namespace lrcvar
