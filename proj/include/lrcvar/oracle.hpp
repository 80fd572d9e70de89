#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "lrcvar/mdp.hpp"
#include "lrcvar/risk.hpp"

namespace lrcvar {

/// Exact steady-state risk of a stationary policy.
struct PolicyEvaluation {
    RandomizedPolicy policy;
    StateActionDist occupancy;
    RiskTriple risk;
    double objective = 0.0; ///< cvar + lambda * mean
};

/// Bias function of the Poisson equation with per-stage cost tilde-c(VaR^d) + lambda * mean,
/// normalized so that values(reference_state) == 0.
struct ValueFunction {
    Eigen::VectorXd values;
    double gain = 0.0;
    int reference_state = 0;
};

struct StateOptimality {
    int state;
    int chosen;
    int best;
    double gap; ///< Q(s, chosen) - min_a Q(s, a) >= 0
};

struct LocalOptimalityReport {
    bool locally_optimal = false;
    std::vector<StateOptimality> states;
    PolicyEvaluation evaluation;
    ValueFunction value;
    Eigen::MatrixXd q; ///< Q^d, +inf on infeasible pairs

    std::vector<int> violating_states(double tol) const;
};

struct OptimumResult {
    DeterministicPolicy policy;
    PolicyEvaluation evaluation;
    std::uint64_t evaluated = 0;
    std::uint64_t skipped_reducible = 0;
};

inline constexpr double kDefaultLocalTolerance = 1e-6;
inline constexpr std::uint64_t kEnumerationBudget = 10'000'000;

std::vector<MixtureComponent> occupancy_mixture(const MdpModel& model, const StateActionDist& occupancy);

PolicyEvaluation evaluate_policy(const MdpModel& model, const RandomizedPolicy& policy, double phi, double lambda = 0.0);
PolicyEvaluation evaluate_policy(const MdpModel& model, const DeterministicPolicy& policy, double phi, double lambda = 0.0);

/// prod_s |feasible(s)|, saturating at UINT64_MAX.
std::uint64_t count_deterministic_policies(const MdpModel& model);

/// Lexicographic enumeration of deterministic policies (last state varies fastest).
class DeterministicPolicyRange {
public:
    explicit DeterministicPolicyRange(const MdpModel& model);

    class iterator {
    public:
        using value_type = DeterministicPolicy;
        using difference_type = std::ptrdiff_t;

        iterator() = default;
        const DeterministicPolicy& operator*() const { return current_; }
        const DeterministicPolicy* operator->() const { return &current_; }
        iterator& operator++();
        void operator++(int) { ++*this; }
        bool operator==(const iterator& other) const { return done_ == other.done_ && (done_ || current_ == other.current_); }

    private:
        friend class DeterministicPolicyRange;
        const std::vector<std::vector<int>>* choices_ = nullptr;
        std::vector<std::size_t> cursor_;
        DeterministicPolicy current_;
        bool done_ = true;
    };

    iterator begin() const;
    iterator end() const { return {}; }

private:
    std::vector<std::vector<int>> choices_;
};

DeterministicPolicyRange enumerate_deterministic_policies(const MdpModel& model);

ValueFunction relative_value_function(const MdpModel& model, const RandomizedPolicy& policy, double phi,
                                      double lambda = 0.0, int reference_state = 0);

/// Q^d(s,a) = tilde-c(VaR^d; s, a) + lambda E[C(s,a)] + sum_s' p(s'|s,a) V^d(s').
Eigen::MatrixXd policy_q_values(const MdpModel& model, const PolicyEvaluation& evaluation, const ValueFunction& value,
                                double phi, double lambda = 0.0);

/// True iff Q^d(s, policy(s)) <= min_a Q^d(s, a) + tol in every state.
LocalOptimalityReport check_local_optimality(const MdpModel& model, const DeterministicPolicy& policy, double phi,
                                             double lambda = 0.0, double tol = kDefaultLocalTolerance,
                                             int reference_state = 0);

/// Exhaustive minimization of cvar + lambda * mean over deterministic policies with a unique
/// stationary law. Objectives within 1e-9 of each other count as ties; among ties a policy that
/// passes check_local_optimality is preferred, then the lexicographically first.
OptimumResult global_optimum(const MdpModel& model, double phi, double lambda = 0.0,
                             std::uint64_t budget = kEnumerationBudget, int reference_state = 0);

/// Same search with the long-run mean as the only objective.
OptimumResult mean_optimum(const MdpModel& model, double phi, std::uint64_t budget = kEnumerationBudget);

} // namespace lrcvar
