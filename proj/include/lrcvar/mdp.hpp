#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lrcvar/random.hpp"
#include "lrcvar/risk.hpp"

namespace lrcvar {

using FeasibilityMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Finite MDP with per-state admissible actions and random per-(s,a) costs.
///
/// `kernel` stores p(s'|s,a) in row `s * n_actions + a`; rows of infeasible pairs are ignored.
/// `costs` is indexed the same way and holds no distribution for infeasible pairs.
struct MdpModel {
    int n_states = 0;
    int n_actions = 0;
    FeasibilityMask feasible;
    Eigen::MatrixXd kernel;
    std::vector<std::optional<CostDistribution>> costs;

    int pair_index(int s, int a) const { return s * n_actions + a; }
    bool is_feasible(int s, int a) const { return feasible(s, a); }
    int feasible_count(int s) const { return static_cast<int>(feasible.row(s).count()); }
    auto kernel_row(int s, int a) const { return kernel.row(pair_index(s, a)); }
    const CostDistribution& cost(int s, int a) const;
};

/// d(s) in the action simplex, zero on infeasible actions. Rows are states.
struct RandomizedPolicy {
    Eigen::MatrixXd probs;
};

struct DeterministicPolicy {
    std::vector<int> action;

    friend bool operator==(const DeterministicPolicy&, const DeterministicPolicy&) = default;
};

/// Stationary state-action occupancy pi(s,a). Rows are states.
struct StateActionDist {
    Eigen::MatrixXd weights;

    Eigen::VectorXd state_marginal() const { return weights.rowwise().sum(); }
};

struct Transition {
    int next_state;
    double cost;
};

/// Empty iff every structural invariant of the model holds.
std::vector<std::string> validate_model(const MdpModel& model);
/// Throws InvalidArgument listing the violations from validate_model.
void require_valid(const MdpModel& model);
/// Non-blocking notes, e.g. cost distributions without a density.
std::vector<std::string> model_diagnostics(const MdpModel& model);

void validate_policy(const MdpModel& model, const RandomizedPolicy& policy);
void validate_policy(const MdpModel& model, const DeterministicPolicy& policy);

RandomizedPolicy to_randomized(const MdpModel& model, const DeterministicPolicy& policy);
RandomizedPolicy uniform_policy(const MdpModel& model);
/// argmax_a d(s,a) per state, ties resolved by the smallest index.
DeterministicPolicy greedy(const RandomizedPolicy& policy);

int sample_action(const RandomizedPolicy& policy, int s, RandomStream& rng);
Transition sample_transition(const MdpModel& model, int s, int a, RandomStream& rng);

/// P_d(s'|s) = sum_a d(s,a) p(s'|s,a).
Eigen::MatrixXd induced_chain(const MdpModel& model, const RandomizedPolicy& policy);

/// Closed communicating classes of a row-stochastic matrix (support graph, p > 0).
std::vector<std::vector<int>> recurrent_classes(const Eigen::MatrixXd& chain);

/// Unique stationary law of a chain with a single recurrent class.
/// Solves [P^T - I; 1^T] mu = [0; 1] directly. Throws ReducibleChain otherwise.
Eigen::VectorXd stationary_state_distribution(const Eigen::MatrixXd& chain);

StateActionDist stationary_distribution(const MdpModel& model, const RandomizedPolicy& policy);

} // namespace lrcvar
