#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "lrcvar/error.hpp"
#include "lrcvar/mdp.hpp"
#include "lrcvar/random.hpp"

namespace lrcvar {

// ---------------------------------------------------------------------------
// Projection onto the truncated simplex {y : sum y = 1, y_i >= eps} and argmin
// ---------------------------------------------------------------------------

namespace detail {

/// Projects the entries of `x` selected by `feasible` onto {sum = 1, y >= eps}; zeroes the rest.
/// `scratch` must hold at least x.size() entries.
template <typename Scalar>
void project_truncated_simplex(std::span<Scalar> x, std::span<const bool> feasible, Scalar eps, std::span<Scalar> scratch)
{
    std::size_t k = 0;
    bool inside = true;
    Scalar sum = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!feasible[i]) {
            x[i] = 0;
            continue;
        }
        scratch[k++] = x[i] - eps;
        sum += x[i];
        if (x[i] < eps - Scalar(1e-12))
            inside = false;
    }
    if (k == 0)
        throw InvalidArgument("projection onto the simplex needs at least one feasible coordinate");
    const Scalar budget = Scalar(1) - static_cast<Scalar>(k) * eps;
    if (budget < Scalar(-1e-12))
        throw InvalidArgument("truncated simplex is empty: feasible count times eps exceeds 1");
    if (inside && std::abs(sum - Scalar(1)) <= Scalar(1e-12))
        return;
    if (budget <= 0) {
        for (std::size_t i = 0; i < x.size(); ++i)
            if (feasible[i])
                x[i] = eps;
        return;
    }

    // Sort-and-threshold projection of y = x - eps onto {sum y = budget, y >= 0}.
    auto head = scratch.first(k);
    std::sort(head.begin(), head.end(), std::greater<Scalar>());
    Scalar cumulative = 0;
    Scalar theta = 0;
    for (std::size_t j = 0; j < k; ++j) {
        cumulative += head[j];
        const Scalar candidate = (cumulative - budget) / static_cast<Scalar>(j + 1);
        if (head[j] - candidate > 0)
            theta = candidate;
    }
    for (std::size_t i = 0; i < x.size(); ++i)
        if (feasible[i])
            x[i] = std::max(x[i] - eps - theta, Scalar(0)) + eps;
}

} // namespace detail

/// Minimal-norm point of {y : sum over feasible y_i = 1, y_i >= eps on feasible, y_i = 0 elsewhere}.
template <typename Derived, typename MaskDerived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> project_to_constrained_simplex(
    const Eigen::MatrixBase<Derived>& x, typename Derived::Scalar eps, const Eigen::DenseBase<MaskDerived>& feasible)
{
    using Scalar = typename Derived::Scalar;
    if (x.size() != feasible.size())
        throw InvalidArgument("projection: vector and mask sizes differ");
    if (eps < 0)
        throw InvalidArgument("projection: eps must be nonnegative");
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out = x.reshaped();
    const Eigen::Array<bool, Eigen::Dynamic, 1> mask = feasible.reshaped();
    std::vector<Scalar> scratch(static_cast<std::size_t>(x.size()));
    detail::project_truncated_simplex<Scalar>(std::span<Scalar>(out.data(), static_cast<std::size_t>(out.size())),
                                              std::span<const bool>(mask.data(), static_cast<std::size_t>(mask.size())), eps,
                                              std::span<Scalar>(scratch));
    return out;
}

/// Smallest feasible index attaining the minimum of `values`.
template <typename Derived, typename MaskDerived>
int argmin_smallest_index(const Eigen::DenseBase<Derived>& values, const Eigen::DenseBase<MaskDerived>& feasible)
{
    int best = -1;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        if (!feasible.reshaped()(i))
            continue;
        if (best < 0 || values.reshaped()(i) < values.reshaped()(best))
            best = static_cast<int>(i);
    }
    if (best < 0)
        throw InvalidArgument("argmin over an empty feasible set");
    return best;
}

/// Minimum of `values` over feasible entries.
template <typename Derived, typename MaskDerived>
typename Derived::Scalar feasible_min(const Eigen::DenseBase<Derived>& values, const Eigen::DenseBase<MaskDerived>& feasible)
{
    return values.reshaped()(argmin_smallest_index(values, feasible));
}

// ---------------------------------------------------------------------------
// Schedules and configuration
// ---------------------------------------------------------------------------

/// alpha_n = alpha_c/(n+1)^alpha_exp, beta(k) = 1/(k+1)^beta_exp,
/// gamma_n = gamma_c/(n+1)^gamma_exp, eps_n = eps_c/(n+1)^eps_exp.
struct ScheduleParams {
    double alpha_c = 10.0;
    double alpha_exp = 0.9;
    double beta_exp = 0.8;
    double gamma_c = 1.0;
    double gamma_exp = 0.99;
    double eps_c = 0.5;
    double eps_exp = 0.999;
};

class SchedulePack {
public:
    /// Rejects parameter sets that break the step-size ordering or leave D_eps empty.
    SchedulePack(const ScheduleParams& params, int n_actions);

    double alpha(std::int64_t n) const { return params_.alpha_c / std::pow(double(n + 1), params_.alpha_exp); }
    double beta(std::int64_t visits) const { return 1.0 / std::pow(double(visits + 1), params_.beta_exp); }
    double gamma(std::int64_t n) const { return params_.gamma_c / std::pow(double(n + 1), params_.gamma_exp); }
    double epsilon(std::int64_t n) const { return params_.eps_c / std::pow(double(n + 1), params_.eps_exp); }

    /// gamma_c == 0: the policy is held at d_0 and never projected.
    bool frozen_policy() const { return params_.gamma_c == 0.0; }
    const ScheduleParams& params() const { return params_; }

private:
    ScheduleParams params_;
};

enum class Algorithm { CRL, MCRL, MRL };

std::string_view to_string(Algorithm algorithm);
Algorithm parse_algorithm(std::string_view name);

struct LearnerConfig {
    double phi = 0.9;
    double lambda = 0.0;
    Algorithm mode = Algorithm::CRL;
    int reference_state = 0;
    std::int64_t warmup_epochs = 0;
    ScheduleParams schedules{};
    double v0 = 0.0;
    std::optional<Eigen::MatrixXd> q0;
    std::optional<RandomizedPolicy> d0;
};

// ---------------------------------------------------------------------------
// Iterates and the individual recursions
// ---------------------------------------------------------------------------

struct LearnerState {
    double v = 0.0;
    Eigen::MatrixXd q;
    RandomizedPolicy d;
    Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> counts;
    std::int64_t epoch = 0;
    int current_state = 0;
};

struct StepRecord {
    std::int64_t epoch;
    int state;
    int action;
    double cost;
    int next_state;
    double v;
    double running_cvar;
};

/// v + alpha (phi - 1{cost <= v})
inline double var_step(double v, double cost_sample, double alpha, double phi)
{
    return v + alpha * (phi - (cost_sample <= v ? 1.0 : 0.0));
}

/// Per-mode one-step target before the relative-value correction.
inline double q_target(const LearnerConfig& config, double v, double cost_sample)
{
    switch (config.mode) {
    case Algorithm::CRL:
        return tilde_c_sample(v, cost_sample, config.phi);
    case Algorithm::MCRL:
        return tilde_c_sample(v, cost_sample, config.phi) + config.lambda * cost_sample;
    case Algorithm::MRL:
        return cost_sample;
    }
    return cost_sample;
}

/// Asynchronous relative Q update at the visited pair (s, a). Returns the new Q(s, a).
double q_step(LearnerState& state, const FeasibilityMask& feasible, const LearnerConfig& config, int s, int a,
              double cost_sample, int next_state, double beta);

/// d(s) <- Pi_eps[d(s) + gamma (onehot(argmin_a Q(s,a)) - d(s))] for every state.
void policy_step(LearnerState& state, const FeasibilityMask& feasible, double gamma, double eps);

/// min_a Q(s_ref, a), the learner's running estimate of the long-run criterion.
double running_cvar_estimate(const LearnerState& state, const FeasibilityMask& feasible, const LearnerConfig& config);

/// Single-trajectory learner. Owns its iterates; the model is borrowed and must outlive it.
class Learner {
public:
    Learner(const MdpModel& model, LearnerConfig config, int initial_state);

    StepRecord step(RandomStream& rng);

    const LearnerState& state() const { return state_; }
    const LearnerConfig& config() const { return config_; }
    const SchedulePack& schedules() const { return schedules_; }
    const MdpModel& model() const { return model_; }
    double running_cvar() const { return running_cvar_estimate(state_, model_.feasible, config_); }

private:
    void project_policy(double gamma, double eps);

    const MdpModel& model_;
    LearnerConfig config_;
    SchedulePack schedules_;
    LearnerState state_;
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> mask_;
    std::vector<double> row_;
    std::vector<double> scratch_;
};

} // namespace lrcvar
