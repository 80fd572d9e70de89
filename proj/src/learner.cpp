#include "lrcvar/learner.hpp"

#include <string>

namespace lrcvar {

namespace {

void require(bool ok, const std::string& what)
{
    if (!ok)
        throw InvalidArgument("schedule: " + what);
}

constexpr double kInfeasibleQ = std::numeric_limits<double>::infinity();

} // namespace

SchedulePack::SchedulePack(const ScheduleParams& p, int n_actions) : params_(p)
{
    require(p.alpha_c > 0.0, "alpha_c must be positive");
    require(p.alpha_exp > 0.5 && p.alpha_exp <= 1.0, "alpha_exp must lie in (0.5, 1]");
    require(p.beta_exp > 0.5 && p.beta_exp <= 1.0, "beta_exp must lie in (0.5, 1]");
    require(p.gamma_c >= 0.0 && p.gamma_c <= 1.0, "gamma_c must lie in [0, 1] (0 freezes the policy)");
    require(p.gamma_exp > 0.5 && p.gamma_exp < 1.0, "gamma_exp must lie in (0.5, 1)");
    require(p.eps_c > 0.0, "eps_c must be positive");
    require(p.eps_exp > 0.0 && p.eps_exp < 1.0, "eps_exp must lie in (0, 1)");
    require(p.gamma_exp > p.alpha_exp, "gamma_exp must exceed alpha_exp (policy slower than VaR tracking)");
    require(p.eps_exp > p.gamma_exp, "eps_exp must exceed gamma_exp (exploration vanishes faster than policy steps)");
    require(static_cast<double>(n_actions) * p.eps_c <= 1.0 + 1e-12, "n_actions * eps_c must not exceed 1");
}

std::string_view to_string(Algorithm algorithm)
{
    switch (algorithm) {
    case Algorithm::CRL:
        return "CRL";
    case Algorithm::MCRL:
        return "MCRL";
    case Algorithm::MRL:
        return "MRL";
    }
    return "?";
}

Algorithm parse_algorithm(std::string_view name)
{
    if (name == "CRL" || name == "crl")
        return Algorithm::CRL;
    if (name == "MCRL" || name == "mcrl" || name == "M-CRL")
        return Algorithm::MCRL;
    if (name == "MRL" || name == "mrl")
        return Algorithm::MRL;
    throw InvalidArgument("unknown algorithm '" + std::string(name) + "' (expected CRL, MCRL or MRL)");
}

double q_step(LearnerState& state, const FeasibilityMask& feasible, const LearnerConfig& config, int s, int a,
              double cost_sample, int next_state, double beta)
{
    if (!feasible(s, a))
        throw InvalidArgument("q_step at an infeasible pair");
    const double next_min = feasible_min(state.q.row(next_state), feasible.row(next_state));
    const double ref_min = feasible_min(state.q.row(config.reference_state), feasible.row(config.reference_state));
    const double target = q_target(config, state.v, cost_sample) + next_min - ref_min;
    double& entry = state.q(s, a);
    entry = (1.0 - beta) * entry + beta * target;
    return entry;
}

void policy_step(LearnerState& state, const FeasibilityMask& feasible, double gamma, double eps)
{
    const auto A = static_cast<std::size_t>(state.q.cols());
    std::vector<double> row(A);
    std::vector<double> scratch(A);
    Eigen::Array<bool, Eigen::Dynamic, 1> mask(static_cast<Eigen::Index>(A));
    for (Eigen::Index s = 0; s < state.q.rows(); ++s) {
        const int best = argmin_smallest_index(state.q.row(s), feasible.row(s));
        mask = feasible.row(s).transpose();
        for (std::size_t a = 0; a < A; ++a)
            row[a] = (1.0 - gamma) * state.d.probs(s, static_cast<Eigen::Index>(a)) + (static_cast<int>(a) == best ? gamma : 0.0);
        detail::project_truncated_simplex<double>(row, std::span<const bool>(mask.data(), A), eps, scratch);
        for (std::size_t a = 0; a < A; ++a)
            state.d.probs(s, static_cast<Eigen::Index>(a)) = row[a];
    }
}

double running_cvar_estimate(const LearnerState& state, const FeasibilityMask& feasible, const LearnerConfig& config)
{
    return feasible_min(state.q.row(config.reference_state), feasible.row(config.reference_state));
}

Learner::Learner(const MdpModel& model, LearnerConfig config, int initial_state)
    : model_(model), config_(std::move(config)), schedules_(config_.schedules, model.n_actions)
{
    require_valid(model_);
    if (!(config_.phi > 0.0 && config_.phi < 1.0))
        throw InvalidArgument("phi must lie in (0, 1)");
    if (!(config_.lambda >= 0.0))
        throw InvalidArgument("lambda must be nonnegative");
    if (config_.reference_state < 0 || config_.reference_state >= model_.n_states)
        throw InvalidArgument("reference state out of range");
    if (initial_state < 0 || initial_state >= model_.n_states)
        throw InvalidArgument("initial state out of range");
    if (config_.warmup_epochs < 0)
        throw InvalidArgument("warmup_epochs must be nonnegative");

    const int S = model_.n_states;
    const int A = model_.n_actions;
    state_.v = config_.v0;
    state_.q = config_.q0.value_or(Eigen::MatrixXd::Zero(S, A));
    if (state_.q.rows() != S || state_.q.cols() != A)
        throw InvalidArgument("initial Q table has the wrong shape");
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a)
            if (!model_.is_feasible(s, a))
                state_.q(s, a) = kInfeasibleQ;

    state_.d = config_.d0.value_or(uniform_policy(model_));
    validate_policy(model_, state_.d);
    if (!schedules_.frozen_policy()) {
        const double eps0 = schedules_.epsilon(0);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a)
                if (model_.is_feasible(s, a) && state_.d.probs(s, a) < eps0 - 1e-12)
                    throw InvalidArgument("initial policy lies outside the truncated simplex D_eps0");
    }
    state_.counts.setZero(S, A);
    state_.epoch = 0;
    state_.current_state = initial_state;

    mask_ = model_.feasible;
    row_.resize(static_cast<std::size_t>(A));
    scratch_.resize(static_cast<std::size_t>(A));
}

void Learner::project_policy(double gamma, double eps)
{
    const auto A = static_cast<std::size_t>(model_.n_actions);
    auto& d = state_.d.probs;
    for (int s = 0; s < model_.n_states; ++s) {
        const int best = argmin_smallest_index(state_.q.row(s), model_.feasible.row(s));
        for (std::size_t a = 0; a < A; ++a)
            row_[a] = (1.0 - gamma) * d(s, static_cast<Eigen::Index>(a)) + (static_cast<int>(a) == best ? gamma : 0.0);
        detail::project_truncated_simplex<double>(row_, std::span<const bool>(mask_.data() + s * A, A), eps, scratch_);
        for (std::size_t a = 0; a < A; ++a)
            d(s, static_cast<Eigen::Index>(a)) = row_[a];
    }
}

StepRecord Learner::step(RandomStream& rng)
{
    const std::int64_t n = state_.epoch;
    const int s = state_.current_state;

    int a;
    if (n < config_.warmup_epochs) {
        const int k = model_.feasible_count(s);
        int pick = std::min(k - 1, static_cast<int>(rng.uniform() * k));
        a = 0;
        for (int j = 0; j < model_.n_actions; ++j)
            if (model_.is_feasible(s, j) && pick-- == 0) {
                a = j;
                break;
            }
    } else {
        a = sample_action(state_.d, s, rng);
    }

    const Transition tr = sample_transition(model_, s, a, rng);

    const std::int64_t visits = ++state_.counts(s, a);
    q_step(state_, model_.feasible, config_, s, a, tr.cost, tr.next_state, schedules_.beta(visits));
    if (config_.mode != Algorithm::MRL)
        state_.v = var_step(state_.v, tr.cost, schedules_.alpha(n), config_.phi);
    if (!schedules_.frozen_policy())
        project_policy(schedules_.gamma(n), schedules_.epsilon(n));

    ++state_.epoch;
    state_.current_state = tr.next_state;
    return {n, s, a, tr.cost, tr.next_state, state_.v, running_cvar()};
}

} // namespace lrcvar
