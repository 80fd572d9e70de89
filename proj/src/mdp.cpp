#include "lrcvar/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lrcvar/error.hpp"

namespace lrcvar {

namespace {

constexpr double kRowSumTolerance = 1e-12;
constexpr double kPolicyTolerance = 1e-12;
constexpr double kStationaryResidual = 1e-10;

std::string pair_name(int s, int a)
{
    std::ostringstream os;
    os << "(s=" << s << ", a=" << a << ")";
    return os.str();
}

} // namespace

const CostDistribution& MdpModel::cost(int s, int a) const
{
    const auto& c = costs.at(static_cast<std::size_t>(pair_index(s, a)));
    if (!c)
        throw InvalidArgument("no cost distribution attached to " + pair_name(s, a));
    return *c;
}

std::vector<std::string> validate_model(const MdpModel& model)
{
    std::vector<std::string> out;
    const int S = model.n_states;
    const int A = model.n_actions;
    if (S <= 0 || A <= 0) {
        out.push_back("n_states and n_actions must be positive");
        return out;
    }
    if (model.feasible.rows() != S || model.feasible.cols() != A) {
        out.push_back("feasibility mask must be n_states x n_actions");
        return out;
    }
    if (model.kernel.rows() != S * A || model.kernel.cols() != S) {
        out.push_back("kernel must have n_states * n_actions rows and n_states columns");
        return out;
    }
    if (static_cast<int>(model.costs.size()) != S * A) {
        out.push_back("costs must have n_states * n_actions entries");
        return out;
    }
    for (int s = 0; s < S; ++s) {
        if (model.feasible_count(s) == 0)
            out.push_back("state " + std::to_string(s) + " has no feasible action");
        for (int a = 0; a < A; ++a) {
            if (!model.is_feasible(s, a))
                continue;
            const auto row = model.kernel_row(s, a);
            if (!row.allFinite() || (row.array() < 0.0).any())
                out.push_back("kernel row " + pair_name(s, a) + " has negative or non-finite entries");
            const double sum = row.sum();
            if (std::abs(sum - 1.0) > kRowSumTolerance)
                out.push_back("kernel row " + pair_name(s, a) + " sums to " + std::to_string(sum));
            const auto& c = model.costs[static_cast<std::size_t>(model.pair_index(s, a))];
            if (!c) {
                out.push_back("feasible pair " + pair_name(s, a) + " has no cost distribution");
            } else {
                try {
                    validate(*c);
                } catch (const InvalidArgument& e) {
                    out.push_back("cost at " + pair_name(s, a) + ": " + e.what());
                }
            }
        }
    }
    return out;
}

void require_valid(const MdpModel& model)
{
    const auto violations = validate_model(model);
    if (violations.empty())
        return;
    std::string msg = "invalid model:";
    for (const auto& v : violations)
        msg += "\n  " + v;
    throw InvalidArgument(msg);
}

std::vector<std::string> model_diagnostics(const MdpModel& model)
{
    std::vector<std::string> notes;
    for (int s = 0; s < model.n_states; ++s)
        for (int a = 0; a < model.n_actions; ++a)
            if (model.is_feasible(s, a) && is_discrete(model.cost(s, a))) {
                notes.push_back("cost distributions are discrete (no density); the VaR recursion is only "
                                "guaranteed to converge for absolutely continuous costs");
                return notes;
            }
    return notes;
}

void validate_policy(const MdpModel& model, const RandomizedPolicy& policy)
{
    const auto& d = policy.probs;
    if (d.rows() != model.n_states || d.cols() != model.n_actions)
        throw InvalidArgument("policy must be n_states x n_actions");
    for (int s = 0; s < model.n_states; ++s) {
        for (int a = 0; a < model.n_actions; ++a) {
            if (!(d(s, a) >= 0.0))
                throw InvalidArgument("policy has a negative probability at " + pair_name(s, a));
            if (!model.is_feasible(s, a) && d(s, a) != 0.0)
                throw InvalidArgument("policy puts mass on infeasible " + pair_name(s, a));
        }
        if (std::abs(d.row(s).sum() - 1.0) > kPolicyTolerance)
            throw InvalidArgument("policy row " + std::to_string(s) + " does not sum to 1");
    }
}

void validate_policy(const MdpModel& model, const DeterministicPolicy& policy)
{
    if (static_cast<int>(policy.action.size()) != model.n_states)
        throw InvalidArgument("deterministic policy must choose one action per state");
    for (int s = 0; s < model.n_states; ++s) {
        const int a = policy.action[static_cast<std::size_t>(s)];
        if (a < 0 || a >= model.n_actions || !model.is_feasible(s, a))
            throw InvalidArgument("deterministic policy chooses infeasible " + pair_name(s, a));
    }
}

RandomizedPolicy to_randomized(const MdpModel& model, const DeterministicPolicy& policy)
{
    validate_policy(model, policy);
    RandomizedPolicy d{Eigen::MatrixXd::Zero(model.n_states, model.n_actions)};
    for (int s = 0; s < model.n_states; ++s)
        d.probs(s, policy.action[static_cast<std::size_t>(s)]) = 1.0;
    return d;
}

RandomizedPolicy uniform_policy(const MdpModel& model)
{
    RandomizedPolicy d{model.feasible.cast<double>().matrix()};
    for (int s = 0; s < model.n_states; ++s)
        d.probs.row(s) /= d.probs.row(s).sum();
    return d;
}

DeterministicPolicy greedy(const RandomizedPolicy& policy)
{
    DeterministicPolicy out;
    out.action.resize(static_cast<std::size_t>(policy.probs.rows()));
    for (Eigen::Index s = 0; s < policy.probs.rows(); ++s) {
        Eigen::Index best = 0;
        for (Eigen::Index a = 1; a < policy.probs.cols(); ++a)
            if (policy.probs(s, a) > policy.probs(s, best))
                best = a;
        out.action[static_cast<std::size_t>(s)] = static_cast<int>(best);
    }
    return out;
}

int sample_action(const RandomizedPolicy& policy, int s, RandomStream& rng)
{
    if (s < 0 || s >= policy.probs.rows())
        throw InvalidArgument("sample_action: state index out of range");
    const auto row = policy.probs.row(s);
    const double u = rng.uniform();
    double cum = 0.0;
    int last_positive = -1;
    for (Eigen::Index a = 0; a < row.size(); ++a) {
        if (row(a) <= 0.0)
            continue;
        last_positive = static_cast<int>(a);
        cum += row(a);
        if (u < cum)
            return last_positive;
    }
    if (last_positive < 0)
        throw InvalidArgument("sample_action: policy row has no mass");
    return last_positive;
}

Transition sample_transition(const MdpModel& model, int s, int a, RandomStream& rng)
{
    if (s < 0 || s >= model.n_states || a < 0 || a >= model.n_actions || !model.is_feasible(s, a))
        throw InvalidArgument("sample_transition: infeasible " + pair_name(s, a));
    const auto row = model.kernel_row(s, a);
    const double u = rng.uniform();
    double cum = 0.0;
    int next = -1;
    for (int j = 0; j < model.n_states; ++j) {
        if (row(j) <= 0.0)
            continue;
        next = j;
        cum += row(j);
        if (u < cum)
            break;
    }
    return {next, sample(model.cost(s, a), rng)};
}

Eigen::MatrixXd induced_chain(const MdpModel& model, const RandomizedPolicy& policy)
{
    validate_policy(model, policy);
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(model.n_states, model.n_states);
    for (int s = 0; s < model.n_states; ++s)
        for (int a = 0; a < model.n_actions; ++a)
            if (policy.probs(s, a) > 0.0)
                P.row(s) += policy.probs(s, a) * model.kernel_row(s, a);
    return P;
}

std::vector<std::vector<int>> recurrent_classes(const Eigen::MatrixXd& chain)
{
    const auto n = static_cast<int>(chain.rows());
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> reach = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n, n, false);
    std::vector<int> stack;
    for (int i = 0; i < n; ++i) {
        reach(i, i) = true;
        stack.assign(1, i);
        while (!stack.empty()) {
            const int u = stack.back();
            stack.pop_back();
            for (int v = 0; v < n; ++v)
                if (chain(u, v) > 0.0 && !reach(i, v)) {
                    reach(i, v) = true;
                    stack.push_back(v);
                }
        }
    }
    std::vector<std::vector<int>> classes;
    std::vector<bool> assigned(static_cast<std::size_t>(n), false);
    for (int i = 0; i < n; ++i) {
        if (assigned[static_cast<std::size_t>(i)])
            continue;
        bool closed = true;
        std::vector<int> members;
        for (int j = 0; j < n; ++j) {
            if (!reach(i, j))
                continue;
            if (reach(j, i))
                members.push_back(j);
            else
                closed = false;
        }
        for (int j : members)
            assigned[static_cast<std::size_t>(j)] = true;
        if (closed)
            classes.push_back(std::move(members));
    }
    return classes;
}

Eigen::VectorXd stationary_state_distribution(const Eigen::MatrixXd& chain)
{
    const auto n = chain.rows();
    const auto classes = recurrent_classes(chain);
    if (classes.size() != 1)
        throw ReducibleChain("induced chain has " + std::to_string(classes.size()) +
                             " recurrent classes; the stationary law is not unique");

    Eigen::MatrixXd system(n + 1, n);
    system.topRows(n) = chain.transpose() - Eigen::MatrixXd::Identity(n, n);
    system.row(n).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
    rhs(n) = 1.0;
    Eigen::VectorXd mu = system.colPivHouseholderQr().solve(rhs);
    mu = mu.cwiseMax(0.0);
    mu /= mu.sum();

    const double residual = (chain.transpose() * mu - mu).lpNorm<Eigen::Infinity>();
    if (!(residual < kStationaryResidual))
        throw NumericalFailure("stationary solve residual " + std::to_string(residual) + " exceeds tolerance");
    return mu;
}

StateActionDist stationary_distribution(const MdpModel& model, const RandomizedPolicy& policy)
{
    const Eigen::VectorXd mu = stationary_state_distribution(induced_chain(model, policy));
    return {mu.asDiagonal() * policy.probs};
}

} // namespace lrcvar
