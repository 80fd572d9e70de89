#include "lrcvar/json_io.hpp"

#include <fstream>
#include <set>
#include <string>

#include "lrcvar/error.hpp"

namespace lrcvar {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

const json& field(const json& j, const char* key)
{
    if (!j.is_object() || !j.contains(key))
        throw InvalidArgument(std::string("missing field '") + key + "'");
    return j.at(key);
}

double number(const json& j, const char* key)
{
    const json& v = field(j, key);
    if (!v.is_number())
        throw InvalidArgument(std::string("field '") + key + "' must be a number");
    return v.get<double>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* where)
{
    const std::set<std::string> keys(known.begin(), known.end());
    for (const auto& [k, v] : j.items())
        if (!keys.contains(k))
            throw InvalidArgument(std::string("unknown key '") + k + "' in " + where);
}

} // namespace

json to_json(const CostDistribution& dist)
{
    return std::visit(overloaded{
                          [](const Gaussian& g) { return json{{"kind", "gaussian"}, {"mean", g.mean}, {"sd", g.sd}}; },
                          [](const StudentT& t) {
                              return json{{"kind", "student_t"}, {"location", t.location}, {"scale", t.scale}, {"dof", t.dof}};
                          },
                          [](const Discrete& d) { return json{{"kind", "discrete"}, {"values", d.values()}, {"probs", d.probs()}}; },
                      },
                      dist);
}

CostDistribution cost_from_json(const json& j)
{
    try {
        const auto kind = field(j, "kind").get<std::string>();
        CostDistribution out = Gaussian{0.0, 1.0};
        if (kind == "gaussian") {
            reject_unknown(j, {"kind", "mean", "sd"}, "gaussian cost");
            out = Gaussian{number(j, "mean"), number(j, "sd")};
        } else if (kind == "student_t") {
            reject_unknown(j, {"kind", "location", "scale", "dof"}, "student_t cost");
            out = StudentT{number(j, "location"), number(j, "scale"), number(j, "dof")};
        } else if (kind == "discrete") {
            reject_unknown(j, {"kind", "values", "probs"}, "discrete cost");
            out = Discrete(field(j, "values").get<std::vector<double>>(), field(j, "probs").get<std::vector<double>>());
        } else {
            throw InvalidArgument("unknown cost kind '" + kind + "'");
        }
        validate(out);
        return out;
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("malformed cost descriptor: ") + e.what());
    }
}

json to_json(const MdpModel& m)
{
    json feasible = json::array();
    json kernel = json::array();
    json costs = json::array();
    for (int s = 0; s < m.n_states; ++s) {
        json frow = json::array();
        json krow = json::array();
        for (int a = 0; a < m.n_actions; ++a) {
            frow.push_back(m.is_feasible(s, a) ? 1 : 0);
            std::vector<double> p(static_cast<std::size_t>(m.n_states));
            for (int t = 0; t < m.n_states; ++t)
                p[static_cast<std::size_t>(t)] = m.kernel(m.pair_index(s, a), t);
            krow.push_back(p);
            const auto& c = m.costs[static_cast<std::size_t>(m.pair_index(s, a))];
            costs.push_back(c ? to_json(*c) : json(nullptr));
        }
        feasible.push_back(frow);
        kernel.push_back(krow);
    }
    return {{"n_states", m.n_states}, {"n_actions", m.n_actions}, {"feasible", feasible}, {"kernel", kernel}, {"costs", costs}};
}

MdpModel model_from_json(const json& j)
{
    try {
        reject_unknown(j, {"n_states", "n_actions", "feasible", "kernel", "costs"}, "model");
        MdpModel m;
        m.n_states = field(j, "n_states").get<int>();
        m.n_actions = field(j, "n_actions").get<int>();
        if (m.n_states <= 0 || m.n_actions <= 0)
            throw InvalidArgument("n_states and n_actions must be positive");
        const int S = m.n_states;
        const int A = m.n_actions;
        const auto& feasible = field(j, "feasible");
        const auto& kernel = field(j, "kernel");
        const auto& costs = field(j, "costs");
        if (feasible.size() != static_cast<std::size_t>(S) || kernel.size() != static_cast<std::size_t>(S) ||
            costs.size() != static_cast<std::size_t>(S * A))
            throw InvalidArgument("model arrays do not match n_states / n_actions");
        m.feasible = FeasibilityMask::Constant(S, A, false);
        m.kernel = Eigen::MatrixXd::Zero(S * A, S);
        m.costs.resize(static_cast<std::size_t>(S * A));
        for (int s = 0; s < S; ++s) {
            const auto& frow = feasible.at(static_cast<std::size_t>(s));
            const auto& krow = kernel.at(static_cast<std::size_t>(s));
            if (frow.size() != static_cast<std::size_t>(A) || krow.size() != static_cast<std::size_t>(A))
                throw InvalidArgument("feasible/kernel row " + std::to_string(s) + " has the wrong length");
            for (int a = 0; a < A; ++a) {
                m.feasible(s, a) = frow.at(static_cast<std::size_t>(a)).get<int>() != 0;
                const auto p = krow.at(static_cast<std::size_t>(a)).get<std::vector<double>>();
                if (p.size() != static_cast<std::size_t>(S))
                    throw InvalidArgument("kernel entry has the wrong length");
                for (int t = 0; t < S; ++t)
                    m.kernel(m.pair_index(s, a), t) = p[static_cast<std::size_t>(t)];
                const auto& c = costs.at(static_cast<std::size_t>(m.pair_index(s, a)));
                if (!c.is_null())
                    m.costs[static_cast<std::size_t>(m.pair_index(s, a))] = cost_from_json(c);
            }
        }
        require_valid(m);
        return m;
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("malformed model: ") + e.what());
    }
}

MdpModel load_model(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw InvalidArgument("cannot open model file " + path.string());
    try {
        return model_from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw InvalidArgument("cannot parse model file " + path.string() + ": " + e.what());
    }
}

void save_model(const MdpModel& model, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw Error("cannot write model file " + path.string());
    out << to_json(model).dump(2) << '\n';
}

json to_json(const DeterministicPolicy& policy) { return policy.action; }

DeterministicPolicy deterministic_policy_from_json(const json& j)
{
    if (!j.is_array())
        throw InvalidArgument("a deterministic policy is a JSON array of action indices");
    try {
        return {j.get<std::vector<int>>()};
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("malformed policy: ") + e.what());
    }
}

json to_json(const RandomizedPolicy& policy)
{
    json rows = json::array();
    for (Eigen::Index s = 0; s < policy.probs.rows(); ++s) {
        std::vector<double> r(static_cast<std::size_t>(policy.probs.cols()));
        for (Eigen::Index a = 0; a < policy.probs.cols(); ++a)
            r[static_cast<std::size_t>(a)] = policy.probs(s, a);
        rows.push_back(r);
    }
    return rows;
}

json policy_report(const DeterministicPolicy& policy, const PolicyEvaluation& e, const LocalOptimalityReport* certificate)
{
    json j{{"policy", to_json(policy)},
           {"var", e.risk.var},
           {"cvar", e.risk.cvar},
           {"mean", e.risk.mean},
           {"objective", e.objective}};
    if (certificate)
        j["locally_optimal"] = certificate->locally_optimal;
    return j;
}

json to_json(const ScheduleParams& p)
{
    return {{"alpha_c", p.alpha_c},     {"alpha_exp", p.alpha_exp}, {"beta_exp", p.beta_exp}, {"gamma_c", p.gamma_c},
            {"gamma_exp", p.gamma_exp}, {"eps_c", p.eps_c},         {"eps_exp", p.eps_exp}};
}

ScheduleParams schedule_from_json(const json& j, ScheduleParams p)
{
    if (!j.is_object())
        throw InvalidArgument("schedule must be a JSON object");
    reject_unknown(j, {"alpha_c", "alpha_exp", "beta_exp", "gamma_c", "gamma_exp", "eps_c", "eps_exp"}, "schedule");
    auto opt = [&](const char* key, double& target) {
        if (j.contains(key))
            target = number(j, key);
    };
    opt("alpha_c", p.alpha_c);
    opt("alpha_exp", p.alpha_exp);
    opt("beta_exp", p.beta_exp);
    opt("gamma_c", p.gamma_c);
    opt("gamma_exp", p.gamma_exp);
    opt("eps_c", p.eps_c);
    opt("eps_exp", p.eps_exp);
    return p;
}

json to_json(const EnergyParams& p)
{
    auto pairs = [](const std::vector<std::pair<double, double>>& v) {
        json out = json::array();
        for (const auto& [value, prob] : v)
            out.push_back({{"value", value}, {"prob", prob}});
        return out;
    };
    return {{"charge_min", p.charge_min},
            {"charge_max", p.charge_max},
            {"storage_min", p.storage_min},
            {"storage_max", p.storage_max},
            {"price_buy", p.price_buy},
            {"price_sell", p.price_sell},
            {"utilization_cost", p.utilization_cost},
            {"holding_cost", p.holding_cost},
            {"storage_grid", p.storage_grid},
            {"action_grid", p.action_grid},
            {"generation", pairs(p.generation)},
            {"demand", pairs(p.demand)}};
}

EnergyParams energy_params_from_json(const json& j)
{
    EnergyParams p;
    if (j.is_null())
        return p;
    if (!j.is_object())
        throw InvalidArgument("energy params must be a JSON object");
    reject_unknown(j,
                   {"charge_min", "charge_max", "storage_min", "storage_max", "price_buy", "price_sell",
                    "utilization_cost", "holding_cost", "storage_grid", "action_grid", "generation", "demand"},
                   "energy params");
    try {
        auto opt = [&](const char* key, double& target) {
            if (j.contains(key))
                target = number(j, key);
        };
        opt("charge_min", p.charge_min);
        opt("charge_max", p.charge_max);
        opt("storage_min", p.storage_min);
        opt("storage_max", p.storage_max);
        opt("price_buy", p.price_buy);
        opt("price_sell", p.price_sell);
        opt("utilization_cost", p.utilization_cost);
        opt("holding_cost", p.holding_cost);
        if (j.contains("storage_grid"))
            p.storage_grid = j.at("storage_grid").get<std::vector<double>>();
        if (j.contains("action_grid"))
            p.action_grid = j.at("action_grid").get<std::vector<double>>();
        auto pairs = [](const json& arr) {
            std::vector<std::pair<double, double>> out;
            for (const auto& e : arr)
                out.emplace_back(number(e, "value"), number(e, "prob"));
            return out;
        };
        if (j.contains("generation"))
            p.generation = pairs(j.at("generation"));
        if (j.contains("demand"))
            p.demand = pairs(j.at("demand"));
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("malformed energy params: ") + e.what());
    }
    validate(p);
    return p;
}

} // namespace lrcvar
