#include "lrcvar/envs.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lrcvar/error.hpp"

namespace lrcvar {

namespace machine_replacement {

const std::vector<std::vector<double>>& retain_table()
{
    static const std::vector<std::vector<double>> table{
        {0.496, 0.254, 0.131, 0.067, 0.034, 0.018},
        {0.000, 0.505, 0.259, 0.133, 0.068, 0.035},
        {0.000, 0.000, 0.523, 0.268, 0.138, 0.071},
        {0.000, 0.000, 0.000, 0.563, 0.289, 0.148},
        {0.000, 0.000, 0.000, 0.000, 0.661, 0.339},
    };
    return table;
}

const std::vector<double>& replace_row()
{
    static const std::vector<double> row{0.496, 0.254, 0.131, 0.067, 0.034, 0.018};
    return row;
}

double mean_cost(int s, int a)
{
    if (a == kReplace)
        return 15.0;
    return 3.0 * s;
}

} // namespace machine_replacement

namespace {

constexpr double kGridTolerance = 1e-9;

Eigen::RowVectorXd normalized(const std::vector<double>& row)
{
    Eigen::RowVectorXd out = Eigen::Map<const Eigen::RowVectorXd>(row.data(), static_cast<Eigen::Index>(row.size()));
    return out / out.sum();
}

double snap(double x) { return std::round(x * 1e9) / 1e9; }

} // namespace

MdpModel build_machine_replacement(const MachineReplacementParams& params)
{
    namespace mr = machine_replacement;
    constexpr int S = 6;
    constexpr int A = 2;
    MdpModel m;
    m.n_states = S;
    m.n_actions = A;
    m.feasible = FeasibilityMask::Constant(S, A, true);
    m.feasible(S - 1, mr::kRetain) = false;
    m.kernel = Eigen::MatrixXd::Zero(S * A, S);
    m.costs.resize(S * A);
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            if (!m.is_feasible(s, a))
                continue;
            m.kernel.row(m.pair_index(s, a)) =
                normalized(a == mr::kRetain ? mr::retain_table()[static_cast<std::size_t>(s)] : mr::replace_row());
            const double mean = mr::mean_cost(s, a);
            if (params.family == CostFamily::Gaussian)
                m.costs[static_cast<std::size_t>(m.pair_index(s, a))] = Gaussian{mean, params.gaussian_sd};
            else
                m.costs[static_cast<std::size_t>(m.pair_index(s, a))] = StudentT{mean, params.t_scale, params.t_dof};
        }
    }
    require_valid(m);
    return m;
}

MdpModel build_machine_replacement(CostFamily family)
{
    MachineReplacementParams p;
    p.family = family;
    return build_machine_replacement(p);
}

void validate(const EnergyParams& p)
{
    auto sorted_strict = [](const std::vector<double>& v) { return !v.empty() && std::adjacent_find(v.begin(), v.end(), std::greater_equal<>()) == v.end(); };
    if (!sorted_strict(p.storage_grid) || !sorted_strict(p.action_grid))
        throw InvalidArgument("energy grids must be nonempty and strictly increasing");
    for (double b : p.storage_grid)
        if (b < p.storage_min - kGridTolerance || b > p.storage_max + kGridTolerance)
            throw InvalidArgument("storage grid value outside [B_min, B_max]");
    auto check_dist = [](const std::vector<std::pair<double, double>>& dist, const char* name) {
        double total = 0.0;
        for (const auto& [value, prob] : dist) {
            if (!std::isfinite(value) || !(prob >= 0.0))
                throw InvalidArgument(std::string(name) + " distribution has an invalid atom");
            total += prob;
        }
        if (dist.empty() || std::abs(total - 1.0) > 1e-12)
            throw InvalidArgument(std::string(name) + " probabilities must sum to 1");
    };
    check_dist(p.generation, "generation");
    check_dist(p.demand, "demand");
}

bool energy_action_feasible(const EnergyParams& p, double storage, double action)
{
    return action >= -p.charge_min - kGridTolerance && action <= p.charge_max + kGridTolerance &&
           action >= storage - p.storage_max - kGridTolerance && action <= storage - p.storage_min + kGridTolerance;
}

std::vector<std::pair<double, double>> energy_cost_atoms(const EnergyParams& p, double storage, double action)
{
    std::vector<std::pair<double, double>> atoms;
    atoms.reserve(p.generation.size() * p.demand.size());
    for (const auto& [g, pg] : p.generation) {
        for (const auto& [dem, pd] : p.demand) {
            const double w = dem - g - action;
            const double shortage = std::max(w, 0.0);
            const double surplus = -std::min(w, 0.0);
            const double cost = p.price_buy * shortage - p.price_sell * surplus + p.utilization_cost * action +
                                p.holding_cost * (storage - action);
            // Decimal grid arithmetic leaves ~1e-16 noise; snapping lets equal costs merge.
            atoms.emplace_back(snap(cost), pg * pd);
        }
    }
    return atoms;
}

MdpModel build_energy_storage(const EnergyParams& p)
{
    validate(p);
    const int S = static_cast<int>(p.storage_grid.size());
    const int A = static_cast<int>(p.action_grid.size());
    MdpModel m;
    m.n_states = S;
    m.n_actions = A;
    m.feasible = FeasibilityMask::Constant(S, A, false);
    m.kernel = Eigen::MatrixXd::Zero(S * A, S);
    m.costs.resize(static_cast<std::size_t>(S * A));
    for (int s = 0; s < S; ++s) {
        const double b = p.storage_grid[static_cast<std::size_t>(s)];
        for (int a = 0; a < A; ++a) {
            const double x = p.action_grid[static_cast<std::size_t>(a)];
            if (!energy_action_feasible(p, b, x))
                continue;
            const double next = b - x;
            const auto it = std::find_if(p.storage_grid.begin(), p.storage_grid.end(),
                                         [next](double g) { return std::abs(g - next) <= kGridTolerance; });
            if (it == p.storage_grid.end())
                throw InvalidArgument("energy model: storage level " + std::to_string(next) + " is off the grid");
            m.feasible(s, a) = true;
            m.kernel(m.pair_index(s, a), static_cast<Eigen::Index>(it - p.storage_grid.begin())) = 1.0;

            std::vector<double> values;
            std::vector<double> probs;
            for (const auto& [c, pr] : energy_cost_atoms(p, b, x)) {
                values.push_back(c);
                probs.push_back(pr);
            }
            m.costs[static_cast<std::size_t>(m.pair_index(s, a))] = Discrete(std::move(values), std::move(probs));
        }
    }
    require_valid(m);
    return m;
}

} // namespace lrcvar
