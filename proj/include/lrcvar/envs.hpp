#pragma once

#include <utility>
#include <vector>

#include "lrcvar/mdp.hpp"

namespace lrcvar {

enum class CostFamily { Gaussian, StudentT };

/// Machine replacement benchmark: 6 wear levels, action 0 = retain, 1 = replace.
/// Retaining is infeasible in the most worn state.
struct MachineReplacementParams {
    CostFamily family = CostFamily::Gaussian;
    double gaussian_sd = 0.5;
    double t_scale = 1.0;
    double t_dof = 5.0;
};

MdpModel build_machine_replacement(const MachineReplacementParams& params = {});
MdpModel build_machine_replacement(CostFamily family);

namespace machine_replacement {

inline constexpr int kRetain = 0;
inline constexpr int kReplace = 1;

/// Published retain-kernel rows for states 0..4, before renormalization.
const std::vector<std::vector<double>>& retain_table();
/// Published replace row, identical for every state.
const std::vector<double>& replace_row();
/// Mean cost per (state, action).
double mean_cost(int s, int a);

} // namespace machine_replacement

/// Battery-storage scheduling benchmark. State = storage level, action = power a with B' = B - a.
struct EnergyParams {
    double charge_min = 2.4;  ///< C_min: a >= -C_min
    double charge_max = 1.2;  ///< C_max: a <= C_max
    double storage_min = 0.4; ///< B_min
    double storage_max = 3.4; ///< B_max
    double price_buy = 3.0;
    double price_sell = 1.5;
    double utilization_cost = 4.0;
    double holding_cost = 2.0;
    std::vector<double> storage_grid{0.4, 1.0, 1.6, 2.2, 2.8, 3.4};
    std::vector<double> action_grid{-2.4, -1.2, 0.6, 1.2};
    std::vector<std::pair<double, double>> generation{{0.0, 0.10}, {0.6, 0.30}, {1.2, 0.20},
                                                      {1.8, 0.10}, {2.4, 0.15}, {3.0, 0.15}};
    std::vector<std::pair<double, double>> demand{{0.6, 0.05}, {1.2, 0.25}, {1.8, 0.15},
                                                  {2.4, 0.25}, {3.0, 0.20}, {3.6, 0.10}};
};

void validate(const EnergyParams& params);

bool energy_action_feasible(const EnergyParams& params, double storage, double action);

/// One (cost, probability) atom per (generation, demand) outcome, unmerged.
std::vector<std::pair<double, double>> energy_cost_atoms(const EnergyParams& params, double storage, double action);

MdpModel build_energy_storage(const EnergyParams& params = {});

} // namespace lrcvar
