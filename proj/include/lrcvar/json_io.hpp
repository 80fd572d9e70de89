#pragma once

#include <filesystem>

#include <json.hpp>

#include "lrcvar/envs.hpp"
#include "lrcvar/learner.hpp"
#include "lrcvar/mdp.hpp"
#include "lrcvar/oracle.hpp"
#include "lrcvar/risk.hpp"

namespace lrcvar {

using json = nlohmann::json;

// Cost descriptors: {"kind":"gaussian","mean","sd"} | {"kind":"student_t","location","scale","dof"}
// | {"kind":"discrete","values":[...],"probs":[...]}
json to_json(const CostDistribution& dist);
CostDistribution cost_from_json(const json& j);

// {"n_states","n_actions","feasible":[[0/1]],"kernel":[[[p]]] indexed [s][a][s'],"costs":[descriptor|null]}
// with costs flattened row-major over (s, a).
json to_json(const MdpModel& model);
MdpModel model_from_json(const json& j);
MdpModel load_model(const std::filesystem::path& path);
void save_model(const MdpModel& model, const std::filesystem::path& path);

json to_json(const DeterministicPolicy& policy);
DeterministicPolicy deterministic_policy_from_json(const json& j);
json to_json(const RandomizedPolicy& policy);

/// {"policy","var","cvar","mean","objective"} plus "locally_optimal" when a report is given.
json policy_report(const DeterministicPolicy& policy, const PolicyEvaluation& evaluation,
                   const LocalOptimalityReport* certificate = nullptr);

json to_json(const ScheduleParams& params);
ScheduleParams schedule_from_json(const json& j, ScheduleParams defaults);
json to_json(const EnergyParams& params);
EnergyParams energy_params_from_json(const json& j);

} // namespace lrcvar
