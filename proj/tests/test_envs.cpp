#include <doctest.h>

#include <cmath>
#include <numeric>

#include "lrcvar/envs.hpp"
#include "lrcvar/error.hpp"
#include "lrcvar/json_io.hpp"

using namespace lrcvar;
namespace mr = lrcvar::machine_replacement;

TEST_CASE("machine replacement model")
{
    const auto m = build_machine_replacement(CostFamily::Gaussian);
    CHECK(m.n_states == 6);
    CHECK(m.n_actions == 2);
    const double row3[] = {0, 0, 0.523, 0.268, 0.138, 0.071};
    for (int t = 0; t < 6; ++t)
        CHECK(std::abs(m.kernel(m.pair_index(2, mr::kRetain), t) - row3[t]) < 1e-12);
    CHECK(mr::mean_cost(3, mr::kRetain) == 9.0);
    for (int s = 0; s < 6; ++s) {
        CHECK(mr::mean_cost(s, mr::kReplace) == 15.0);
        CHECK(dist_mean(m.cost(s, mr::kReplace)) == 15.0);
        CHECK(m.is_feasible(s, mr::kReplace));
    }
    CHECK_FALSE(m.is_feasible(5, mr::kRetain));
    CHECK(m.feasible_count(5) == 1);
    CHECK(dist_mean(m.cost(3, mr::kRetain)) == 9.0);
    CHECK(std::get<Gaussian>(m.cost(0, 0)).sd == 0.5);

    SUBCASE("published rows sum to one within rounding, built rows exactly")
    {
        for (const auto& row : mr::retain_table())
            CHECK(std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0) <= 1e-3 + 1e-12);
        for (int s = 0; s < 6; ++s)
            for (int a = 0; a < 2; ++a)
                if (m.is_feasible(s, a)) {
                    CHECK(std::abs(m.kernel_row(s, a).sum() - 1.0) < 1e-12);
                    CHECK(m.kernel_row(s, a).minCoeff() >= 0.0);
                    const auto& pub = a == mr::kRetain ? mr::retain_table()[static_cast<std::size_t>(s)] : mr::replace_row();
                    for (int t = 0; t < 6; ++t)
                        CHECK(std::abs(m.kernel(m.pair_index(s, a), t) - pub[static_cast<std::size_t>(t)]) < 1e-3);
                }
    }
    SUBCASE("Student-t family")
    {
        const auto t = build_machine_replacement(CostFamily::StudentT);
        const auto& c = std::get<StudentT>(t.cost(4, mr::kRetain));
        CHECK(c.location == 12.0);
        CHECK(c.dof == 5.0);
        CHECK(c.scale == 1.0);
        MachineReplacementParams p;
        p.family = CostFamily::StudentT;
        p.t_scale = 0.5;
        CHECK(std::get<StudentT>(build_machine_replacement(p).cost(0, 0)).scale == 0.5);
    }
    SUBCASE("rebuilding is bit-identical")
    {
        const auto a = build_machine_replacement(CostFamily::StudentT);
        const auto b = build_machine_replacement(CostFamily::StudentT);
        CHECK((a.kernel.array() == b.kernel.array()).all());
        CHECK(to_json(a).dump() == to_json(b).dump());
    }
}

TEST_CASE("energy storage model")
{
    const EnergyParams p;
    CHECK(p.charge_min == 2.4);
    CHECK(p.charge_max == 1.2);
    CHECK(p.storage_min == 0.4);
    CHECK(p.storage_max == 3.4);
    CHECK(p.price_buy == 3.0);
    CHECK(p.price_sell == 1.5);
    CHECK(p.utilization_cost == 4.0);
    CHECK(p.holding_cost == 2.0);

    const auto m = build_energy_storage(p);
    CHECK(m.n_states == 6);
    CHECK(m.n_actions == 4);
    CHECK(m.feasible(0, 0));
    CHECK(m.feasible(0, 1));
    CHECK_FALSE(m.feasible(0, 2));
    CHECK_FALSE(m.feasible(0, 3));
    CHECK_FALSE(energy_action_feasible(p, 0.4, 0.6));
    CHECK(energy_action_feasible(p, 0.4, -2.4));

    SUBCASE("cost atoms")
    {
        const auto atoms = energy_cost_atoms(p, 1.0, 0.6);
        CHECK(atoms.size() == 36);
        bool found = false;
        double total = 0.0;
        for (const auto& [c, w] : atoms) {
            total += w;
            if (std::abs(c - 3.2) < 1e-9 && std::abs(w - 0.075) < 1e-12)
                found = true;
        }
        CHECK(found);
        CHECK(std::abs(total - 1.0) < 1e-12);
    }
    SUBCASE("dynamics land on the grid and costs follow the formula")
    {
        for (int s = 0; s < m.n_states; ++s)
            for (int a = 0; a < m.n_actions; ++a) {
                if (!m.is_feasible(s, a))
                    continue;
                const double b = p.storage_grid[static_cast<std::size_t>(s)];
                const double act = p.action_grid[static_cast<std::size_t>(a)];
                int target = -1;
                for (int t = 0; t < m.n_states; ++t)
                    if (std::abs(p.storage_grid[static_cast<std::size_t>(t)] - (b - act)) < 1e-9)
                        target = t;
                REQUIRE(target >= 0);
                CHECK(m.kernel(m.pair_index(s, a), target) == 1.0);
                CHECK(energy_cost_atoms(p, b, act).size() == 36);
                // mean by direct enumeration of the (G, D) grid
                double mean = 0.0;
                for (const auto& [g, pg] : p.generation)
                    for (const auto& [dd, pd] : p.demand) {
                        const double w = dd - g - act;
                        mean += pg * pd *
                                (p.price_buy * std::max(w, 0.0) - p.price_sell * (-std::min(w, 0.0)) +
                                 p.utilization_cost * act + p.holding_cost * (b - act));
                    }
                CHECK(std::abs(dist_mean(m.cost(s, a)) - mean) < 1e-8);
            }
    }
    SUBCASE("bad parameters are rejected")
    {
        EnergyParams bad = p;
        bad.storage_grid = {1.0, 0.4};
        CHECK_THROWS_AS(validate(bad), InvalidArgument);
        bad = p;
        bad.demand[0].second = 0.5;
        CHECK_THROWS_AS(validate(bad), InvalidArgument);
        bad = p;
        bad.action_grid = {-2.4, 0.5};
        CHECK_THROWS_AS(build_energy_storage(bad), InvalidArgument);
    }
    SUBCASE("rebuild and JSON round trip")
    {
        const auto j = to_json(m);
        CHECK(to_json(build_energy_storage(p)).dump() == j.dump());
        const auto back = model_from_json(j);
        CHECK(to_json(back).dump() == j.dump());
        CHECK(to_json(energy_params_from_json(to_json(p))).dump() == to_json(p).dump());
    }
}

TEST_CASE("model JSON")
{
    const auto m = build_machine_replacement(CostFamily::StudentT);
    const auto j = to_json(m);
    CHECK(j.at("kernel").size() == 6);
    CHECK(j.at("kernel")[0].size() == 2);
    CHECK(j.at("costs")[m.pair_index(5, 0)].is_null());
    CHECK(j.at("costs")[0].at("kind") == "student_t");
    const auto back = model_from_json(j);
    CHECK((back.kernel.array() == m.kernel.array()).all());
    CHECK(to_json(back).dump() == j.dump());

    json bad = j;
    bad["extra"] = 1;
    CHECK_THROWS_AS(model_from_json(bad), InvalidArgument);
    bad = j;
    bad["kernel"][0][0][0] = 0.9;
    CHECK_THROWS_AS(model_from_json(bad), InvalidArgument);
    CHECK_THROWS_AS(cost_from_json(json{{"kind", "gaussian"}, {"mean", 1}}), InvalidArgument);
    CHECK_THROWS_AS(cost_from_json(json{{"kind", "cauchy"}}), InvalidArgument);
    const auto d = cost_from_json(json{{"kind", "discrete"}, {"values", {1, 3}}, {"probs", {0.5, 0.5}}});
    CHECK(dist_mean(d) == doctest::Approx(2.0));
}
