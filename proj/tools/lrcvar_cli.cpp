// Command line front end: run experiments, print exact optima, certify a policy.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "lrcvar/error.hpp"
#include "lrcvar/harness.hpp"

namespace {

constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

lrcvar::json read_policy_argument(const std::string& arg)
{
    if (std::filesystem::exists(arg)) {
        std::ifstream in(arg);
        return lrcvar::json::parse(in);
    }
    return lrcvar::json::parse(arg);
}

int cmd_run(const std::string& config_path, const std::string& out, std::optional<std::uint64_t> seed,
            std::optional<int> reps, std::optional<int> threads)
{
    lrcvar::ExperimentConfig config = lrcvar::load_config(config_path);
    if (seed)
        config.base_seed = *seed;
    if (reps)
        config.replications = *reps;
    if (threads)
        config.threads = *threads;
    if (!out.empty())
        config.output_dir = out;
    lrcvar::validate(config);

    const auto report = lrcvar::run_experiment(config);
    lrcvar::write_outputs(report, config.output_dir);

    std::cout << "optimum " << lrcvar::policy_report(report.optimum.policy, report.optimum.evaluation).dump() << '\n';
    std::cout << "final cvar " << report.final_cvar.mean << " +/- " << report.final_cvar.stderr_ << '\n';
    std::cout << "locally optimal " << report.locally_optimal_count << '/' << report.replications.size() << '\n';
    for (const auto& [i, msg] : report.failures)
        std::cerr << "replication " << i << " failed: " << msg << '\n';
    std::cout << "outputs written to " << config.output_dir.string() << '\n';
    return report.replications.empty() ? kRuntimeError : 0;
}

int cmd_oracle(const std::string& config_path)
{
    const auto config = lrcvar::load_config(config_path);
    const auto model = lrcvar::build_model(config.env);
    const auto opt = lrcvar::global_optimum(model, config.phi, config.certificate_lambda(), lrcvar::kEnumerationBudget,
                                            config.reference_state);
    const auto cert = lrcvar::check_local_optimality(model, opt.policy, config.phi, config.certificate_lambda(),
                                                     lrcvar::kDefaultLocalTolerance, config.reference_state);
    const auto mean_opt = lrcvar::mean_optimum(model, config.phi);
    lrcvar::json out{{"global_optimum", lrcvar::policy_report(opt.policy, opt.evaluation, &cert)},
                     {"mean_optimum", lrcvar::policy_report(mean_opt.policy, mean_opt.evaluation)},
                     {"evaluated", opt.evaluated},
                     {"skipped_reducible", opt.skipped_reducible},
                     {"OPT", {{"var", opt.evaluation.risk.var}, {"cvar", opt.evaluation.risk.cvar},
                              {"mean", opt.evaluation.risk.mean}}}};
    std::cout << out.dump(2) << '\n';
    return 0;
}

int cmd_check(const std::string& config_path, const std::string& policy_arg)
{
    const auto config = lrcvar::load_config(config_path);
    const auto model = lrcvar::build_model(config.env);
    lrcvar::json pj;
    try {
        pj = read_policy_argument(policy_arg);
    } catch (const lrcvar::json::exception& e) {
        throw lrcvar::InvalidArgument(std::string("cannot parse policy: ") + e.what());
    }
    const auto policy = lrcvar::deterministic_policy_from_json(pj);
    lrcvar::validate_policy(model, policy);
    const auto cert = lrcvar::check_local_optimality(model, policy, config.phi, config.certificate_lambda(),
                                                     lrcvar::kDefaultLocalTolerance, config.reference_state);
    lrcvar::json out = lrcvar::policy_report(policy, cert.evaluation, &cert);
    lrcvar::json gaps = lrcvar::json::array();
    for (const auto& s : cert.states)
        gaps.push_back({{"state", s.state}, {"chosen", s.chosen}, {"best", s.best}, {"gap", s.gap}});
    out["states"] = gaps;
    std::cout << out.dump(2) << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Long-run CVaR tabular reinforcement learning"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> reps;
    std::optional<int> threads;
    std::string policy_arg;

    auto* run = app.add_subcommand("run", "Run independent learner replications and write metrics");
    run->add_option("--config", config_path, "Experiment config (JSON)")->required();
    run->add_option("--out", out_dir, "Output directory");
    run->add_option("--seed", seed, "Base seed");
    run->add_option("--reps", reps, "Number of replications");
    run->add_option("--threads", threads, "Worker threads (0: all cores)");

    auto* oracle = app.add_subcommand("oracle", "Print the exact optimum by enumeration");
    oracle->add_option("--config", config_path, "Experiment config (JSON)")->required();

    auto* check = app.add_subcommand("check", "Certify local optimality of a deterministic policy");
    check->add_option("--config", config_path, "Experiment config (JSON)")->required();
    check->add_option("--policy", policy_arg, "Action list as JSON, or a file holding it")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*run)
            return cmd_run(config_path, out_dir, seed, reps, threads);
        if (*oracle)
            return cmd_oracle(config_path);
        return cmd_check(config_path, policy_arg);
    } catch (const lrcvar::InvalidArgument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
}
