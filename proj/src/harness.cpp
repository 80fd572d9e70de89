#include "lrcvar/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "lrcvar/error.hpp"

namespace lrcvar {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void reject_unknown(const json& j, const std::set<std::string>& known, const char* where)
{
    for (const auto& [k, v] : j.items())
        if (!known.contains(k))
            throw InvalidArgument("unknown key '" + k + "' in " + where);
}

std::string format_double(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string policy_string(const DeterministicPolicy& p)
{
    std::string out;
    for (std::size_t i = 0; i < p.action.size(); ++i) {
        if (i)
            out += '-';
        out += std::to_string(p.action[i]);
    }
    return out;
}

MeanWithError mean_with_error(const std::vector<double>& xs)
{
    MeanWithError out;
    if (xs.empty()) {
        out.mean = kNaN;
        out.stderr_ = kNaN;
        return out;
    }
    double sum = 0.0;
    for (double x : xs)
        sum += x;
    out.mean = sum / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs)
            ss += (x - out.mean) * (x - out.mean);
        out.stderr_ = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
    }
    return out;
}

const char* env_kind_name(EnvSpec::Kind kind)
{
    switch (kind) {
    case EnvSpec::Kind::MachineReplacement:
        return "machine_replacement";
    case EnvSpec::Kind::EnergyStorage:
        return "energy_storage";
    case EnvSpec::Kind::ModelFile:
        return "model_file";
    }
    return "?";
}

} // namespace

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

ExperimentConfig config_from_json(const json& j)
{
    if (!j.is_object())
        throw InvalidArgument("config must be a JSON object");
    reject_unknown(j,
                   {"env", "algorithm", "lambda", "phi", "total_epochs", "warmup_epochs", "replications", "base_seed",
                    "schedule", "reference_state", "initial_state", "initial_policy", "checkpoints", "rate_window",
                    "output_dir", "threads"},
                   "config");
    ExperimentConfig c;
    try {
        const json env = j.value("env", json::object());
        if (!env.is_object())
            throw InvalidArgument("env must be a JSON object");
        const auto kind = env.value("kind", std::string("machine_replacement"));
        if (kind == "machine_replacement") {
            reject_unknown(env, {"kind", "cost_family", "gaussian_sd", "t_scale", "t_dof"}, "env");
            c.env.kind = EnvSpec::Kind::MachineReplacement;
            const auto family = env.value("cost_family", std::string("gaussian"));
            if (family == "gaussian")
                c.env.machine.family = CostFamily::Gaussian;
            else if (family == "student_t")
                c.env.machine.family = CostFamily::StudentT;
            else
                throw InvalidArgument("unknown cost_family '" + family + "'");
            c.env.machine.gaussian_sd = env.value("gaussian_sd", c.env.machine.gaussian_sd);
            c.env.machine.t_scale = env.value("t_scale", c.env.machine.t_scale);
            c.env.machine.t_dof = env.value("t_dof", c.env.machine.t_dof);
        } else if (kind == "energy_storage") {
            reject_unknown(env, {"kind", "params"}, "env");
            c.env.kind = EnvSpec::Kind::EnergyStorage;
            c.env.energy = energy_params_from_json(env.value("params", json()));
            c.schedule.eps_c = 0.25;
            c.total_epochs = 600'000;
            c.warmup_epochs = 10'000;
        } else if (kind == "model_file") {
            reject_unknown(env, {"kind", "path"}, "env");
            c.env.kind = EnvSpec::Kind::ModelFile;
            c.env.model_path = env.at("path").get<std::string>();
        } else {
            throw InvalidArgument("unknown env kind '" + kind + "'");
        }

        if (j.contains("algorithm"))
            c.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
        c.lambda = j.value("lambda", c.algorithm == Algorithm::MCRL ? 0.3 : 0.0);
        c.phi = j.value("phi", c.phi);
        c.total_epochs = j.value("total_epochs", c.total_epochs);
        c.warmup_epochs = j.value("warmup_epochs", c.warmup_epochs);
        c.replications = j.value("replications", c.replications);
        c.base_seed = j.value("base_seed", c.base_seed);
        if (j.contains("schedule"))
            c.schedule = schedule_from_json(j.at("schedule"), c.schedule);
        c.reference_state = j.value("reference_state", c.reference_state);
        c.initial_state = j.value("initial_state", c.initial_state);
        if (j.contains("checkpoints")) {
            const auto& cp = j.at("checkpoints");
            if (cp.is_number_integer())
                c.checkpoint_count = cp.get<int>();
            else
                c.checkpoint_epochs = cp.get<std::vector<std::int64_t>>();
        }
        if (j.contains("rate_window")) {
            const auto w = j.at("rate_window").get<std::vector<std::int64_t>>();
            if (w.size() != 2)
                throw InvalidArgument("rate_window must be [first_epoch, last_epoch]");
            c.rate_window = {w[0], w[1]};
        }
        c.output_dir = j.value("output_dir", c.output_dir.string());
        c.threads = j.value("threads", c.threads);
        if (j.contains("initial_policy")) {
            // Deterministic action list; converted once the model is known.
            const auto det = deterministic_policy_from_json(j.at("initial_policy"));
            c.initial_policy = to_randomized(build_model(c.env), det);
        }
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("malformed config: ") + e.what());
    }
    validate(c);
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw InvalidArgument("cannot open config file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw InvalidArgument("cannot parse config file " + path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

json to_json(const ExperimentConfig& c)
{
    json env{{"kind", env_kind_name(c.env.kind)}};
    switch (c.env.kind) {
    case EnvSpec::Kind::MachineReplacement:
        env["cost_family"] = c.env.machine.family == CostFamily::Gaussian ? "gaussian" : "student_t";
        env["gaussian_sd"] = c.env.machine.gaussian_sd;
        env["t_scale"] = c.env.machine.t_scale;
        env["t_dof"] = c.env.machine.t_dof;
        break;
    case EnvSpec::Kind::EnergyStorage:
        env["params"] = to_json(c.env.energy);
        break;
    case EnvSpec::Kind::ModelFile:
        env["path"] = c.env.model_path.string();
        break;
    }
    json j{{"env", env},
           {"algorithm", std::string(to_string(c.algorithm))},
           {"lambda", c.lambda},
           {"phi", c.phi},
           {"total_epochs", c.total_epochs},
           {"warmup_epochs", c.warmup_epochs},
           {"replications", c.replications},
           {"base_seed", c.base_seed},
           {"schedule", to_json(c.schedule)},
           {"reference_state", c.reference_state},
           {"initial_state", c.initial_state},
           {"rate_window", {c.rate_window.first, c.rate_window.second}},
           {"output_dir", c.output_dir.string()}};
    if (c.checkpoint_epochs.empty())
        j["checkpoints"] = c.checkpoint_count;
    else
        j["checkpoints"] = c.checkpoint_epochs;
    if (c.initial_policy)
        j["initial_policy"] = to_json(greedy(*c.initial_policy));
    return j;
}

void validate(const ExperimentConfig& c)
{
    if (c.replications < 1)
        throw InvalidArgument("replications must be at least 1");
    if (c.total_epochs < 1)
        throw InvalidArgument("total_epochs must be positive");
    if (c.warmup_epochs < 0 || c.warmup_epochs > c.total_epochs)
        throw InvalidArgument("warmup_epochs must lie in [0, total_epochs]");
    if (!(c.phi > 0.0 && c.phi < 1.0))
        throw InvalidArgument("phi must lie in (0, 1)");
    if (!(c.lambda >= 0.0))
        throw InvalidArgument("lambda must be nonnegative");
    if (c.checkpoint_epochs.empty() && c.checkpoint_count < 1)
        throw InvalidArgument("checkpoints must be a positive count or a list of epochs");
    if (c.threads < 0)
        throw InvalidArgument("threads must be nonnegative");
    const MdpModel model = build_model(c.env);
    SchedulePack(c.schedule, model.n_actions);
    if (c.reference_state < 0 || c.reference_state >= model.n_states)
        throw InvalidArgument("reference_state out of range");
    if (c.initial_state < 0 || c.initial_state >= model.n_states)
        throw InvalidArgument("initial_state out of range");
}

MdpModel build_model(const EnvSpec& env)
{
    switch (env.kind) {
    case EnvSpec::Kind::MachineReplacement:
        return build_machine_replacement(env.machine);
    case EnvSpec::Kind::EnergyStorage:
        return build_energy_storage(env.energy);
    case EnvSpec::Kind::ModelFile:
        return load_model(env.model_path);
    }
    throw InvalidArgument("unknown environment");
}

LearnerConfig learner_config(const ExperimentConfig& c)
{
    LearnerConfig lc;
    lc.phi = c.phi;
    lc.lambda = c.algorithm == Algorithm::MCRL ? c.lambda : 0.0;
    lc.mode = c.algorithm;
    lc.reference_state = c.reference_state;
    lc.warmup_epochs = c.warmup_epochs;
    lc.schedules = c.schedule;
    lc.d0 = c.initial_policy;
    return lc;
}

std::vector<std::int64_t> checkpoint_schedule(const ExperimentConfig& c)
{
    std::set<std::int64_t> epochs;
    if (!c.checkpoint_epochs.empty()) {
        for (auto e : c.checkpoint_epochs)
            if (e >= 1 && e <= c.total_epochs)
                epochs.insert(e);
    } else {
        const double log_total = std::log(static_cast<double>(c.total_epochs));
        const int count = c.checkpoint_count;
        for (int i = 0; i < count; ++i) {
            const double t = count == 1 ? 1.0 : static_cast<double>(i) / (count - 1);
            epochs.insert(std::clamp<std::int64_t>(std::llround(std::exp(t * log_total)), 1, c.total_epochs));
        }
        epochs.insert(c.total_epochs);
    }
    return {epochs.begin(), epochs.end()};
}

ExperimentContext make_context(const ExperimentConfig& config)
{
    ExperimentContext ctx{build_model(config.env), {}};
    ctx.optimum = global_optimum(ctx.model, config.phi, config.certificate_lambda(), kEnumerationBudget, config.reference_state);
    return ctx;
}

// ---------------------------------------------------------------------------
// Replications
// ---------------------------------------------------------------------------

std::uint64_t replication_seed(std::uint64_t base_seed, int index)
{
    return derive_seed(base_seed, static_cast<std::uint64_t>(index));
}

double compute_gap(double value, double optimum)
{
    if (optimum == 0.0)
        throw InvalidArgument("relative gap is undefined for a zero optimum");
    return (value - optimum) / std::abs(optimum);
}

double policy_distance(const RandomizedPolicy& d, const DeterministicPolicy& reference)
{
    double total = 0.0;
    for (Eigen::Index s = 0; s < d.probs.rows(); ++s) {
        Eigen::RowVectorXd diff = d.probs.row(s);
        diff(reference.action[static_cast<std::size_t>(s)]) -= 1.0;
        total += diff.norm();
    }
    return total;
}

double fit_rate(const std::vector<std::pair<double, double>>& series, std::pair<double, double> window)
{
    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& [epoch, distance] : series)
        if (epoch >= window.first && epoch <= window.second && distance > 0.0 && std::isfinite(distance)) {
            xs.push_back(std::log(epoch));
            ys.push_back(std::log(distance));
        }
    if (xs.size() < 10)
        throw InvalidArgument("fit_rate needs at least 10 positive points inside the window, got " + std::to_string(xs.size()));
    const auto n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    if (sxx == 0.0)
        throw InvalidArgument("fit_rate needs at least two distinct epochs");
    return sxy / sxx;
}

ReplicationResult run_replication(const ExperimentConfig& config, const ExperimentContext& context, std::uint64_t seed,
                                  int index)
{
    const MdpModel& model = context.model;
    const double cert_lambda = config.certificate_lambda();
    const auto checkpoints = checkpoint_schedule(config);

    RandomStream rng(seed);
    Learner learner(model, learner_config(config), config.initial_state);

    std::map<std::vector<int>, std::optional<PolicyEvaluation>> cache;
    auto evaluate_greedy = [&](const DeterministicPolicy& p) -> const std::optional<PolicyEvaluation>& {
        auto it = cache.find(p.action);
        if (it == cache.end()) {
            std::optional<PolicyEvaluation> eval;
            try {
                eval = evaluate_policy(model, p, config.phi, cert_lambda);
            } catch (const ReducibleChain&) {
            }
            it = cache.emplace(p.action, std::move(eval)).first;
        }
        return it->second;
    };

    ReplicationResult result;
    result.index = index;
    result.seed = seed;
    std::vector<Eigen::MatrixXd> snapshots;
    std::size_t next = 0;
    while (learner.state().epoch < config.total_epochs) {
        learner.step(rng);
        if (next < checkpoints.size() && learner.state().epoch == checkpoints[next]) {
            const auto& st = learner.state();
            CheckpointRecord rec;
            rec.epoch = st.epoch;
            rec.running_cvar = learner.running_cvar();
            rec.v = st.v;
            rec.max_abs_q = 0.0;
            for (int s = 0; s < model.n_states; ++s)
                for (int a = 0; a < model.n_actions; ++a)
                    if (model.is_feasible(s, a))
                        rec.max_abs_q = std::max(rec.max_abs_q, std::abs(st.q(s, a)));
            rec.greedy_policy = greedy(st.d);
            const auto& eval = evaluate_greedy(rec.greedy_policy);
            rec.greedy_evaluable = eval.has_value();
            if (eval) {
                rec.greedy_var = eval->risk.var;
                rec.greedy_cvar = eval->risk.cvar;
                rec.greedy_mean = eval->risk.mean;
                rec.gap = compute_gap(eval->objective, context.optimum.evaluation.objective);
            } else {
                rec.greedy_var = rec.greedy_cvar = rec.greedy_mean = rec.gap = kNaN;
            }
            result.series.push_back(std::move(rec));
            snapshots.push_back(st.d.probs);
            ++next;
        }
    }

    result.final_policy = greedy(learner.state().d);
    try {
        const auto report = check_local_optimality(model, result.final_policy, config.phi, cert_lambda,
                                                   kDefaultLocalTolerance, config.reference_state);
        result.final_evaluation = report.evaluation;
        result.locally_optimal = report.locally_optimal;
        result.locally_optimal_loose = report.violating_states(1e-3).empty();
    } catch (const ReducibleChain&) {
        result.final_evaluation.policy = to_randomized(model, result.final_policy);
        result.final_evaluation.risk = {kNaN, kNaN, kNaN};
        result.final_evaluation.objective = kNaN;
    }
    result.matches_optimum = result.final_policy == context.optimum.policy;
    const bool use_optimum = result.locally_optimal && result.matches_optimum;
    result.reference = use_optimum ? "oracle_optimum" : "final_greedy";
    const DeterministicPolicy& ref = use_optimum ? context.optimum.policy : result.final_policy;
    for (std::size_t i = 0; i < snapshots.size(); ++i)
        result.series[i].policy_distance = policy_distance(RandomizedPolicy{snapshots[i]}, ref);
    return result;
}

ReplicationResult run_replication(const ExperimentConfig& config, std::uint64_t seed)
{
    return run_replication(config, make_context(config), seed, 0);
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

ExperimentReport run_experiment(const ExperimentConfig& config) { return run_experiment(config, make_context(config)); }

ExperimentReport run_experiment(const ExperimentConfig& config, const ExperimentContext& context)
{
    const int reps = config.replications;
    std::vector<std::optional<ReplicationResult>> slots(static_cast<std::size_t>(reps));
    std::vector<std::string> errors(static_cast<std::size_t>(reps));

    std::atomic<int> cursor{0};
    auto worker = [&] {
        for (int i = cursor++; i < reps; i = cursor++) {
            try {
                slots[static_cast<std::size_t>(i)] =
                    run_replication(config, context, replication_seed(config.base_seed, i), i);
            } catch (const std::exception& e) {
                errors[static_cast<std::size_t>(i)] = e.what();
            }
        }
    };
    int threads = config.threads > 0 ? config.threads : static_cast<int>(std::thread::hardware_concurrency());
    threads = std::clamp(threads, 1, reps);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < threads; ++t)
            pool.emplace_back(worker);
    }

    ExperimentReport report;
    report.config = config;
    report.optimum = context.optimum;
    for (int i = 0; i < reps; ++i) {
        if (slots[static_cast<std::size_t>(i)])
            report.replications.push_back(std::move(*slots[static_cast<std::size_t>(i)]));
        else
            report.failures.emplace_back(i, errors[static_cast<std::size_t>(i)]);
    }

    std::vector<double> vars, cvars, means;
    for (const auto& r : report.replications) {
        if (std::isfinite(r.final_evaluation.risk.cvar)) {
            vars.push_back(r.final_evaluation.risk.var);
            cvars.push_back(r.final_evaluation.risk.cvar);
            means.push_back(r.final_evaluation.risk.mean);
        }
        report.locally_optimal_count += r.locally_optimal ? 1 : 0;
        report.locally_optimal_loose_count += r.locally_optimal_loose ? 1 : 0;
    }
    report.final_var = mean_with_error(vars);
    report.final_cvar = mean_with_error(cvars);
    report.final_mean = mean_with_error(means);

    if (!report.replications.empty()) {
        const std::size_t points = report.replications.front().series.size();
        for (std::size_t k = 0; k < points; ++k) {
            SeriesMeanRecord m;
            m.epoch = report.replications.front().series[k].epoch;
            double rc = 0.0, pd = 0.0, gv = 0.0, gc = 0.0, gm = 0.0, gap = 0.0;
            for (const auto& r : report.replications) {
                const auto& rec = r.series[k];
                rc += rec.running_cvar;
                pd += rec.policy_distance;
                if (rec.greedy_evaluable) {
                    ++m.evaluable;
                    gv += rec.greedy_var;
                    gc += rec.greedy_cvar;
                    gm += rec.greedy_mean;
                    gap += rec.gap;
                }
            }
            const auto n = static_cast<double>(report.replications.size());
            m.running_cvar = rc / n;
            m.policy_distance = pd / n;
            const double ne = m.evaluable > 0 ? static_cast<double>(m.evaluable) : kNaN;
            m.greedy_var = gv / ne;
            m.greedy_cvar = gc / ne;
            m.greedy_mean = gm / ne;
            m.gap = gap / ne;
            report.series_mean.push_back(m);
        }
        std::vector<std::pair<double, double>> pts;
        for (const auto& m : report.series_mean)
            pts.emplace_back(static_cast<double>(m.epoch), m.policy_distance);
        try {
            report.rate_slope = fit_rate(pts, {static_cast<double>(config.rate_window.first),
                                               static_cast<double>(config.rate_window.second)});
        } catch (const InvalidArgument&) {
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

std::string format_csv(const MetricsSeries& series)
{
    std::ostringstream os;
    os << "epoch,running_cvar,v,max_abs_q,greedy_policy,greedy_var,greedy_cvar,greedy_mean,gap,policy_distance\n";
    for (const auto& r : series)
        os << r.epoch << ',' << format_double(r.running_cvar) << ',' << format_double(r.v) << ','
           << format_double(r.max_abs_q) << ',' << policy_string(r.greedy_policy) << ',' << format_double(r.greedy_var)
           << ',' << format_double(r.greedy_cvar) << ',' << format_double(r.greedy_mean) << ',' << format_double(r.gap)
           << ',' << format_double(r.policy_distance) << '\n';
    return os.str();
}

std::string format_csv(const std::vector<SeriesMeanRecord>& series)
{
    std::ostringstream os;
    os << "epoch,running_cvar,greedy_var,greedy_cvar,greedy_mean,gap,policy_distance,evaluable\n";
    for (const auto& r : series)
        os << r.epoch << ',' << format_double(r.running_cvar) << ',' << format_double(r.greedy_var) << ','
           << format_double(r.greedy_cvar) << ',' << format_double(r.greedy_mean) << ',' << format_double(r.gap) << ','
           << format_double(r.policy_distance) << ',' << r.evaluable << '\n';
    return os.str();
}

namespace {

void write_text(const std::string& text, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot write " + path.string());
    out << text;
    if (!out)
        throw Error("write failed for " + path.string());
}

json nan_safe(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

} // namespace

void emit_csv(const MetricsSeries& series, const std::filesystem::path& path) { write_text(format_csv(series), path); }

void emit_csv(const std::vector<SeriesMeanRecord>& series, const std::filesystem::path& path)
{
    write_text(format_csv(series), path);
}

json summary_json(const ExperimentReport& report)
{
    const auto& opt = report.optimum;
    json reps = json::array();
    for (const auto& r : report.replications) {
        const auto& risk = r.final_evaluation.risk;
        reps.push_back({{"index", r.index},
                        {"seed", r.seed},
                        {"final_policy", to_json(r.final_policy)},
                        {"var", nan_safe(risk.var)},
                        {"cvar", nan_safe(risk.cvar)},
                        {"mean", nan_safe(risk.mean)},
                        {"objective", nan_safe(r.final_evaluation.objective)},
                        {"locally_optimal", r.locally_optimal},
                        {"locally_optimal_tol_1e-3", r.locally_optimal_loose},
                        {"matches_optimum", r.matches_optimum},
                        {"distance_reference", r.reference}});
    }
    json failures = json::array();
    for (const auto& [i, msg] : report.failures)
        failures.push_back({{"index", i}, {"error", msg}});
    auto mwe = [](const MeanWithError& m) { return json{{"mean", nan_safe(m.mean)}, {"stderr", nan_safe(m.stderr_)}}; };
    return {{"config", to_json(report.config)},
            {"optimum", policy_report(opt.policy, opt.evaluation)},
            {"final", {{"var", mwe(report.final_var)}, {"cvar", mwe(report.final_cvar)}, {"mean", mwe(report.final_mean)}}},
            {"locally_optimal_count", report.locally_optimal_count},
            {"locally_optimal_count_tol_1e-3", report.locally_optimal_loose_count},
            {"successful_replications", report.replications.size()},
            {"rate_slope", report.rate_slope ? json(*report.rate_slope) : json(nullptr)},
            {"replications", reps},
            {"failures", failures}};
}

void write_outputs(const ExperimentReport& report, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    write_text(summary_json(report).dump(2) + "\n", dir / "summary.json");
    for (const auto& r : report.replications)
        emit_csv(r.series, dir / ("rep_" + std::to_string(r.index) + ".csv"));
    emit_csv(report.series_mean, dir / "series_mean.csv");
}

} // namespace lrcvar
