#include "lrcvar/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include <boost/math/distributions/students_t.hpp>

#include "lrcvar/error.hpp"

namespace lrcvar {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double std_normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
double std_normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

constexpr double kProbTolerance = 1e-12;
constexpr double kBracketWidth = 1e-10;
constexpr int kMaxBracketExpansions = 200;

} // namespace

Discrete::Discrete(std::vector<double> values, std::vector<double> probs)
{
    if (values.empty() || values.size() != probs.size())
        throw InvalidArgument("discrete distribution needs equally sized, nonempty values and probs");
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });

    double total = 0.0;
    for (std::size_t i : order) {
        if (!std::isfinite(values[i]) || !std::isfinite(probs[i]) || probs[i] < 0.0)
            throw InvalidArgument("discrete distribution has a non-finite value or a negative probability");
        total += probs[i];
        if (!values_.empty() && values_.back() == values[i]) {
            probs_.back() += probs[i];
        } else {
            values_.push_back(values[i]);
            probs_.push_back(probs[i]);
        }
    }
    if (std::abs(total - 1.0) > kProbTolerance)
        throw InvalidArgument("discrete probabilities sum to " + std::to_string(total) + ", expected 1");

    cumulative_.resize(probs_.size());
    std::partial_sum(probs_.begin(), probs_.end(), cumulative_.begin());
}

void validate(const CostDistribution& dist)
{
    std::visit(overloaded{
                   [](const Gaussian& g) {
                       if (!std::isfinite(g.mean) || !(g.sd > 0.0) || !std::isfinite(g.sd))
                           throw InvalidArgument("gaussian needs a finite mean and sd > 0");
                   },
                   [](const StudentT& t) {
                       if (!std::isfinite(t.location) || !(t.scale > 0.0) || !std::isfinite(t.scale))
                           throw InvalidArgument("student_t needs a finite location and scale > 0");
                       if (!(t.dof > 2.0) || !std::isfinite(t.dof))
                           throw InvalidArgument("student_t needs dof > 2 (finite variance)");
                   },
                   [](const Discrete&) {}, // checked at construction
               },
               dist);
}

double dist_mean(const CostDistribution& dist)
{
    return std::visit(overloaded{
                          [](const Gaussian& g) { return g.mean; },
                          [](const StudentT& t) { return t.location; },
                          [](const Discrete& d) {
                              return std::inner_product(d.values().begin(), d.values().end(), d.probs().begin(), 0.0);
                          },
                      },
                      dist);
}

double dist_cdf(const CostDistribution& dist, double x)
{
    return std::visit(overloaded{
                          [x](const Gaussian& g) { return std_normal_cdf((x - g.mean) / g.sd); },
                          [x](const StudentT& t) {
                              boost::math::students_t_distribution<double> std_t(t.dof);
                              const double k = (x - t.location) / t.scale;
                              if (!std::isfinite(k))
                                  return k > 0 ? 1.0 : 0.0;
                              return boost::math::cdf(std_t, k);
                          },
                          [x](const Discrete& d) {
                              const auto it = std::upper_bound(d.values().begin(), d.values().end(), x);
                              if (it == d.values().begin())
                                  return 0.0;
                              return std::min(1.0, d.cumulative()[static_cast<std::size_t>(it - d.values().begin()) - 1]);
                          },
                      },
                      dist);
}

double expected_excess(const CostDistribution& dist, double v)
{
    return std::visit(overloaded{
                          [v](const Gaussian& g) {
                              const double k = (v - g.mean) / g.sd;
                              return std::max(0.0, g.sd * (std_normal_pdf(k) - k * std_normal_sf(k)));
                          },
                          [v](const StudentT& t) {
                              // E[(T - k)^+] = (nu + k^2)/(nu - 1) f(k) - k (1 - F(k)) for standard T.
                              boost::math::students_t_distribution<double> std_t(t.dof);
                              const double k = (v - t.location) / t.scale;
                              const double tail = boost::math::cdf(boost::math::complement(std_t, k));
                              const double ee = (t.dof + k * k) / (t.dof - 1.0) * boost::math::pdf(std_t, k) - k * tail;
                              return std::max(0.0, t.scale * ee);
                          },
                          [v](const Discrete& d) {
                              double ee = 0.0;
                              for (std::size_t i = 0; i < d.values().size(); ++i)
                                  if (d.values()[i] > v)
                                      ee += d.probs()[i] * (d.values()[i] - v);
                              return ee;
                          },
                      },
                      dist);
}

double sample(const CostDistribution& dist, RandomStream& rng)
{
    return std::visit(overloaded{
                          [&rng](const Gaussian& g) { return g.mean + g.sd * rng.normal(); },
                          [&rng](const StudentT& t) {
                              const double z = rng.normal();
                              const double chi2 = rng.chi_squared(t.dof);
                              return t.location + t.scale * z / std::sqrt(chi2 / t.dof);
                          },
                          [&rng](const Discrete& d) {
                              const double u = rng.uniform();
                              const auto& cum = d.cumulative();
                              auto it = std::upper_bound(cum.begin(), cum.end(), u);
                              if (it == cum.end())
                                  --it;
                              return d.values()[static_cast<std::size_t>(it - cum.begin())];
                          },
                      },
                      dist);
}

double dist_location(const CostDistribution& dist)
{
    return std::visit(overloaded{
                          [](const Gaussian& g) { return g.mean; },
                          [](const StudentT& t) { return t.location; },
                          [](const Discrete& d) { return 0.5 * (d.values().front() + d.values().back()); },
                      },
                      dist);
}

double dist_scale(const CostDistribution& dist)
{
    return std::visit(overloaded{
                          [](const Gaussian& g) { return g.sd; },
                          [](const StudentT& t) { return t.scale; },
                          [](const Discrete& d) { return std::max(1.0, 0.5 * (d.values().back() - d.values().front())); },
                      },
                      dist);
}

bool is_discrete(const CostDistribution& dist) { return std::holds_alternative<Discrete>(dist); }

double tilde_c_exact(const CostDistribution& dist, double v, double phi)
{
    return v + expected_excess(dist, v) / (1.0 - phi);
}

namespace {

void check_phi(double phi)
{
    if (!(phi > 0.0 && phi < 1.0))
        throw InvalidArgument("tail level phi must lie in (0, 1)");
}

double discrete_mixture_var(std::span<const MixtureComponent> mixture, double phi)
{
    std::vector<std::pair<double, double>> atoms;
    for (const auto& c : mixture) {
        const auto& d = std::get<Discrete>(*c.dist);
        for (std::size_t i = 0; i < d.values().size(); ++i)
            atoms.emplace_back(d.values()[i], c.weight * d.probs()[i]);
    }
    std::sort(atoms.begin(), atoms.end());
    double cum = 0.0;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        cum += atoms[i].second;
        const bool last_of_value = i + 1 == atoms.size() || atoms[i + 1].first != atoms[i].first;
        if (last_of_value && cum >= phi - kProbTolerance)
            return atoms[i].first;
    }
    return atoms.back().first;
}

} // namespace

double mixture_cdf(std::span<const MixtureComponent> mixture, double x)
{
    double f = 0.0;
    for (const auto& c : mixture)
        if (c.weight > 0.0)
            f += c.weight * dist_cdf(*c.dist, x);
    return f;
}

double mixture_var(std::span<const MixtureComponent> mixture, double phi)
{
    check_phi(phi);
    std::vector<MixtureComponent> active;
    for (const auto& c : mixture) {
        if (c.weight < 0.0 || !std::isfinite(c.weight))
            throw InvalidArgument("mixture weights must be finite and nonnegative");
        if (c.weight > 0.0)
            active.push_back(c);
    }
    if (active.empty())
        throw InvalidArgument("mixture has no component with positive weight");

    if (std::all_of(active.begin(), active.end(), [](const auto& c) { return is_discrete(*c.dist); }))
        return discrete_mixture_var(active, phi);

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& c : active) {
        if (const auto* d = std::get_if<Discrete>(c.dist)) {
            lo = std::min(lo, d->values().front() - 1.0);
            hi = std::max(hi, d->values().back());
        } else {
            lo = std::min(lo, dist_location(*c.dist) - 10.0 * dist_scale(*c.dist));
            hi = std::max(hi, dist_location(*c.dist) + 10.0 * dist_scale(*c.dist));
        }
    }
    const std::span<const MixtureComponent> view(active);
    double width = hi - lo;
    for (int i = 0; mixture_cdf(view, lo) >= phi; ++i, width *= 2.0) {
        if (i == kMaxBracketExpansions)
            throw NumericalFailure("mixture_var: could not bracket the quantile from below");
        lo -= width;
    }
    for (int i = 0; mixture_cdf(view, hi) < phi; ++i, width *= 2.0) {
        if (i == kMaxBracketExpansions)
            throw NumericalFailure("mixture_var: could not bracket the quantile from above");
        hi += width;
    }
    for (int i = 0; hi - lo > kBracketWidth; ++i) {
        if (i == 1'000'000)
            throw NumericalFailure("mixture_var: bisection did not terminate");
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi)
            break;
        if (mixture_cdf(view, mid) >= phi)
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

double mixture_mean(std::span<const MixtureComponent> mixture)
{
    double m = 0.0;
    for (const auto& c : mixture)
        if (c.weight > 0.0)
            m += c.weight * dist_mean(*c.dist);
    return m;
}

RiskTriple mixture_risk(std::span<const MixtureComponent> mixture, double phi)
{
    RiskTriple r;
    r.var = mixture_var(mixture, phi);
    double excess = 0.0;
    for (const auto& c : mixture)
        if (c.weight > 0.0)
            excess += c.weight * expected_excess(*c.dist, r.var);
    r.cvar = r.var + excess / (1.0 - phi);
    r.mean = mixture_mean(mixture);
    return r;
}

double mixture_cvar(std::span<const MixtureComponent> mixture, double phi) { return mixture_risk(mixture, phi).cvar; }

namespace {

double order_statistic_var(std::vector<double>& work, double phi)
{
    const auto n = work.size();
    auto k = static_cast<std::size_t>(std::ceil(phi * static_cast<double>(n) - 1e-9));
    k = std::clamp<std::size_t>(k, 1, n);
    std::nth_element(work.begin(), work.begin() + static_cast<std::ptrdiff_t>(k - 1), work.end());
    return work[k - 1];
}

} // namespace

RiskTriple empirical_var_cvar(std::span<const double> samples, double phi)
{
    check_phi(phi);
    if (samples.empty())
        throw InvalidArgument("empirical_var_cvar needs at least one sample");
    std::vector<double> work(samples.begin(), samples.end());
    RiskTriple r;
    r.var = order_statistic_var(work, phi);
    double tail_sum = 0.0;
    std::size_t tail_count = 0;
    double total = 0.0;
    for (double x : samples) {
        total += x;
        if (x >= r.var) {
            tail_sum += x;
            ++tail_count;
        }
    }
    r.cvar = tail_sum / static_cast<double>(tail_count);
    r.mean = total / static_cast<double>(samples.size());
    return r;
}

double empirical_tail_cvar(std::span<const double> samples, double phi)
{
    check_phi(phi);
    if (samples.empty())
        throw InvalidArgument("empirical_tail_cvar needs at least one sample");
    std::vector<double> work(samples.begin(), samples.end());
    const double var = order_statistic_var(work, phi);
    double excess = 0.0;
    for (double x : samples)
        excess += std::max(0.0, x - var);
    return var + excess / ((1.0 - phi) * static_cast<double>(samples.size()));
}

} // namespace lrcvar
