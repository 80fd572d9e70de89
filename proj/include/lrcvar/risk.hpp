#pragma once

#include <span>
#include <variant>
#include <vector>

#include "lrcvar/random.hpp"

namespace lrcvar {

struct Gaussian {
    double mean;
    double sd;
};

/// location + scale * T, with T a standard Student-t variable with `dof` degrees of freedom.
struct StudentT {
    double location;
    double scale;
    double dof;
};

/// Finite distribution. Atoms are kept sorted by value with equal values merged.
class Discrete {
public:
    Discrete(std::vector<double> values, std::vector<double> probs);

    const std::vector<double>& values() const { return values_; }
    const std::vector<double>& probs() const { return probs_; }
    /// cumulative()[i] = P(C <= values()[i])
    const std::vector<double>& cumulative() const { return cumulative_; }

private:
    std::vector<double> values_;
    std::vector<double> probs_;
    std::vector<double> cumulative_;
};

using CostDistribution = std::variant<Gaussian, StudentT, Discrete>;

/// Throws InvalidArgument unless sd/scale > 0, dof > 2 and parameters are finite.
void validate(const CostDistribution& dist);

double dist_mean(const CostDistribution& dist);
double dist_cdf(const CostDistribution& dist, double x);
/// E[(C - v)^+], closed form for every family.
double expected_excess(const CostDistribution& dist, double v);
double sample(const CostDistribution& dist, RandomStream& rng);

/// Location and spread used to bracket quantile searches.
double dist_location(const CostDistribution& dist);
double dist_scale(const CostDistribution& dist);
bool is_discrete(const CostDistribution& dist);

/// Single-sample surrogate v + (1-phi)^{-1} (cost - v)^+.
inline double tilde_c_sample(double v, double cost_sample, double phi)
{
    const double excess = cost_sample > v ? cost_sample - v : 0.0;
    return v + excess / (1.0 - phi);
}

/// Exact surrogate v + (1-phi)^{-1} E[(C - v)^+].
double tilde_c_exact(const CostDistribution& dist, double v, double phi);

struct RiskTriple {
    double var = 0.0;
    double cvar = 0.0;
    double mean = 0.0;
};

struct MixtureComponent {
    double weight;
    const CostDistribution* dist;
};

/// inf{x : sum_i w_i F_i(x) >= phi}. Exact atom for purely discrete mixtures,
/// bisection to a bracket width below 1e-10 otherwise.
double mixture_var(std::span<const MixtureComponent> mixture, double phi);
/// VaR + (1-phi)^{-1} sum_i w_i E[(C_i - VaR)^+].
double mixture_cvar(std::span<const MixtureComponent> mixture, double phi);
double mixture_mean(std::span<const MixtureComponent> mixture);
double mixture_cdf(std::span<const MixtureComponent> mixture, double x);
RiskTriple mixture_risk(std::span<const MixtureComponent> mixture, double phi);

/// Order-statistic VaR (index ceil(phi N), 1-based), CVaR as the mean of samples >= VaR.
RiskTriple empirical_var_cvar(std::span<const double> samples, double phi);
/// Plug-in Rockafellar-Uryasev CVaR: VaR + (1-phi)^{-1} mean((x - VaR)^+), VaR as above.
/// Consistent with mixture_cvar for discrete costs, where the tail-mean form is not.
double empirical_tail_cvar(std::span<const double> samples, double phi);

} // namespace lrcvar
