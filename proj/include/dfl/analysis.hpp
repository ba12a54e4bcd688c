#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "dfl/param_vector.hpp"
#include "dfl/sim.hpp"

namespace dfl::analysis {

// Spectral view of one mixing matrix. Two gap conventions are in circulation
// (mixing-matrix eigenvalues vs normalised-Laplacian eigenvalues); both are
// reported side by side rather than reconciled.
struct SpectralReport {
    double lambda_2 = 0.0;           // second-largest eigenvalue of W
    double lambda_n = 0.0;           // smallest eigenvalue of W
    double rho_mixing = 0.0;         // (max{|lambda_2|, |lambda_n|})^2
    double laplacian_lambda_2 = 0.0; // second-smallest eigenvalue of L = I - W
    double rho_laplacian = 0.0;      // 1 - lambda_2(L)
    bool flagged = false;            // rho_mixing = 1: consensus never contracts
};

// Full symmetric eigendecomposition of the graph's mixing matrix. Rejects
// matrices whose asymmetry exceeds 1e-9 and eigenpairs whose residual
// ||Wv - lambda v|| exceeds 1e-8 * ||W||_F.
SpectralReport spectral_report(const sim::TopologyGraph& graph);

// Symbol bag for the convergence-rate formulas. mu and varsigma are carried
// for documentation; no implemented bound consumes them.
struct ConvergenceBound {
    std::int64_t T = 1;  // iterations
    int n = 1;           // nodes
    double f0_minus_fstar = 0.0;
    double L_lipschitz = 0.0;
    double sigma = 0.0;  // stochastic-gradient variance bound
    double varsigma = 0.0;
    double mu = 0.0;
    double epsilon = 1e-3;
    double lambda_max = 0.5;
    double c = 1.0;
    double t_ave_lower = 0.0;
    double t_ave_upper = 0.0;
    double consensus_term = 0.0;
};

// Interval for the iterations a gossip process needs to reach epsilon
// consensus: [0.5, 3] * ln(1/eps) / ln(1/lambda). The ratio upper/lower is
// exactly 6. lambda >= 1 means the gap is closed and the time is undefined.
std::pair<double, double> averaging_time_bounds(double epsilon, double lambda);

// 8(f0-f*)L/T + (8(f0-f*) + 4L) * sigma / sqrt(T n)
double dpsgd_rate_bound(const ConvergenceBound& b);

// 1/T + 1/sqrt(nT) + exp(c*t_ave*ln(lambda)) per layer, unit leading constants
double bilayer_rate_bound(double t_ave_intra, double lambda_max_intra, double t_ave_inter,
                          double lambda_max_inter, std::int64_t T, int n, double c);

// mean squared distance of the vectors from their unweighted mean; fewer than
// two vectors give 0 by convention
double consensus_error(const std::vector<ParamVector>& params);
double consensus_error(const std::vector<sim::DeviceState>& devices);

// Synchronous mixing x <- Wx from a seeded scalar state with unit initial
// consensus error. errors[t] is the consensus error after t steps; iterations
// is the first step at or below epsilon^2.
struct MixingTrace {
    int iterations = 0;
    std::vector<double> errors;
};

MixingTrace mixing_trace(const sim::TopologyGraph& graph, double epsilon, std::uint64_t seed);
int empirical_averaging_time(const sim::TopologyGraph& graph, double epsilon, std::uint64_t seed);

}  // namespace dfl::analysis
