#include "dfl/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dfl/errors.hpp"
#include "dfl/rng.hpp"

namespace dfl::analysis {

SpectralReport spectral_report(const sim::TopologyGraph& graph) {
    int n = graph.n;
    if (n < 1) throw std::invalid_argument("spectral_report: empty graph");

    Eigen::MatrixXd w(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) w(i, j) = graph.mixing_at(i, j);

    double asym = (w - w.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-9)
        throw std::invalid_argument("spectral_report: mixing matrix asymmetry exceeds 1e-9");

    SpectralReport rep;
    if (n == 1) {
        // one node is trivially at consensus
        rep.lambda_2 = 0.0;
        rep.lambda_n = w(0, 0);
        rep.laplacian_lambda_2 = 1.0;
        rep.rho_laplacian = 0.0;
        rep.rho_mixing = 0.0;
        return rep;
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(w);
    if (solver.info() != Eigen::Success)
        throw NumericError("spectral_report: eigendecomposition failed to converge");

    const Eigen::VectorXd& eig = solver.eigenvalues();  // ascending
    const Eigen::MatrixXd& vec = solver.eigenvectors();
    double scale = w.norm();
    for (int k = 0; k < n; ++k) {
        double residual = (w * vec.col(k) - eig(k) * vec.col(k)).norm();
        if (residual > 1e-8 * std::max(scale, 1.0))
            throw NumericError("spectral_report: eigenpair residual exceeds tolerance");
    }

    rep.lambda_2 = eig(n - 2);
    rep.lambda_n = eig(0);
    double m = std::max(std::abs(rep.lambda_2), std::abs(rep.lambda_n));
    rep.rho_mixing = m * m;
    // L = I - W shares eigenvectors with W, so its spectrum is 1 - eig(W)
    rep.laplacian_lambda_2 = 1.0 - rep.lambda_2;
    rep.rho_laplacian = 1.0 - rep.laplacian_lambda_2;
    rep.flagged = rep.rho_mixing >= 1.0 - 1e-9;
    return rep;
}

std::pair<double, double> averaging_time_bounds(double epsilon, double lambda) {
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw std::invalid_argument("averaging_time_bounds: epsilon must lie in (0,1)");
    if (lambda < 0.0)
        throw std::invalid_argument("averaging_time_bounds: lambda must be non-negative");
    if (lambda >= 1.0)
        throw NumericError("averaging_time_bounds: spectral gap closed, averaging time undefined");
    double num = std::log(1.0 / epsilon);
    double den = std::log(1.0 / lambda);  // +inf at lambda=0: instant mixing, bounds 0
    return {0.5 * num / den, 3.0 * num / den};
}

double dpsgd_rate_bound(const ConvergenceBound& b) {
    if (b.T < 1 || b.n < 1) throw std::invalid_argument("dpsgd_rate_bound: T and n must be >= 1");
    if (b.f0_minus_fstar < 0.0 || b.L_lipschitz < 0.0 || b.sigma < 0.0)
        throw std::invalid_argument("dpsgd_rate_bound: constants must be non-negative");
    double t = static_cast<double>(b.T);
    double first = 8.0 * b.f0_minus_fstar * b.L_lipschitz / t;
    double second = (8.0 * b.f0_minus_fstar + 4.0 * b.L_lipschitz) * b.sigma /
                    std::sqrt(t * static_cast<double>(b.n));
    return first + second;
}

namespace {

double layer_consensus_term(double t_ave, double lambda_max, double c) {
    if (t_ave < 0.0) throw std::invalid_argument("bilayer_rate_bound: negative averaging time");
    if (!(lambda_max > 0.0 && lambda_max < 1.0))
        throw std::invalid_argument("bilayer_rate_bound: lambda_max must lie in (0,1)");
    return std::exp(c * t_ave * std::log(lambda_max));
}

}  // namespace

double bilayer_rate_bound(double t_ave_intra, double lambda_max_intra, double t_ave_inter,
                          double lambda_max_inter, std::int64_t T, int n, double c) {
    if (T < 1 || n < 1) throw std::invalid_argument("bilayer_rate_bound: T and n must be >= 1");
    if (c <= 0.0) throw std::invalid_argument("bilayer_rate_bound: c must be positive");
    double t = static_cast<double>(T);
    return 1.0 / t + 1.0 / std::sqrt(static_cast<double>(n) * t) +
           layer_consensus_term(t_ave_intra, lambda_max_intra, c) +
           layer_consensus_term(t_ave_inter, lambda_max_inter, c);
}

double consensus_error(const std::vector<ParamVector>& params) {
    if (params.size() < 2) return 0.0;
    std::size_t dim = params.front().values.size();
    for (const auto& p : params)
        if (p.values.size() != dim)
            throw std::invalid_argument("consensus_error: parameter length mismatch");
    std::vector<double> mean(dim, 0.0);
    for (const auto& p : params)
        for (std::size_t k = 0; k < dim; ++k) mean[k] += p.values[k];
    for (auto& v : mean) v /= static_cast<double>(params.size());
    double total = 0.0;
    for (const auto& p : params) {
        double s = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
            double diff = p.values[k] - mean[k];
            s += diff * diff;
        }
        total += s;
    }
    return total / static_cast<double>(params.size());
}

double consensus_error(const std::vector<sim::DeviceState>& devices) {
    std::vector<ParamVector> params;
    params.reserve(devices.size());
    for (const auto& d : devices) params.push_back(d.params);
    return consensus_error(params);
}

MixingTrace mixing_trace(const sim::TopologyGraph& graph, double epsilon, std::uint64_t seed) {
    int n = graph.n;
    if (n < 2) throw std::invalid_argument("mixing_trace: need at least two nodes");
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw std::invalid_argument("mixing_trace: epsilon must lie in (0,1)");

    Rng rng(derive_seed(seed, {stream::kAnalysis}));
    std::vector<double> x(static_cast<std::size_t>(n));
    for (auto& v : x) v = rng.normal(0.0, 1.0);

    auto error_of = [n](const std::vector<double>& state) {
        double mean = 0.0;
        for (double v : state) mean += v;
        mean /= static_cast<double>(n);
        double total = 0.0;
        for (double v : state) total += (v - mean) * (v - mean);
        return total / static_cast<double>(n);
    };

    // scale deviations so the initial consensus error is exactly 1
    double e0 = error_of(x);
    if (e0 <= 0.0) throw NumericError("mixing_trace: degenerate initial state");
    double mean0 = 0.0;
    for (double v : x) mean0 += v;
    mean0 /= static_cast<double>(n);
    double inv = 1.0 / std::sqrt(e0);
    for (auto& v : x) v = (v - mean0) * inv;

    MixingTrace trace;
    trace.errors.push_back(error_of(x));
    double target = epsilon * epsilon;
    constexpr int kMaxIterations = 1000000;
    std::vector<double> next(static_cast<std::size_t>(n));
    for (int t = 1; t <= kMaxIterations; ++t) {
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = 0; j < n; ++j) s += graph.mixing_at(i, j) * x[static_cast<std::size_t>(j)];
            next[static_cast<std::size_t>(i)] = s;
        }
        x.swap(next);
        trace.errors.push_back(error_of(x));
        if (trace.errors.back() <= target) {
            trace.iterations = t;
            return trace;
        }
    }
    throw NumericError("mixing_trace: consensus not reached within 1e6 iterations");
}

int empirical_averaging_time(const sim::TopologyGraph& graph, double epsilon,
                             std::uint64_t seed) {
    return mixing_trace(graph, epsilon, seed).iterations;
}

}  // namespace dfl::analysis
