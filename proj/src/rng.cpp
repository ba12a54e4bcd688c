#include "dfl/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace dfl {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

int Rng::uniform_int(int lo, int hi) {
    if (hi < lo) throw std::invalid_argument("uniform_int: hi < lo");
    std::uint64_t range = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
    return lo + static_cast<int>(next_u64() % range);
}

double Rng::normal(double mean, double stddev) {
    // Box-Muller; u1 kept away from 0 for the log.
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    return mean + stddev * z;
}

double Rng::gamma(double alpha) {
    if (alpha <= 0.0) throw std::invalid_argument("gamma: alpha must be positive");
    if (alpha < 1.0) {
        double u = uniform();
        while (u <= 0.0) u = uniform();
        return gamma(alpha + 1.0) * std::pow(u, 1.0 / alpha);
    }
    double d = alpha - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = normal();
        double t = 1.0 + c * x;
        if (t <= 0.0) continue;
        double v = t * t * t;
        double u = uniform();
        while (u <= 0.0) u = uniform();
        if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
    }
}

std::vector<double> Rng::dirichlet(double alpha, int k) {
    std::vector<double> p(static_cast<std::size_t>(k));
    double sum = 0.0;
    for (auto& v : p) {
        v = gamma(alpha);
        sum += v;
    }
    if (sum <= 0.0) {
        // all gamma draws underflowed (tiny alpha); fall back to a point mass
        p.assign(p.size(), 0.0);
        p[static_cast<std::size_t>(uniform_int(0, k - 1))] = 1.0;
        return p;
    }
    for (auto& v : p) v /= sum;
    return p;
}

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
    std::uint64_t h = splitmix64(base);
    for (std::uint64_t t : tags) h = splitmix64(h ^ splitmix64(t));
    return h;
}

}  // namespace dfl
