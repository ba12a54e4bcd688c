#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace dfl {

// Deterministic random stream. All transforms (uniform, normal, gamma) are
// implemented here on top of mt19937_64 so that sequences are identical
// across standard libraries and platforms; std::*_distribution is not
// reproducible between implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // inclusive bounds
    int uniform_int(int lo, int hi);

    double normal(double mean = 0.0, double stddev = 1.0);

    // shape alpha > 0, unit scale (Marsaglia-Tsang)
    double gamma(double alpha);

    // symmetric Dirichlet over k bins
    std::vector<double> dirichlet(double alpha, int k);

    // Fisher-Yates
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
            int j = uniform_int(0, i);
            std::swap(v[i], v[static_cast<std::size_t>(j)]);
        }
    }

private:
    std::mt19937_64 eng_;
};

// Mixes a base seed with a list of tags (stream id, round, device id, ...)
// into an independent stream seed. splitmix64 finalisation per tag.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags);

// Stream tags used across the simulator; keeps derived streams disjoint.
namespace stream {
inline constexpr std::uint64_t kDataset = 1;
inline constexpr std::uint64_t kPartition = 2;
inline constexpr std::uint64_t kDeviceInit = 3;
inline constexpr std::uint64_t kMobility = 4;
inline constexpr std::uint64_t kClustering = 5;
inline constexpr std::uint64_t kTraining = 6;
inline constexpr std::uint64_t kGossipIntra = 7;
inline constexpr std::uint64_t kGossipInter = 8;
inline constexpr std::uint64_t kTestSplit = 9;
inline constexpr std::uint64_t kAnalysis = 10;
}  // namespace stream

}  // namespace dfl
