#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dfl::data {

struct Sample {
    std::vector<double> x;
    int y = 0;
};

struct Dataset {
    std::vector<Sample> samples;
    int class_count = 0;
    int input_dim = 0;

    std::size_t size() const { return samples.size(); }
};

// A shard is an index list into a shared dataset; devices never copy samples.
struct DatasetView {
    const Dataset* base = nullptr;
    std::vector<int> idx;

    std::size_t size() const { return idx.size(); }
    bool empty() const { return idx.empty(); }
    const Sample& sample(std::size_t i) const { return base->samples[static_cast<std::size_t>(idx[i])]; }
};

enum class PartitionMode { IID, Dirichlet };

struct PartitionSpec {
    PartitionMode mode = PartitionMode::IID;
    double alpha = 1.0;  // Dirichlet concentration; unused under IID
    int device_count = 1;
    std::uint64_t seed = 0;
};

// Empirical class proportions of a shard; entries sum to 1.
struct LabelDistribution {
    std::vector<double> proportions;
};

// Gaussian blob per class with seeded means in [-5, 5]^dim; samples ordered
// class-major, exactly per_class each.
Dataset generate_blobs(int class_count, int per_class, int input_dim, double spread,
                       std::uint64_t seed);

// Balanced split: per-class counts across shards differ by at most one.
// The view overloads partition a subset (e.g. the train side of a split);
// shard indices always refer to the underlying dataset.
std::vector<DatasetView> partition_iid(const DatasetView& pool, int device_count,
                                       std::uint64_t seed);
std::vector<DatasetView> partition_iid(const Dataset& ds, int device_count, std::uint64_t seed);

// Class-over-devices Dirichlet(alpha) allotment with largest-remainder
// rounding; a device left empty steals one sample from the largest shard.
std::vector<DatasetView> partition_dirichlet(const DatasetView& pool, int device_count,
                                             double alpha, std::uint64_t seed);
std::vector<DatasetView> partition_dirichlet(const Dataset& ds, int device_count, double alpha,
                                             std::uint64_t seed);

LabelDistribution label_distribution(const DatasetView& shard);

// 1-D earth mover's distance with ground distance |i-j| over class indices,
// computed as the sum of absolute CDF differences.
double emd(const LabelDistribution& p, const LabelDistribution& q);

// Seeded stratified split into (train, test) index views; test_fraction of
// each class goes to the test side.
std::pair<DatasetView, DatasetView> train_test_split(const Dataset& ds, double test_fraction,
                                                     std::uint64_t seed);

// CSV rows: feature values then an integer label; a leading non-numeric
// header line is skipped.
Dataset load_csv(const std::string& path);

}  // namespace dfl::data
