#include "dfl/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "dfl/rng.hpp"

namespace dfl::data {

Dataset generate_blobs(int class_count, int per_class, int input_dim, double spread,
                       std::uint64_t seed) {
    if (class_count < 1 || per_class < 1 || input_dim < 1)
        throw std::invalid_argument("generate_blobs: counts must be positive");
    if (spread < 0.0) throw std::invalid_argument("generate_blobs: spread must be >= 0");

    Rng rng(derive_seed(seed, {stream::kDataset}));
    std::vector<std::vector<double>> means(static_cast<std::size_t>(class_count));
    for (auto& m : means) {
        m.resize(static_cast<std::size_t>(input_dim));
        for (auto& v : m) v = rng.uniform(-5.0, 5.0);
    }

    Dataset ds;
    ds.class_count = class_count;
    ds.input_dim = input_dim;
    ds.samples.reserve(static_cast<std::size_t>(class_count) * per_class);
    for (int c = 0; c < class_count; ++c) {
        for (int i = 0; i < per_class; ++i) {
            Sample s;
            s.y = c;
            s.x.resize(static_cast<std::size_t>(input_dim));
            for (int j = 0; j < input_dim; ++j)
                s.x[static_cast<std::size_t>(j)] =
                    means[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)] +
                    spread * rng.normal();
            ds.samples.push_back(std::move(s));
        }
    }
    return ds;
}

namespace {

std::vector<std::vector<int>> indices_by_class(const DatasetView& pool) {
    if (pool.base == nullptr) throw std::invalid_argument("partition: view has no dataset");
    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(pool.base->class_count));
    for (std::size_t i = 0; i < pool.size(); ++i) {
        int y = pool.sample(i).y;
        if (y < 0 || y >= pool.base->class_count)
            throw std::invalid_argument("dataset label out of range");
        by_class[static_cast<std::size_t>(y)].push_back(pool.idx[i]);
    }
    return by_class;
}

std::vector<DatasetView> views_from_lists(const Dataset* ds, std::vector<std::vector<int>> lists) {
    std::vector<DatasetView> shards;
    shards.reserve(lists.size());
    for (auto& l : lists) {
        std::sort(l.begin(), l.end());
        shards.push_back(DatasetView{ds, std::move(l)});
    }
    return shards;
}

DatasetView whole(const Dataset& ds) {
    DatasetView v{&ds, {}};
    v.idx.resize(ds.size());
    std::iota(v.idx.begin(), v.idx.end(), 0);
    return v;
}

}  // namespace

std::vector<DatasetView> partition_iid(const DatasetView& pool, int device_count,
                                       std::uint64_t seed) {
    if (device_count < 1) throw std::invalid_argument("partition_iid: device_count must be positive");
    if (pool.size() < static_cast<std::size_t>(device_count))
        throw std::invalid_argument("partition_iid: dataset smaller than device count");

    auto by_class = indices_by_class(pool);
    for (std::size_t c = 0; c < by_class.size(); ++c)
        if (by_class[c].size() < static_cast<std::size_t>(device_count))
            throw std::invalid_argument(
                "partition_iid: class " + std::to_string(c) + " has fewer samples than devices");

    Rng rng(derive_seed(seed, {stream::kPartition}));
    std::vector<std::vector<int>> lists(static_cast<std::size_t>(device_count));
    for (int c = 0; c < pool.base->class_count; ++c) {
        auto& cls = by_class[static_cast<std::size_t>(c)];
        rng.shuffle(cls);
        // rotate the dealing start per class so remainder samples spread out
        for (std::size_t i = 0; i < cls.size(); ++i) {
            int dev = static_cast<int>((i + static_cast<std::size_t>(c)) % device_count);
            lists[static_cast<std::size_t>(dev)].push_back(cls[i]);
        }
    }
    return views_from_lists(pool.base, std::move(lists));
}

std::vector<DatasetView> partition_iid(const Dataset& ds, int device_count, std::uint64_t seed) {
    return partition_iid(whole(ds), device_count, seed);
}

std::vector<DatasetView> partition_dirichlet(const DatasetView& pool, int device_count,
                                             double alpha, std::uint64_t seed) {
    if (device_count < 1)
        throw std::invalid_argument("partition_dirichlet: device_count must be positive");
    if (alpha <= 0.0) throw std::invalid_argument("partition_dirichlet: alpha must be positive");

    auto by_class = indices_by_class(pool);
    Rng rng(derive_seed(seed, {stream::kPartition}));
    std::vector<std::vector<int>> lists(static_cast<std::size_t>(device_count));

    for (int c = 0; c < pool.base->class_count; ++c) {
        auto& cls = by_class[static_cast<std::size_t>(c)];
        rng.shuffle(cls);
        auto props = rng.dirichlet(alpha, device_count);

        // largest-remainder rounding of props * |class|
        std::vector<int> counts(static_cast<std::size_t>(device_count), 0);
        std::vector<std::pair<double, int>> remainders;
        int assigned = 0;
        for (int d = 0; d < device_count; ++d) {
            double target = props[static_cast<std::size_t>(d)] * static_cast<double>(cls.size());
            counts[static_cast<std::size_t>(d)] = static_cast<int>(std::floor(target));
            assigned += counts[static_cast<std::size_t>(d)];
            remainders.emplace_back(target - std::floor(target), d);
        }
        std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        for (int k = 0; k < static_cast<int>(cls.size()) - assigned; ++k)
            counts[static_cast<std::size_t>(remainders[static_cast<std::size_t>(k)].second)] += 1;

        std::size_t off = 0;
        for (int d = 0; d < device_count; ++d) {
            for (int k = 0; k < counts[static_cast<std::size_t>(d)]; ++k)
                lists[static_cast<std::size_t>(d)].push_back(cls[off++]);
        }
    }

    // repair empty shards: steal one sample from the largest shard
    for (;;) {
        int empty = -1;
        for (int d = 0; d < device_count; ++d)
            if (lists[static_cast<std::size_t>(d)].empty()) {
                empty = d;
                break;
            }
        if (empty < 0) break;
        int largest = 0;
        for (int d = 1; d < device_count; ++d)
            if (lists[static_cast<std::size_t>(d)].size() > lists[static_cast<std::size_t>(largest)].size())
                largest = d;
        if (lists[static_cast<std::size_t>(largest)].size() <= 1)
            throw std::invalid_argument("partition_dirichlet: not enough samples to fill all devices");
        lists[static_cast<std::size_t>(empty)].push_back(lists[static_cast<std::size_t>(largest)].back());
        lists[static_cast<std::size_t>(largest)].pop_back();
    }
    return views_from_lists(pool.base, std::move(lists));
}

std::vector<DatasetView> partition_dirichlet(const Dataset& ds, int device_count, double alpha,
                                             std::uint64_t seed) {
    return partition_dirichlet(whole(ds), device_count, alpha, seed);
}

LabelDistribution label_distribution(const DatasetView& shard) {
    if (shard.empty()) throw std::invalid_argument("label_distribution: empty shard");
    LabelDistribution dist;
    dist.proportions.assign(static_cast<std::size_t>(shard.base->class_count), 0.0);
    for (std::size_t i = 0; i < shard.size(); ++i)
        dist.proportions[static_cast<std::size_t>(shard.sample(i).y)] += 1.0;
    for (auto& p : dist.proportions) p /= static_cast<double>(shard.size());
    return dist;
}

double emd(const LabelDistribution& p, const LabelDistribution& q) {
    if (p.proportions.size() != q.proportions.size())
        throw std::invalid_argument("emd: distributions have different class counts");
    double cdf_diff = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < p.proportions.size(); ++i) {
        cdf_diff += p.proportions[i] - q.proportions[i];
        total += std::abs(cdf_diff);
    }
    return total;
}

std::pair<DatasetView, DatasetView> train_test_split(const Dataset& ds, double test_fraction,
                                                     std::uint64_t seed) {
    if (test_fraction < 0.0 || test_fraction >= 1.0)
        throw std::invalid_argument("train_test_split: test_fraction must be in [0, 1)");
    auto by_class = indices_by_class(whole(ds));
    Rng rng(derive_seed(seed, {stream::kTestSplit}));
    std::vector<int> train_idx, test_idx;
    for (auto& pool : by_class) {
        rng.shuffle(pool);
        auto n_test = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(pool.size())));
        for (std::size_t i = 0; i < pool.size(); ++i)
            (i < n_test ? test_idx : train_idx).push_back(pool[i]);
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    return {DatasetView{&ds, std::move(train_idx)}, DatasetView{&ds, std::move(test_idx)}};
}

Dataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("load_csv: cannot open " + path);

    Dataset ds;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> fields;
        std::stringstream ss(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t pos = 0;
                double v = std::stod(cell, &pos);
                while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) ++pos;
                if (pos != cell.size()) {
                    numeric = false;
                    break;
                }
                fields.push_back(v);
            } catch (const std::exception&) {
                numeric = false;
                break;
            }
        }
        if (!numeric) {
            if (first) {
                first = false;
                continue;  // header
            }
            throw std::invalid_argument("load_csv: non-numeric row in " + path);
        }
        first = false;
        if (fields.size() < 2) throw std::invalid_argument("load_csv: row needs features and a label");
        Sample s;
        s.x.assign(fields.begin(), fields.end() - 1);
        double lbl = fields.back();
        if (lbl != std::floor(lbl) || lbl < 0)
            throw std::invalid_argument("load_csv: label must be a non-negative integer");
        s.y = static_cast<int>(lbl);
        if (ds.samples.empty()) {
            ds.input_dim = static_cast<int>(s.x.size());
        } else if (static_cast<int>(s.x.size()) != ds.input_dim) {
            throw std::invalid_argument("load_csv: inconsistent feature dimension");
        }
        ds.class_count = std::max(ds.class_count, s.y + 1);
        ds.samples.push_back(std::move(s));
    }
    if (ds.samples.empty()) throw std::invalid_argument("load_csv: no samples in " + path);
    return ds;
}

}  // namespace dfl::data
