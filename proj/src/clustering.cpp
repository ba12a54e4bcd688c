#include "dfl/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dfl::clustering {

void ClusteringConfig::validate(int device_count) const {
    if (k_init < 1) throw std::invalid_argument("ClusteringConfig: k_init must be positive");
    if (k_init > device_count)
        throw std::invalid_argument("ClusteringConfig: k_init exceeds device count");
    if (max_iterations < 1)
        throw std::invalid_argument("ClusteringConfig: max_iterations must be positive");
}

int ClusterRound::cluster_of(int device_id) const {
    for (const auto& c : clusters)
        if (std::binary_search(c.members.begin(), c.members.end(), device_id)) return c.cluster_id;
    return -1;
}

bool head_stability(const std::vector<int>& prev_heads, const std::vector<int>& new_heads) {
    std::vector<int> a = prev_heads;
    std::vector<int> b = new_heads;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    return a == b;
}

namespace {

double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

// EMD over label histograms: sum of absolute CDF differences.
double emd_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double cdf = 0.0, total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cdf += a[i] - b[i];
        total += std::abs(cdf);
    }
    return total;
}

struct Assignment {
    std::vector<int> cluster_of;        // device -> position in heads list
    std::vector<MemberRecord> records;  // per device
    std::vector<int> heads;             // grows when devices are promoted
};

// One assignment sweep given fixed head positions. Devices that can reach no
// head and no already-assigned device are promoted to new heads, lowest id
// first, and the sweep continues so their component can join them.
Assignment assign_devices(int n, const sim::TopologyGraph& graph,
                          const std::vector<std::vector<double>>& profile,
                          double (*dist)(const std::vector<double>&, const std::vector<double>&),
                          std::vector<int> heads) {
    Assignment out;
    out.cluster_of.assign(static_cast<std::size_t>(n), -1);
    out.records.assign(static_cast<std::size_t>(n), MemberRecord{});
    out.heads = std::move(heads);

    auto set_head = [&](int d, Admission rule) {
        out.cluster_of[static_cast<std::size_t>(d)] = static_cast<int>(
            std::find(out.heads.begin(), out.heads.end(), d) - out.heads.begin());
        out.records[static_cast<std::size_t>(d)] = MemberRecord{d, rule, -1};
    };
    for (int h : out.heads) set_head(h, Admission::Head);

    int assigned = static_cast<int>(out.heads.size());
    while (assigned < n) {
        bool changed = true;
        while (changed) {
            changed = false;
            for (int d = 0; d < n; ++d) {
                if (out.cluster_of[static_cast<std::size_t>(d)] >= 0) continue;
                // nearest head within range
                int best_head = -1;
                double best = 0.0;
                for (int h : out.heads) {
                    if (!graph.edge(d, h)) continue;
                    double dd = dist(profile[static_cast<std::size_t>(d)],
                                     profile[static_cast<std::size_t>(h)]);
                    if (best_head < 0 || dd < best || (dd == best && h < best_head)) {
                        best_head = h;
                        best = dd;
                    }
                }
                if (best_head >= 0) {
                    out.cluster_of[static_cast<std::size_t>(d)] =
                        out.cluster_of[static_cast<std::size_t>(best_head)];
                    out.records[static_cast<std::size_t>(d)] =
                        MemberRecord{d, Admission::NearestHead, best_head};
                    ++assigned;
                    changed = true;
                    continue;
                }
                // nearest in-range device that already has a cluster
                int best_dev = -1;
                for (int j : graph.adj[static_cast<std::size_t>(d)]) {
                    if (out.cluster_of[static_cast<std::size_t>(j)] < 0) continue;
                    double dd = dist(profile[static_cast<std::size_t>(d)],
                                     profile[static_cast<std::size_t>(j)]);
                    if (best_dev < 0 || dd < best || (dd == best && j < best_dev)) {
                        best_dev = j;
                        best = dd;
                    }
                }
                if (best_dev >= 0) {
                    out.cluster_of[static_cast<std::size_t>(d)] =
                        out.cluster_of[static_cast<std::size_t>(best_dev)];
                    out.records[static_cast<std::size_t>(d)] =
                        MemberRecord{d, Admission::NearestDevice, best_dev};
                    ++assigned;
                    changed = true;
                }
            }
        }
        if (assigned < n) {
            // lowest unassigned device becomes a new head (isolated device or
            // headless component)
            for (int d = 0; d < n; ++d) {
                if (out.cluster_of[static_cast<std::size_t>(d)] < 0) {
                    out.heads.push_back(d);
                    set_head(d, Admission::NewHead);
                    ++assigned;
                    break;
                }
            }
        }
    }
    return out;
}

ClusterRound run_dk_means(const std::vector<sim::DeviceState>& devices,
                          const sim::TopologyGraph& graph, const ClusteringConfig& cfg,
                          std::uint64_t seed,
                          const std::vector<std::vector<double>>& profile,
                          double (*dist)(const std::vector<double>&, const std::vector<double>&)) {
    int n = static_cast<int>(devices.size());
    cfg.validate(n);

    Rng rng(derive_seed(seed, {stream::kClustering}));
    std::vector<int> ids(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) ids[static_cast<std::size_t>(i)] = i;
    rng.shuffle(ids);
    std::vector<int> heads(ids.begin(), ids.begin() + cfg.k_init);

    Assignment asg;
    int iterations = 0;
    for (int t = 0; t < cfg.max_iterations; ++t) {
        ++iterations;
        asg = assign_devices(n, graph, profile, dist, heads);

        // medoid update: member closest to the member centroid
        std::vector<int> new_heads(asg.heads.size(), -1);
        for (std::size_t c = 0; c < asg.heads.size(); ++c) {
            std::vector<int> members;
            for (int d = 0; d < n; ++d)
                if (asg.cluster_of[static_cast<std::size_t>(d)] == static_cast<int>(c))
                    members.push_back(d);
            if (members.empty()) {
                // unreachable while heads seed their own clusters; mirror the
                // random-reassignment rule, excluding current heads
                std::vector<int> pool;
                for (int d = 0; d < n; ++d)
                    if (std::find(asg.heads.begin(), asg.heads.end(), d) == asg.heads.end())
                        pool.push_back(d);
                new_heads[c] = pool.empty() ? asg.heads[c]
                                            : pool[static_cast<std::size_t>(rng.uniform_int(
                                                  0, static_cast<int>(pool.size()) - 1))];
                continue;
            }
            std::vector<double> centroid(profile[0].size(), 0.0);
            for (int m : members)
                for (std::size_t k = 0; k < centroid.size(); ++k)
                    centroid[k] += profile[static_cast<std::size_t>(m)][k];
            for (auto& v : centroid) v /= static_cast<double>(members.size());
            int medoid = -1;
            double best = 0.0;
            for (int m : members) {
                double dd = dist(profile[static_cast<std::size_t>(m)], centroid);
                if (medoid < 0 || dd < best || (dd == best && m < medoid)) {
                    medoid = m;
                    best = dd;
                }
            }
            new_heads[c] = medoid;
        }

        bool stable = head_stability(heads, new_heads);
        heads = new_heads;
        if (stable) break;
    }

    // Final membership under the settled heads. On a stability exit this
    // re-derives the same assignment (a stable head set is identical per
    // cluster); on a max_iterations exit it realigns members and admission
    // records with the heads actually reported.
    asg = assign_devices(n, graph, profile, dist, heads);
    heads = asg.heads;  // promotion may still add isolated heads

    ClusterRound round;
    round.iterations_used = iterations;
    std::vector<std::size_t> order(asg.heads.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return heads[a] < heads[b]; });
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        std::size_t c = order[rank];
        ClusterAssignment ca;
        ca.cluster_id = static_cast<int>(rank);
        ca.head = heads[c];
        for (int d = 0; d < n; ++d)
            if (asg.cluster_of[static_cast<std::size_t>(d)] == static_cast<int>(c)) {
                ca.members.push_back(d);
                ca.records.push_back(asg.records[static_cast<std::size_t>(d)]);
            }
        round.clusters.push_back(std::move(ca));
    }
    return round;
}

}  // namespace

ClusterRound dk_means(const std::vector<sim::DeviceState>& devices, const sim::TopologyGraph& graph,
                      const ClusteringConfig& cfg, std::uint64_t seed) {
    if (devices.empty()) throw std::invalid_argument("dk_means: no devices");
    std::vector<std::vector<double>> profile;
    profile.reserve(devices.size());
    for (const auto& d : devices) profile.push_back({d.x, d.y});
    return run_dk_means(devices, graph, cfg, seed, profile, &euclidean);
}

ClusterRound dk_means_emd(const std::vector<sim::DeviceState>& devices,
                          const sim::TopologyGraph& graph, const ClusteringConfig& cfg,
                          std::uint64_t seed) {
    if (devices.empty()) throw std::invalid_argument("dk_means_emd: no devices");
    std::vector<std::vector<double>> profile;
    profile.reserve(devices.size());
    for (const auto& d : devices) {
        if (d.shard.empty())
            throw std::invalid_argument("dk_means_emd: device " + std::to_string(d.id) +
                                        " has an empty shard");
        profile.push_back(data::label_distribution(d.shard).proportions);
    }
    return run_dk_means(devices, graph, cfg, seed, profile, &emd_dist);
}

}  // namespace dfl::clustering
