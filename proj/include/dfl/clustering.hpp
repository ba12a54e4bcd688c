#pragma once

#include <cstdint>
#include <vector>

#include "dfl/sim.hpp"

namespace dfl::clustering {

enum class Criterion { Geographic, EMD };

struct ClusteringConfig {
    int k_init = 4;
    int max_iterations = 5;
    Criterion criterion = Criterion::Geographic;

    void validate(int device_count) const;
};

// How a device ended up in its cluster; lets tests check the range rule that
// admitted each member.
enum class Admission {
    Head,           // the cluster head itself
    NearestHead,    // joined the nearest head within range
    NearestDevice,  // no head in range; adopted the cluster of `via`
    NewHead,        // no head and no assigned device reachable; promoted
};

struct MemberRecord {
    int device = -1;
    Admission rule = Admission::Head;
    int via = -1;  // the adopted neighbour for NearestDevice, else -1
};

struct ClusterAssignment {
    int cluster_id = -1;
    int head = -1;
    std::vector<int> members;  // sorted, includes head
    std::vector<MemberRecord> records;
};

struct ClusterRound {
    std::vector<ClusterAssignment> clusters;
    int iterations_used = 0;

    int cluster_of(int device_id) const;  // -1 when absent
};

// Range-limited distributed K-means over device positions: members join the
// nearest head in range, fall back to the nearest already-assigned in-range
// device, or become new heads when unreachable; heads update to the cluster
// medoid until the head set stabilises or max_iterations is hit.
ClusterRound dk_means(const std::vector<sim::DeviceState>& devices, const sim::TopologyGraph& graph,
                      const ClusteringConfig& cfg, std::uint64_t seed);

// Same control flow with pairwise distance replaced by the earth mover's
// distance between shard label distributions; range checks stay geometric.
ClusterRound dk_means_emd(const std::vector<sim::DeviceState>& devices,
                          const sim::TopologyGraph& graph, const ClusteringConfig& cfg,
                          std::uint64_t seed);

// True iff the head id sets are equal.
bool head_stability(const std::vector<int>& prev_heads, const std::vector<int>& new_heads);

}  // namespace dfl::clustering
