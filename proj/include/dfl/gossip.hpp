#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dfl/clustering.hpp"
#include "dfl/param_vector.hpp"
#include "dfl/rng.hpp"
#include "dfl/sim.hpp"

namespace dfl::gossip {

enum class MixingMode {
    CumulativeFedAvg,  // fold peer models into a running weighted sum, divide at phase end
    FixedAlpha,        // x_i <- alpha*x_i + (1-alpha)*x_j applied immediately per exchange
};

struct GossipConfig {
    int intra_rounds = 3;
    int inter_rounds = 2;
    MixingMode mode = MixingMode::CumulativeFedAvg;
    double alpha = 0.5;            // FixedAlpha only, must sit strictly inside (0,1)
    bool heads_only_inter = false; // restrict inter-cluster exchange to cluster heads
    bool resnapshot_each_iteration = false;

    void validate() const;
};

// Streaming sample-weighted model average. Holds one vector regardless of how
// many contributions arrive.
struct Accumulator {
    std::vector<double> weighted_sum;
    std::int64_t total_count = 0;

    // adds incoming.values * incoming.sample_count; rejects zero-evidence models
    void accumulate(const ParamVector& incoming);
    // weighted mean of everything folded so far; throws if nothing was folded
    ParamVector finalise() const;
    bool empty() const { return total_count == 0; }
};

// convex combination alpha*own + (1-alpha)*peer; own sample_count is kept
ParamVector mix_fixed_alpha(const ParamVector& own, const ParamVector& peer, double alpha);

enum class Phase { Intra, Inter };

struct Pairing {
    int a = -1;
    int b = -1;
};

// Topology restricted to the edges a phase may use: intra keeps same-cluster
// edges, inter keeps cross-cluster edges (optionally heads only). Mixing
// weights are rebuilt for the restricted edge set.
sim::TopologyGraph eligible_subgraph(const sim::TopologyGraph& topo,
                                     const clustering::ClusterRound& clusters, Phase phase,
                                     bool heads_only_inter = false);

// One gossip iteration's random maximal matching over the eligible graph.
// Devices propose to a random eligible neighbour, preferring peers they have
// not contacted this phase; conflicts are resolved in a seeded random order
// and leftover devices are matched greedily in that same order. Pairs are
// recorded in each endpoint's contacted set.
std::vector<Pairing> pair_devices(std::vector<sim::DeviceState>& devices,
                                  const sim::TopologyGraph& eligible, Rng& rng);

struct PhaseReport {
    Phase phase = Phase::Intra;
    std::vector<std::vector<Pairing>> pairings;  // one entry per gossip iteration
    std::vector<double> consensus_after;         // global consensus error after each iteration
    int messages = 0;                            // two per exchange, one per direction
    sim::TopologyGraph graph;                    // eligible subgraph the phase ran on
};

PhaseReport run_intra_phase(std::vector<sim::DeviceState>& devices,
                            const clustering::ClusterRound& clusters,
                            const sim::TopologyGraph& topo, const GossipConfig& cfg,
                            std::uint64_t seed);

PhaseReport run_inter_phase(std::vector<sim::DeviceState>& devices,
                            const clustering::ClusterRound& clusters,
                            const sim::TopologyGraph& topo, const GossipConfig& cfg,
                            std::uint64_t seed);

// Local-training knobs one full round needs besides the gossip config.
struct RoundSchedule {
    model::ModelShape shape;
    int epochs = 2;
    int batch_size = 128;
    double mobility_dt = 1.0;
};

struct RoundReport {
    int round = 0;
    int cluster_count = 0;
    int clustering_iterations = 0;
    PhaseReport intra;
    PhaseReport inter;
    std::vector<double> consensus_distance;  // per device, after both phases
    int messages = 0;

    // single-line JSON object (pairings, consensus, counters; graphs omitted)
    std::string to_json_line() const;
};

// One bilayer round: cluster, train locally, gossip within clusters, gossip
// across clusters, then move the devices.
RoundReport run_round(std::vector<sim::DeviceState>& devices, const sim::FieldConfig& field,
                      const GossipConfig& gcfg, const clustering::ClusteringConfig& ccfg,
                      const RoundSchedule& sched, std::uint64_t seed, int round_index);

}  // namespace dfl::gossip
