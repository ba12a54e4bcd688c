#pragma once

#include <cstdint>
#include <set>
#include <vector>

#include "dfl/data.hpp"
#include "dfl/model.hpp"
#include "dfl/param_vector.hpp"
#include "dfl/rng.hpp"

namespace dfl::sim {

struct FieldConfig {
    double field_size = 100.0;
    int device_count = 30;
    double comm_range = 60.0;
    double speed = 0.5;  // units per mobility step
    std::uint64_t seed = 0;

    void validate() const;
};

struct Message {
    int from = -1;
    ParamVector payload;
};

struct DeviceState {
    int id = -1;
    double x = 0.0;
    double y = 0.0;
    double speed = 0.0;
    double heading = 0.0;  // radians
    double comm_range = 0.0;
    data::DatasetView shard;
    ParamVector params;
    model::OptimiserState opt;
    std::set<int> contacted;       // peers paired with in the current gossip phase
    std::vector<Message> inbox;
    bool training_skipped = false;  // set when the shard was empty this round
};

// Symmetric connectivity snapshot. adj holds sorted neighbour lists under the
// range rule; mixing is the lazy Metropolis matrix built on those edges:
// W_ij = 1/(2 max(deg_i, deg_j)) on edges, W_ii absorbs the remainder.
struct TopologyGraph {
    int n = 0;
    std::vector<std::vector<int>> adj;
    std::vector<double> mixing;  // n*n row-major

    double mixing_at(int i, int j) const { return mixing[static_cast<std::size_t>(i) * n + j]; }
    bool edge(int i, int j) const;
    int connected_components() const;
};

// Devices on a seeded uniform layout with zero-initialised models. Shards are
// assigned by device id; ids are 0..n-1.
std::vector<DeviceState> make_devices(const FieldConfig& field,
                                      const std::vector<data::DatasetView>& shards,
                                      const model::ModelShape& shape,
                                      const model::OptimiserState& opt_template);

// Moves every device speed*dt along its heading with seeded Gaussian heading
// noise (sigma 0.3 rad); field boundaries reflect.
void step_mobility(std::vector<DeviceState>& devices, double field_size, double dt, Rng& rng);

TopologyGraph snapshot_topology(const std::vector<DeviceState>& devices);

// Builds the lazy Metropolis graph over an explicit edge set; used for the
// intra/inter eligibility subgraphs and for test fixtures.
TopologyGraph build_graph(int n, const std::vector<std::pair<int, int>>& edges);

std::vector<int> neighbours(int device_id, const TopologyGraph& graph);

// Copies the payload into the receiver's inbox. Sending outside the mutual
// communication range is a protocol bug and throws.
void deliver(std::vector<DeviceState>& devices, int sender, int receiver,
             const ParamVector& payload);

// Local-update step of a round: seeded mini-batch training over the device's
// shard. An empty shard flags the device and leaves its model unchanged.
void train_local(DeviceState& device, const model::ModelShape& shape, int epochs, int batch_size,
                 Rng& rng);

}  // namespace dfl::sim
