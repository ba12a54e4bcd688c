#pragma once

#include <cstdint>
#include <vector>

#include "dfl/data.hpp"
#include "dfl/model.hpp"
#include "dfl/param_vector.hpp"
#include "dfl/sim.hpp"

namespace dfl::baselines {

// Server-coordinated FedAvg. The server is a plain value, not a device.
struct CflState {
    ParamVector global_params;
    int round = 0;
};

// Broadcast the global model, train every device locally, then replace the
// global model with the sample-weighted mean of the results. Aggregation goes
// through the same accumulator the gossip layer uses.
void cfl_round(CflState& state, std::vector<sim::DeviceState>& devices,
               const model::ModelShape& shape, int epochs, int batch_size, std::uint64_t seed);

struct CflMetrics {
    model::EvalResult global;                // global model on the held-out test set
    double device_weighted_accuracy = 0.0;   // per-device accuracy weighted by shard size
};

CflMetrics cfl_evaluate(const CflState& state, const std::vector<sim::DeviceState>& devices,
                        const model::ModelShape& shape, const data::DatasetView& test_set);

struct LocalReport {
    std::vector<model::EvalResult> per_device;
    model::EvalResult full_data;  // one model trained on the union of all shards
};

// Isolated training, no communication. The full-data model is the
// upper-bound reference trained with the same optimiser settings.
LocalReport local_only(std::vector<sim::DeviceState>& devices, const model::ModelShape& shape,
                       int epochs, int batch_size, const data::DatasetView& test_set,
                       std::uint64_t seed);

}  // namespace dfl::baselines
