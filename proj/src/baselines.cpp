#include "dfl/baselines.hpp"

#include <algorithm>
#include <stdexcept>

#include "dfl/gossip.hpp"
#include "dfl/rng.hpp"

namespace dfl::baselines {

void cfl_round(CflState& state, std::vector<sim::DeviceState>& devices,
               const model::ModelShape& shape, int epochs, int batch_size, std::uint64_t seed) {
    if (devices.empty()) throw std::invalid_argument("cfl_round: no devices");
    if (state.global_params.values.size() != static_cast<std::size_t>(shape.param_count()))
        throw std::invalid_argument("cfl_round: global model does not match the shape");

    for (auto& d : devices) {
        d.params = state.global_params;
        d.params.sample_count = 0;  // evidence is earned by training, not inherited
        d.opt.reset();
        Rng rng(derive_seed(seed, {stream::kTraining, static_cast<std::uint64_t>(state.round),
                                   static_cast<std::uint64_t>(d.id)}));
        sim::train_local(d, shape, epochs, batch_size, rng);
    }

    gossip::Accumulator acc;
    for (const auto& d : devices)
        if (d.params.sample_count > 0) acc.accumulate(d.params);
    if (!acc.empty()) state.global_params = acc.finalise();
    ++state.round;
}

CflMetrics cfl_evaluate(const CflState& state, const std::vector<sim::DeviceState>& devices,
                        const model::ModelShape& shape, const data::DatasetView& test_set) {
    CflMetrics out;
    out.global = model::evaluate(state.global_params, shape, test_set);
    double weighted = 0.0;
    double total = 0.0;
    for (const auto& d : devices) {
        double w = static_cast<double>(d.shard.size());
        if (w <= 0.0) continue;
        weighted += w * model::evaluate(d.params, shape, test_set).accuracy;
        total += w;
    }
    out.device_weighted_accuracy = total > 0.0 ? weighted / total : 0.0;
    return out;
}

LocalReport local_only(std::vector<sim::DeviceState>& devices, const model::ModelShape& shape,
                       int epochs, int batch_size, const data::DatasetView& test_set,
                       std::uint64_t seed) {
    if (devices.empty()) throw std::invalid_argument("local_only: no devices");

    LocalReport out;
    for (auto& d : devices) {
        Rng rng(derive_seed(seed, {stream::kTraining, static_cast<std::uint64_t>(d.id)}));
        sim::train_local(d, shape, epochs, batch_size, rng);
        out.per_device.push_back(model::evaluate(d.params, shape, test_set));
    }

    // union of all shards, trained from scratch with the first device's
    // optimiser settings
    const data::Dataset* base = nullptr;
    std::vector<int> all_idx;
    for (const auto& d : devices) {
        if (d.shard.base == nullptr) continue;
        if (base == nullptr) base = d.shard.base;
        if (d.shard.base != base)
            throw std::invalid_argument("local_only: shards reference different datasets");
        all_idx.insert(all_idx.end(), d.shard.idx.begin(), d.shard.idx.end());
    }
    if (base == nullptr) throw std::invalid_argument("local_only: no device holds a shard");
    std::sort(all_idx.begin(), all_idx.end());

    data::DatasetView full{base, std::move(all_idx)};
    ParamVector params = ParamVector::zeros(shape.param_count());
    model::OptimiserState opt = devices.front().opt;
    opt.reset();
    Rng rng(derive_seed(seed, {stream::kTraining, static_cast<std::uint64_t>(devices.size())}));
    model::train(params, opt, shape, full, epochs, batch_size, rng);
    out.full_data = model::evaluate(params, shape, test_set);
    return out;
}

}  // namespace dfl::baselines
