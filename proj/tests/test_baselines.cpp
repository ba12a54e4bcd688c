#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "dfl/baselines.hpp"
#include "dfl/data.hpp"
#include "dfl/gossip.hpp"
#include "dfl/model.hpp"
#include "dfl/rng.hpp"
#include "dfl/sim.hpp"
#include "doctest.h"

using namespace dfl;
using namespace dfl::baselines;

namespace {

data::DatasetView whole(const data::Dataset& ds) {
    std::vector<int> idx(ds.size());
    std::iota(idx.begin(), idx.end(), 0);
    return data::DatasetView{&ds, std::move(idx)};
}

sim::DeviceState manual_device(int id, data::DatasetView shard, std::size_t param_count,
                               const model::OptimiserState& opt) {
    sim::DeviceState d;
    d.id = id;
    d.shard = std::move(shard);
    d.params = ParamVector::zeros(param_count);
    d.opt = opt;
    return d;
}

// four linearly separable samples, two per class, features one-hot on the label
data::Dataset toy_two_class() {
    data::Dataset ds;
    ds.class_count = 2;
    ds.input_dim = 2;
    ds.samples = {{{1.0, 0.0}, 0}, {{0.0, 1.0}, 1}, {{1.0, 0.0}, 0}, {{0.0, 1.0}, 1}};
    return ds;
}

// logits 20*x0 vs 20*x1 classify the toy set perfectly
ParamVector perfect_toy_params() {
    ParamVector p = ParamVector::zeros(6);
    p.values[0] = 20.0;  // W(0,0)
    p.values[3] = 20.0;  // W(1,1)
    return p;
}

// a large class-0 bias drowns out every feature
ParamVector constant_zero_params() {
    ParamVector p = ParamVector::zeros(6);
    p.values[4] = 10.0;  // b(0)
    return p;
}

}  // namespace

TEST_CASE("single device round reduces to direct training") {
    auto ds = data::generate_blobs(2, 16, 4, 1.0, 11);
    model::ModelShape shape{4, 2, 0};
    auto opt = model::OptimiserState::adam(0.05);

    std::vector<sim::DeviceState> devs = {manual_device(0, whole(ds), shape.param_count(), opt)};
    CflState st;
    st.global_params = ParamVector::zeros(shape.param_count());
    cfl_round(st, devs, shape, 2, 8, 7);

    // replay the same training outside the server loop
    ParamVector oracle = ParamVector::zeros(shape.param_count());
    auto oracle_opt = opt;
    oracle_opt.reset();
    Rng rng(derive_seed(7, {stream::kTraining, 0, 0}));
    model::train(oracle, oracle_opt, shape, whole(ds), 2, 8, rng);

    REQUIRE(st.global_params.values.size() == oracle.values.size());
    // 32 samples: the weighted mean is w*32/32, exact in binary floating point
    for (std::size_t k = 0; k < oracle.values.size(); ++k)
        CHECK(st.global_params.values[k] == oracle.values[k]);
    CHECK(st.global_params.sample_count == 32);
    CHECK(st.round == 1);
    // the device keeps its own trained model until the next broadcast
    CHECK(devs[0].params.values == oracle.values);
}

TEST_CASE("zero epochs leave the global model untouched") {
    auto ds = data::generate_blobs(2, 8, 4, 1.0, 3);
    model::ModelShape shape{4, 2, 0};
    auto opt = model::OptimiserState::sgd(0.1);

    std::vector<sim::DeviceState> devs = {manual_device(0, whole(ds), shape.param_count(), opt)};
    CflState st;
    st.global_params = ParamVector(std::vector<double>(shape.param_count(), 0.25), 99);
    cfl_round(st, devs, shape, 0, 8, 7);

    // no training happened, so no device earned sample evidence
    for (double v : st.global_params.values) CHECK(v == 0.25);
    CHECK(st.round == 1);
    CHECK(devs[0].params.sample_count == 0);
    CHECK(!devs[0].training_skipped);
}

TEST_CASE("a round of empty shards keeps the previous global model") {
    model::ModelShape shape{4, 2, 0};
    auto opt = model::OptimiserState::sgd(0.1);
    std::vector<sim::DeviceState> devs = {
        manual_device(0, data::DatasetView{}, shape.param_count(), opt),
        manual_device(1, data::DatasetView{}, shape.param_count(), opt)};

    CflState st;
    st.global_params = ParamVector(std::vector<double>(shape.param_count(), 0.5), 10);
    cfl_round(st, devs, shape, 2, 8, 7);

    for (double v : st.global_params.values) CHECK(v == 0.5);
    CHECK(st.round == 1);
    CHECK(devs[0].training_skipped);
    CHECK(devs[1].training_skipped);
}

TEST_CASE("round replay reproduces the aggregate bit for bit") {
    auto ds = data::generate_blobs(2, 16, 4, 2.0, 21);
    model::ModelShape shape{4, 2, 0};
    auto opt = model::OptimiserState::adam(0.05);

    // unequal shards: 16, 8, and 8 samples
    std::vector<int> all(ds.size());
    std::iota(all.begin(), all.end(), 0);
    std::vector<data::DatasetView> shards = {
        {&ds, std::vector<int>(all.begin(), all.begin() + 16)},
        {&ds, std::vector<int>(all.begin() + 16, all.begin() + 24)},
        {&ds, std::vector<int>(all.begin() + 24, all.end())}};

    std::vector<sim::DeviceState> devs;
    for (int i = 0; i < 3; ++i)
        devs.push_back(manual_device(i, shards[static_cast<std::size_t>(i)], shape.param_count(), opt));
    CflState st;
    st.global_params = ParamVector::zeros(shape.param_count());
    cfl_round(st, devs, shape, 2, 8, 13);

    // manual replay: broadcast, per-device seeded training, weighted mean
    gossip::Accumulator acc;
    for (int i = 0; i < 3; ++i) {
        ParamVector p = ParamVector::zeros(shape.param_count());
        auto o = opt;
        o.reset();
        Rng rng(derive_seed(13, {stream::kTraining, 0, static_cast<std::uint64_t>(i)}));
        model::train(p, o, shape, shards[static_cast<std::size_t>(i)], 2, 8, rng);
        acc.accumulate(p);
    }
    ParamVector expected = acc.finalise();

    CHECK(st.global_params.sample_count == 32);
    REQUIRE(st.global_params.values.size() == expected.values.size());
    for (std::size_t k = 0; k < expected.values.size(); ++k)
        CHECK(st.global_params.values[k] == expected.values[k]);
}

TEST_CASE("consecutive rounds are deterministic across reruns") {
    auto ds = data::generate_blobs(3, 12, 4, 2.0, 9);
    model::ModelShape shape{4, 3, 0};
    auto opt = model::OptimiserState::adam(0.05);

    auto run_two_rounds = [&]() {
        auto shards = data::partition_iid(ds, 3, 5);
        std::vector<sim::DeviceState> devs;
        for (int i = 0; i < 3; ++i)
            devs.push_back(manual_device(i, shards[static_cast<std::size_t>(i)], shape.param_count(), opt));
        CflState st;
        st.global_params = ParamVector::zeros(shape.param_count());
        cfl_round(st, devs, shape, 1, 8, 17);
        cfl_round(st, devs, shape, 1, 8, 17);
        return st.global_params;
    };

    auto a = run_two_rounds();
    auto b = run_two_rounds();
    CHECK(a.values == b.values);
    CHECK(a.sample_count == b.sample_count);
}

TEST_CASE("evaluation weights devices by shard size") {
    auto ds = toy_two_class();
    model::ModelShape shape{2, 2, 0};
    auto opt = model::OptimiserState::sgd(0.1);
    data::DatasetView test = whole(ds);

    // device 0 classifies perfectly with 1 sample, device 1 always answers
    // class 0 with 3 samples, device 2 holds nothing and must not count
    auto d0 = manual_device(0, data::DatasetView{&ds, {0}}, shape.param_count(), opt);
    auto d1 = manual_device(1, data::DatasetView{&ds, {1, 2, 3}}, shape.param_count(), opt);
    auto d2 = manual_device(2, data::DatasetView{&ds, {}}, shape.param_count(), opt);
    d0.params = perfect_toy_params();
    d1.params = constant_zero_params();
    d2.params = perfect_toy_params();

    CflState st;
    st.global_params = perfect_toy_params();
    std::vector<sim::DeviceState> devs = {d0, d1, d2};
    auto m = cfl_evaluate(st, devs, shape, test);

    CHECK(m.global.accuracy == doctest::Approx(1.0));
    CHECK(m.global.macro_f1 == doctest::Approx(1.0));
    // (1*1.0 + 3*0.5) / 4
    CHECK(m.device_weighted_accuracy == doctest::Approx(0.625).epsilon(1e-12));
}

TEST_CASE("equal shards reduce the weighting to a plain mean") {
    auto ds = toy_two_class();
    model::ModelShape shape{2, 2, 0};
    auto opt = model::OptimiserState::sgd(0.1);

    auto d0 = manual_device(0, data::DatasetView{&ds, {0, 1}}, shape.param_count(), opt);
    auto d1 = manual_device(1, data::DatasetView{&ds, {2, 3}}, shape.param_count(), opt);
    d0.params = perfect_toy_params();
    d1.params = constant_zero_params();

    CflState st;
    st.global_params = ParamVector::zeros(shape.param_count());
    std::vector<sim::DeviceState> devs = {d0, d1};
    auto m = cfl_evaluate(st, devs, shape, whole(ds));

    // the all-zero global ties every class and falls back to class 0
    CHECK(m.global.accuracy == doctest::Approx(0.5));
    CHECK(m.device_weighted_accuracy == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("evaluation with no populated shards reports zero") {
    auto ds = toy_two_class();
    model::ModelShape shape{2, 2, 0};
    auto opt = model::OptimiserState::sgd(0.1);
    auto d0 = manual_device(0, data::DatasetView{&ds, {}}, shape.param_count(), opt);

    CflState st;
    st.global_params = perfect_toy_params();
    std::vector<sim::DeviceState> devs = {d0};
    auto m = cfl_evaluate(st, devs, shape, whole(ds));
    CHECK(m.device_weighted_accuracy == 0.0);
    CHECK(m.global.accuracy == doctest::Approx(1.0));
}

TEST_CASE("server round rejects malformed input") {
    model::ModelShape shape{4, 2, 0};
    auto opt = model::OptimiserState::sgd(0.1);

    std::vector<sim::DeviceState> none;
    CflState st;
    st.global_params = ParamVector::zeros(shape.param_count());
    CHECK_THROWS_AS(cfl_round(st, none, shape, 1, 8, 7), std::invalid_argument);

    auto ds = data::generate_blobs(2, 8, 4, 1.0, 3);
    std::vector<sim::DeviceState> devs = {manual_device(0, whole(ds), shape.param_count(), opt)};
    CflState bad;
    bad.global_params = ParamVector::zeros(shape.param_count() + 1);
    CHECK_THROWS_AS(cfl_round(bad, devs, shape, 1, 8, 7), std::invalid_argument);
}

TEST_CASE("isolated training evaluates every device and the pooled reference") {
    auto ds = data::generate_blobs(3, 80, 6, 2.0, 5);
    auto [train, test] = data::train_test_split(ds, 0.25, 5);
    auto shards = data::partition_iid(train, 4, 5);
    model::ModelShape shape{6, 3, 0};
    auto opt = model::OptimiserState::adam(0.05);

    auto build = [&]() {
        std::vector<sim::DeviceState> devs;
        for (int i = 0; i < 4; ++i)
            devs.push_back(manual_device(i, shards[static_cast<std::size_t>(i)], shape.param_count(), opt));
        return devs;
    };

    auto devs = build();
    auto rep = local_only(devs, shape, 2, 16, test, 31);
    REQUIRE(rep.per_device.size() == 4);
    for (const auto& r : rep.per_device) {
        CHECK(r.accuracy >= 0.0);
        CHECK(r.accuracy <= 1.0);
    }
    // three balanced classes: the pooled model has to beat chance comfortably
    CHECK(rep.full_data.accuracy > 0.5);

    // replay the pooled reference: union of shards, id tag = device count
    std::vector<int> union_idx;
    for (const auto& s : shards) union_idx.insert(union_idx.end(), s.idx.begin(), s.idx.end());
    std::sort(union_idx.begin(), union_idx.end());
    ParamVector pooled = ParamVector::zeros(shape.param_count());
    auto pooled_opt = opt;
    pooled_opt.reset();
    Rng rng(derive_seed(31, {stream::kTraining, 4}));
    model::train(pooled, pooled_opt, shape, data::DatasetView{&ds, std::move(union_idx)}, 2, 16, rng);
    auto pooled_eval = model::evaluate(pooled, shape, test);
    CHECK(rep.full_data.accuracy == pooled_eval.accuracy);
    CHECK(rep.full_data.loss == pooled_eval.loss);

    // a fresh build with the same seed lands on identical numbers
    auto devs2 = build();
    auto rep2 = local_only(devs2, shape, 2, 16, test, 31);
    for (std::size_t i = 0; i < rep.per_device.size(); ++i) {
        CHECK(rep.per_device[i].accuracy == rep2.per_device[i].accuracy);
        CHECK(rep.per_device[i].loss == rep2.per_device[i].loss);
    }
    CHECK(rep.full_data.accuracy == rep2.full_data.accuracy);
}

TEST_CASE("pooled data beats skewed local shards") {
    auto ds = data::generate_blobs(4, 100, 8, 2.0, 19);
    auto [train, test] = data::train_test_split(ds, 0.25, 19);
    auto shards = data::partition_dirichlet(train, 8, 0.1, 19);
    model::ModelShape shape{8, 4, 0};
    auto opt = model::OptimiserState::adam(0.05);

    std::vector<sim::DeviceState> devs;
    for (int i = 0; i < 8; ++i)
        devs.push_back(manual_device(i, shards[static_cast<std::size_t>(i)], shape.param_count(), opt));
    auto rep = local_only(devs, shape, 2, 16, test, 23);

    double mean = 0.0;
    for (const auto& r : rep.per_device) mean += r.accuracy;
    mean /= static_cast<double>(rep.per_device.size());
    // near-single-class shards cap local accuracy around the class share
    CHECK(rep.full_data.accuracy > mean);
}

TEST_CASE("zero epochs evaluate the untouched initial models") {
    auto ds = toy_two_class();
    model::ModelShape shape{2, 2, 0};
    auto opt = model::OptimiserState::sgd(0.1);

    std::vector<sim::DeviceState> devs = {
        manual_device(0, data::DatasetView{&ds, {0, 1}}, shape.param_count(), opt),
        manual_device(1, data::DatasetView{&ds, {2, 3}}, shape.param_count(), opt)};
    auto rep = local_only(devs, shape, 0, 4, whole(ds), 7);

    // all-zero models tie every class and answer class 0: half right here
    for (const auto& r : rep.per_device) CHECK(r.accuracy == doctest::Approx(0.5));
    CHECK(rep.full_data.accuracy == doctest::Approx(0.5));
}

TEST_CASE("isolated training rejects malformed input") {
    model::ModelShape shape{2, 2, 0};
    auto opt = model::OptimiserState::sgd(0.1);
    auto ds = toy_two_class();
    auto other = toy_two_class();

    std::vector<sim::DeviceState> none;
    CHECK_THROWS_AS((void)local_only(none, shape, 1, 4, whole(ds), 7), std::invalid_argument);

    // no device holds any data
    std::vector<sim::DeviceState> bare = {
        manual_device(0, data::DatasetView{}, shape.param_count(), opt)};
    CHECK_THROWS_AS((void)local_only(bare, shape, 1, 4, whole(ds), 7), std::invalid_argument);

    // shards must reference one shared dataset
    std::vector<sim::DeviceState> split = {
        manual_device(0, data::DatasetView{&ds, {0, 1}}, shape.param_count(), opt),
        manual_device(1, data::DatasetView{&other, {2, 3}}, shape.param_count(), opt)};
    CHECK_THROWS_AS((void)local_only(split, shape, 1, 4, whole(ds), 7), std::invalid_argument);
}
