#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dfl/harness.hpp"
#include "doctest.h"

using namespace dfl;
using namespace dfl::harness;

namespace {

namespace fs = std::filesystem;

// small, fast configuration shared by the end-to-end cases
ExperimentConfig tiny_config(Method m) {
    ExperimentConfig cfg;
    cfg.method = m;
    cfg.field.device_count = 6;
    cfg.dataset.classes = 2;
    cfg.dataset.per_class = 40;
    cfg.dataset.input_dim = 4;
    cfg.dataset.spread = 2.0;
    cfg.clustering.k_init = 2;
    cfg.rounds = 2;
    cfg.epochs = 1;
    cfg.batch_size = 16;
    cfg.seed = 5;
    return cfg;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// scratch directory that cleans up after itself
struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

MetricsRecord row(const std::string& method, int round, double wall, double acc) {
    MetricsRecord r;
    r.method = method;
    r.round = round;
    r.wall_step = wall;
    r.acc_mean = acc;
    return r;
}

}  // namespace

TEST_CASE("presets pin the sweep parameters") {
    CHECK(preset("iid-30").field.device_count == 30);
    CHECK(preset("iid-30").partition.mode == data::PartitionMode::IID);

    auto r15 = preset("range-15");
    CHECK(r15.field.comm_range == 15.0);
    CHECK(r15.field.device_count == 60);
    CHECK(r15.partition.mode == data::PartitionMode::Dirichlet);
    CHECK(preset("range-75").field.comm_range == 75.0);

    CHECK(preset("alpha-0.5").partition.alpha == 0.5);
    CHECK(preset("alpha-0.5").partition.mode == data::PartitionMode::Dirichlet);
    CHECK(preset("devices-100").field.device_count == 100);
    CHECK(preset("emd-clustering").clustering.criterion == clustering::Criterion::EMD);
    CHECK(preset("wd-1e-3").optimiser.weight_decay == 1e-3);
}

TEST_CASE("every advertised preset is buildable") {
    for (const auto& name : preset_names()) {
        auto cfg = preset(name);
        CHECK_NOTHROW(cfg.validate());
    }
}

TEST_CASE("unknown preset names the valid ones") {
    try {
        (void)preset("bogus");
        FAIL("expected invalid_argument");
    } catch (const std::invalid_argument& e) {
        std::string msg = e.what();
        CHECK(msg.find("bogus") != std::string::npos);
        CHECK(msg.find("iid-30") != std::string::npos);
        CHECK(msg.find("range-60") != std::string::npos);
    }
}

TEST_CASE("config serialisation round-trips") {
    auto cfg = tiny_config(Method::CFL);
    cfg.partition.mode = data::PartitionMode::Dirichlet;
    cfg.partition.alpha = 0.37;
    cfg.gossip.mode = gossip::MixingMode::FixedAlpha;
    cfg.gossip.alpha = 0.81;
    cfg.gossip.heads_only_inter = true;
    cfg.clustering.criterion = clustering::Criterion::EMD;
    cfg.hidden_dim = 12;
    cfg.optimiser = model::OptimiserState::sgd(0.025, 1e-4);
    cfg.mobility_dt = 0.75;
    cfg.costs.cfl_overhead = 3.5;

    auto back = parse_config(serialise_config(cfg));
    CHECK(back.method == cfg.method);
    CHECK(back.seed == cfg.seed);
    CHECK(back.rounds == cfg.rounds);
    CHECK(back.epochs == cfg.epochs);
    CHECK(back.batch_size == cfg.batch_size);
    CHECK(back.mobility_dt == cfg.mobility_dt);
    CHECK(back.field.device_count == cfg.field.device_count);
    CHECK(back.field.comm_range == cfg.field.comm_range);
    CHECK(back.field.field_size == cfg.field.field_size);
    CHECK(back.field.speed == cfg.field.speed);
    CHECK(back.dataset.classes == cfg.dataset.classes);
    CHECK(back.dataset.per_class == cfg.dataset.per_class);
    CHECK(back.dataset.input_dim == cfg.dataset.input_dim);
    CHECK(back.dataset.spread == cfg.dataset.spread);
    CHECK(back.dataset.test_fraction == cfg.dataset.test_fraction);
    CHECK(back.partition.mode == cfg.partition.mode);
    CHECK(back.partition.alpha == cfg.partition.alpha);
    CHECK(back.gossip.intra_rounds == cfg.gossip.intra_rounds);
    CHECK(back.gossip.inter_rounds == cfg.gossip.inter_rounds);
    CHECK(back.gossip.mode == cfg.gossip.mode);
    CHECK(back.gossip.alpha == cfg.gossip.alpha);
    CHECK(back.gossip.heads_only_inter == cfg.gossip.heads_only_inter);
    CHECK(back.clustering.k_init == cfg.clustering.k_init);
    CHECK(back.clustering.criterion == cfg.clustering.criterion);
    CHECK(back.hidden_dim == cfg.hidden_dim);
    CHECK(back.optimiser.kind == cfg.optimiser.kind);
    CHECK(back.optimiser.learning_rate == cfg.optimiser.learning_rate);
    CHECK(back.optimiser.weight_decay == cfg.optimiser.weight_decay);
    CHECK(back.costs.training_per_sample == cfg.costs.training_per_sample);
    CHECK(back.costs.gossip_iteration == cfg.costs.gossip_iteration);
    CHECK(back.costs.cfl_overhead == cfg.costs.cfl_overhead);
}

TEST_CASE("config parser reports what went wrong") {
    CHECK_NOTHROW((void)parse_config("# only a comment\n\nrounds = 3\n"));
    CHECK(parse_config("rounds = 3 # trailing comment\n").rounds == 3);

    try {
        (void)parse_config("rounds = 3\nnot a key value line\n");
        FAIL("expected invalid_argument");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }

    try {
        (void)parse_config("field.devices = 30\nwidgets = 7\n");
        FAIL("expected invalid_argument");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("unknown key 'widgets'") != std::string::npos);
    }

    try {
        (void)parse_config("seed = 1\nrounds = soon\n");
        FAIL("expected invalid_argument");
    } catch (const std::invalid_argument& e) {
        std::string msg = e.what();
        CHECK(msg.find("rounds") != std::string::npos);
        CHECK(msg.find("line 2") != std::string::npos);
    }

    CHECK_THROWS_AS((void)parse_config("method = p2p\n"), std::invalid_argument);
    CHECK_THROWS_AS((void)parse_config("gossip.heads_only_inter = maybe\n"),
                    std::invalid_argument);
}

TEST_CASE("config validation rejects unusable settings") {
    auto ok = tiny_config(Method::DFL);
    CHECK_NOTHROW(ok.validate());

    auto bad = ok;
    bad.rounds = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = ok;
    bad.dataset.test_fraction = 1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = ok;
    bad.optimiser.learning_rate = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = ok;
    bad.partition.mode = data::PartitionMode::Dirichlet;
    bad.partition.alpha = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("metrics rows survive the csv round trip") {
    MetricsRecord r;
    r.method = "dfl";
    r.round = 7;
    r.wall_step = 1234.5;
    r.acc_mean = 1.0 / 3.0;
    r.acc_min = 0.25;
    r.acc_max = 0.75;
    r.macro_f1 = 2.0 / 7.0;
    r.loss = 1e-17;
    r.consensus_error = 3.0e-9;
    r.cluster_count = 4;
    r.messages = 123456789012345LL;
    r.lambda2_intra = 0.999999999;
    r.lambda2_inter = -0.5;

    TempDir dir("dfl-harness-roundtrip");
    fs::create_directories(dir.path);
    std::string path = (dir.path / "m.csv").string();
    {
        std::ofstream out(path, std::ios::binary);
        out << metrics_csv_header() << '\n' << to_csv_row(r) << '\n';
    }
    auto rows = load_metrics_csv(path);
    REQUIRE(rows.size() == 1);
    const auto& b = rows[0];
    CHECK(b.method == r.method);
    CHECK(b.round == r.round);
    CHECK(b.wall_step == r.wall_step);
    CHECK(b.acc_mean == r.acc_mean);
    CHECK(b.acc_min == r.acc_min);
    CHECK(b.acc_max == r.acc_max);
    CHECK(b.macro_f1 == r.macro_f1);
    CHECK(b.loss == r.loss);
    CHECK(b.consensus_error == r.consensus_error);
    CHECK(b.cluster_count == r.cluster_count);
    CHECK(b.messages == r.messages);
    CHECK(b.lambda2_intra == r.lambda2_intra);
    CHECK(b.lambda2_inter == r.lambda2_inter);
}

TEST_CASE("metrics loader rejects foreign files") {
    CHECK_THROWS_AS((void)load_metrics_csv("/nonexistent/metrics.csv"), std::invalid_argument);

    TempDir dir("dfl-harness-badcsv");
    fs::create_directories(dir.path);
    std::string wrong_header = (dir.path / "wrong.csv").string();
    {
        std::ofstream out(wrong_header, std::ios::binary);
        out << "round,accuracy\n1,0.5\n";
    }
    CHECK_THROWS_AS((void)load_metrics_csv(wrong_header), std::invalid_argument);

    std::string short_row = (dir.path / "short.csv").string();
    {
        std::ofstream out(short_row, std::ios::binary);
        out << metrics_csv_header() << '\n' << "dfl,1,2.0\n";
    }
    CHECK_THROWS_AS((void)load_metrics_csv(short_row), std::invalid_argument);
}

TEST_CASE("decentralised run produces one record per round") {
    auto cfg = tiny_config(Method::DFL);
    auto res = run_experiment(cfg);
    REQUIRE(res.records.size() == 2);
    double prev_wall = 0.0;
    for (std::size_t i = 0; i < res.records.size(); ++i) {
        const auto& r = res.records[i];
        CHECK(r.method == "dfl");
        CHECK(r.round == static_cast<int>(i) + 1);
        CHECK(r.wall_step > prev_wall);
        prev_wall = r.wall_step;
        CHECK(r.acc_mean >= r.acc_min);
        CHECK(r.acc_mean <= r.acc_max);
        CHECK(r.cluster_count >= 1);
        CHECK(r.messages >= 0);
        CHECK(r.consensus_error >= 0.0);
    }
}

TEST_CASE("server run reports a single global model") {
    auto cfg = tiny_config(Method::CFL);
    auto res = run_experiment(cfg);
    REQUIRE(res.records.size() == 2);
    for (const auto& r : res.records) {
        CHECK(r.method == "cfl");
        // min, mean and max all describe the one global model
        CHECK(r.acc_min == r.acc_mean);
        CHECK(r.acc_max == r.acc_mean);
        CHECK(r.cluster_count == 0);
        CHECK(r.messages == 12);  // one model up and one down per device
    }
}

TEST_CASE("isolated run emits per-device streams plus the pooled reference") {
    auto cfg = tiny_config(Method::LocalOnly);
    cfg.rounds = 1;
    auto res = run_experiment(cfg);
    REQUIRE(res.records.size() == 7);  // six devices and the pooled model
    for (int i = 0; i < 6; ++i)
        CHECK(res.records[static_cast<std::size_t>(i)].method == "local:" + std::to_string(i));
    CHECK(res.records[6].method == "local:full");
}

TEST_CASE("a run writes its artifacts when given a directory") {
    TempDir dir("dfl-harness-out");
    auto cfg = tiny_config(Method::DFL);
    cfg.out_dir = dir.path.string();
    auto res = run_experiment(cfg);

    REQUIRE(!res.csv_path.empty());
    auto loaded = load_metrics_csv(res.csv_path);
    REQUIRE(loaded.size() == res.records.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        // %.17g formatting is lossless for doubles
        CHECK(loaded[i].acc_mean == res.records[i].acc_mean);
        CHECK(loaded[i].wall_step == res.records[i].wall_step);
        CHECK(loaded[i].consensus_error == res.records[i].consensus_error);
        CHECK(loaded[i].messages == res.records[i].messages);
    }

    // the config written next to the metrics reproduces the run settings
    auto back = load_config_file((dir.path / "config.txt").string());
    CHECK(back.field.device_count == cfg.field.device_count);
    CHECK(back.rounds == cfg.rounds);
    CHECK(back.seed == cfg.seed);

    REQUIRE(!res.report_path.empty());
    CHECK(fs::exists(res.report_path));
}

TEST_CASE("identical seeds produce byte-identical artifacts") {
    TempDir a("dfl-harness-rep-a");
    TempDir b("dfl-harness-rep-b");
    auto cfg = tiny_config(Method::DFL);

    cfg.out_dir = a.path.string();
    auto ra = run_experiment(cfg);
    cfg.out_dir = b.path.string();
    auto rb = run_experiment(cfg);

    CHECK(slurp(ra.csv_path) == slurp(rb.csv_path));
    CHECK(slurp(ra.report_path) == slurp(rb.report_path));
}

TEST_CASE("comparison tracks thresholds on both runs") {
    std::vector<MetricsRecord> a = {row("dfl", 1, 10, 0.2), row("dfl", 2, 20, 0.5),
                                    row("dfl", 3, 30, 0.9)};
    std::vector<MetricsRecord> b = {row("cfl", 1, 5, 0.3), row("cfl", 2, 10, 0.4),
                                    row("cfl", 3, 15, 0.8)};

    auto cmp = compare_runs(a, b, 0.45);
    REQUIRE(cmp.rows.size() == 3);
    CHECK(cmp.rows[0].delta == doctest::Approx(-0.1));
    CHECK(cmp.rows[2].delta == doctest::Approx(0.1));
    CHECK(cmp.rounds_to_threshold_a == 2);
    CHECK(cmp.rounds_to_threshold_b == 3);
    CHECK(cmp.wall_to_threshold_a == 20.0);
    CHECK(cmp.wall_to_threshold_b == 15.0);
    CHECK(cmp.wall_ratio == doctest::Approx(20.0 / 15.0));
    CHECK(!cmp.format().empty());

    // self-comparison is all zeros with ratio one
    auto self = compare_runs(a, a, 0.45);
    for (const auto& r : self.rows) CHECK(r.delta == 0.0);
    CHECK(self.wall_ratio == doctest::Approx(1.0));

    // unreachable threshold
    auto never = compare_runs(a, b, 0.95);
    CHECK(never.rounds_to_threshold_a == -1);
    CHECK(never.rounds_to_threshold_b == -1);
    CHECK(never.wall_ratio == 0.0);

    std::vector<MetricsRecord> empty;
    CHECK_THROWS_AS((void)compare_runs(empty, b, 0.5), std::invalid_argument);
}

TEST_CASE("threshold search follows the first method stream") {
    std::vector<MetricsRecord> mixed = {row("local:0", 1, 10, 0.2), row("local:full", 1, 40, 0.9),
                                        row("local:0", 2, 20, 0.6), row("local:full", 2, 80, 0.95)};
    // the pooled stream crosses first, but the primary stream is device 0
    CHECK(rounds_to_threshold(mixed, 0.5) == 2);
    CHECK(rounds_to_threshold(mixed, 0.99) == -1);
}
