#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dfl/clustering.hpp"
#include "dfl/data.hpp"
#include "dfl/gossip.hpp"
#include "dfl/model.hpp"
#include "dfl/sim.hpp"

namespace dfl::harness {

enum class Method { DFL, CFL, LocalOnly };

std::string method_name(Method m);

// Synthetic Gaussian blobs by default; csv_path switches to a file dataset
// (features then an integer label per row).
struct DatasetSpec {
    int classes = 10;
    int per_class = 600;
    int input_dim = 16;
    // Class clouds overlap at this spread, leaving the task hard enough that
    // partition skew and sparse topologies show up in the accuracy curves.
    double spread = 4.0;
    double test_fraction = 0.2;
    std::string csv_path;
};

// Deterministic stand-in for wall-clock time. Training costs samples*epochs
// per device per round (devices run in parallel, so a round costs the max),
// a gossip iteration costs one step, a CFL round adds broadcast+aggregate.
struct WallStepCosts {
    double training_per_sample = 1.0;
    double gossip_iteration = 1.0;
    double cfl_overhead = 2.0;
};

struct ExperimentConfig {
    Method method = Method::DFL;
    sim::FieldConfig field;
    DatasetSpec dataset;
    data::PartitionSpec partition;
    gossip::GossipConfig gossip;
    clustering::ClusteringConfig clustering;
    int hidden_dim = 0;  // 0 = plain softmax classifier
    model::OptimiserState optimiser = model::OptimiserState::adam(0.1, 1e-5);
    int rounds = 20;
    int epochs = 2;
    int batch_size = 128;
    double mobility_dt = 1.0;
    WallStepCosts costs;
    std::uint64_t seed = 1;
    std::string out_dir;  // empty: keep results in memory only

    void validate() const;
};

struct MetricsRecord {
    std::string method;
    int round = 0;
    double wall_step = 0.0;
    double acc_mean = 0.0;
    double acc_min = 0.0;
    double acc_max = 0.0;
    double macro_f1 = 0.0;
    double loss = 0.0;
    double consensus_error = 0.0;
    int cluster_count = 0;
    long long messages = 0;
    double lambda2_intra = 0.0;
    double lambda2_inter = 0.0;
};

std::string metrics_csv_header();
std::string to_csv_row(const MetricsRecord& r);
std::vector<MetricsRecord> load_metrics_csv(const std::string& path);

struct RunResult {
    ExperimentConfig config;
    std::vector<MetricsRecord> records;
    std::string csv_path;     // set when out_dir was given
    std::string report_path;  // JSON-lines round reports (DFL only)
};

// Build dataset, partition, instantiate devices, run the chosen method for
// cfg.rounds rounds, evaluating on the held-out test split every round.
RunResult run_experiment(const ExperimentConfig& cfg);

ExperimentConfig preset(const std::string& name);
std::vector<std::string> preset_names();

// Config files are flat `key = value` lines; '#' starts a comment. Keys use
// dotted paths (field.range, gossip.intra_rounds, ...). serialise_config and
// parse_config round-trip.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);
std::string serialise_config(const ExperimentConfig& cfg);

struct ComparisonRow {
    int round = 0;
    double acc_a = 0.0;
    double acc_b = 0.0;
    double delta = 0.0;  // a - b
};

struct Comparison {
    std::vector<ComparisonRow> rows;
    double threshold = 0.0;
    int rounds_to_threshold_a = -1;  // -1: never reached
    int rounds_to_threshold_b = -1;
    double wall_to_threshold_a = -1.0;
    double wall_to_threshold_b = -1.0;
    double wall_ratio = 0.0;  // a/b when both reached, else 0

    std::string format() const;
};

// Per-round accuracy deltas plus rounds/wall-steps to the given accuracy.
// Runs holding multiple method streams are compared on their first stream.
Comparison compare_runs(const std::vector<MetricsRecord>& a, const std::vector<MetricsRecord>& b,
                        double threshold_accuracy);

// First round whose acc_mean reaches the threshold, -1 if none does.
int rounds_to_threshold(const std::vector<MetricsRecord>& records, double threshold_accuracy);

}  // namespace dfl::harness
