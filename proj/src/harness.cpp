#include "dfl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dfl/analysis.hpp"
#include "dfl/baselines.hpp"
#include "dfl/errors.hpp"
#include "dfl/rng.hpp"

namespace dfl::harness {

std::string method_name(Method m) {
    switch (m) {
        case Method::DFL: return "dfl";
        case Method::CFL: return "cfl";
        case Method::LocalOnly: return "local";
    }
    return "unknown";
}

void ExperimentConfig::validate() const {
    field.validate();
    gossip.validate();
    clustering.validate(field.device_count);
    if (dataset.csv_path.empty()) {
        if (dataset.classes < 2) throw std::invalid_argument("config: need at least two classes");
        if (dataset.per_class < 1 || dataset.input_dim < 1)
            throw std::invalid_argument("config: dataset counts must be positive");
        if (dataset.spread < 0.0) throw std::invalid_argument("config: spread must be >= 0");
    }
    if (dataset.test_fraction < 0.0 || dataset.test_fraction >= 1.0)
        throw std::invalid_argument("config: test_fraction must lie in [0, 1)");
    if (partition.mode == data::PartitionMode::Dirichlet && partition.alpha <= 0.0)
        throw std::invalid_argument("config: dirichlet alpha must be positive");
    if (hidden_dim < 0) throw std::invalid_argument("config: hidden_dim must be >= 0");
    if (optimiser.learning_rate <= 0.0)
        throw std::invalid_argument("config: learning rate must be positive");
    if (optimiser.weight_decay < 0.0)
        throw std::invalid_argument("config: weight decay must be >= 0");
    if (rounds < 1) throw std::invalid_argument("config: rounds must be >= 1");
    if (epochs < 0) throw std::invalid_argument("config: epochs must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("config: batch_size must be positive");
    if (mobility_dt < 0.0) throw std::invalid_argument("config: mobility_dt must be >= 0");
    if (costs.training_per_sample < 0.0 || costs.gossip_iteration < 0.0 ||
        costs.cfl_overhead < 0.0)
        throw std::invalid_argument("config: wall-step costs must be >= 0");
}

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string metrics_csv_header() {
    return "method,round,wall_step,acc_mean,acc_min,acc_max,macro_f1,loss,consensus_error,"
           "cluster_count,messages,lambda2_intra,lambda2_inter";
}

std::string to_csv_row(const MetricsRecord& r) {
    std::string out = r.method;
    out += ',';
    out += std::to_string(r.round);
    out += ',';
    out += fmt(r.wall_step);
    out += ',';
    out += fmt(r.acc_mean);
    out += ',';
    out += fmt(r.acc_min);
    out += ',';
    out += fmt(r.acc_max);
    out += ',';
    out += fmt(r.macro_f1);
    out += ',';
    out += fmt(r.loss);
    out += ',';
    out += fmt(r.consensus_error);
    out += ',';
    out += std::to_string(r.cluster_count);
    out += ',';
    out += std::to_string(r.messages);
    out += ',';
    out += fmt(r.lambda2_intra);
    out += ',';
    out += fmt(r.lambda2_inter);
    return out;
}

std::vector<MetricsRecord> load_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("load_metrics_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("load_metrics_csv: empty file");
    if (line != metrics_csv_header())
        throw std::invalid_argument("load_metrics_csv: metrics schema mismatch in " + path);

    std::vector<MetricsRecord> records;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 13)
            throw std::invalid_argument("load_metrics_csv: malformed row in " + path);
        MetricsRecord r;
        r.method = cells[0];
        r.round = std::stoi(cells[1]);
        r.wall_step = std::stod(cells[2]);
        r.acc_mean = std::stod(cells[3]);
        r.acc_min = std::stod(cells[4]);
        r.acc_max = std::stod(cells[5]);
        r.macro_f1 = std::stod(cells[6]);
        r.loss = std::stod(cells[7]);
        r.consensus_error = std::stod(cells[8]);
        r.cluster_count = std::stoi(cells[9]);
        r.messages = std::stoll(cells[10]);
        r.lambda2_intra = std::stod(cells[11]);
        r.lambda2_inter = std::stod(cells[12]);
        records.push_back(std::move(r));
    }
    return records;
}

ExperimentConfig preset(const std::string& name) {
    ExperimentConfig cfg;  // struct defaults are the iid-30 configuration
    if (name == "iid-30") {
        return cfg;
    } else if (name == "alpha-10") {
        cfg.partition.mode = data::PartitionMode::Dirichlet;
        cfg.partition.alpha = 10.0;
        return cfg;
    } else if (name == "alpha-0.5") {
        cfg.partition.mode = data::PartitionMode::Dirichlet;
        cfg.partition.alpha = 0.5;
        return cfg;
    } else if (name == "alpha-0.1") {
        cfg.partition.mode = data::PartitionMode::Dirichlet;
        cfg.partition.alpha = 0.1;
        return cfg;
    } else if (name == "devices-60") {
        cfg.field.device_count = 60;
        return cfg;
    } else if (name == "devices-100") {
        cfg.field.device_count = 100;
        return cfg;
    } else if (name == "range-15" || name == "range-30" || name == "range-45" ||
               name == "range-60" || name == "range-75") {
        cfg.field.device_count = 60;
        cfg.field.comm_range = std::stod(name.substr(6));
        // Skewed shards make the communication range matter: with IID shards
        // every device already holds a representative sample and the sweep
        // would be flat.
        cfg.partition.mode = data::PartitionMode::Dirichlet;
        cfg.partition.alpha = 0.5;
        return cfg;
    } else if (name == "emd-clustering") {
        cfg.field.device_count = 60;
        cfg.partition.mode = data::PartitionMode::Dirichlet;
        cfg.partition.alpha = 0.5;
        cfg.clustering.criterion = clustering::Criterion::EMD;
        return cfg;
    } else if (name == "wd-1e-3") {
        cfg.optimiser.weight_decay = 1e-3;
        return cfg;
    }
    std::string known;
    for (const auto& n : preset_names()) {
        if (!known.empty()) known += ", ";
        known += n;
    }
    throw std::invalid_argument("unknown preset '" + name + "'; valid presets: " + known);
}

std::vector<std::string> preset_names() {
    return {"iid-30",   "alpha-10", "alpha-0.5", "alpha-0.1", "devices-60",     "devices-100",
            "range-15", "range-30", "range-45",  "range-60",  "range-75",       "emd-clustering",
            "wd-1e-3"};
}

namespace {

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("config: '" + key + "' expects true/false");
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

void apply_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "method") {
        if (value == "dfl") cfg.method = Method::DFL;
        else if (value == "cfl") cfg.method = Method::CFL;
        else if (value == "local") cfg.method = Method::LocalOnly;
        else throw std::invalid_argument("config: method must be dfl, cfl or local");
    } else if (key == "seed") {
        cfg.seed = std::stoull(value);
    } else if (key == "rounds") {
        cfg.rounds = std::stoi(value);
    } else if (key == "epochs") {
        cfg.epochs = std::stoi(value);
    } else if (key == "batch_size") {
        cfg.batch_size = std::stoi(value);
    } else if (key == "mobility_dt") {
        cfg.mobility_dt = std::stod(value);
    } else if (key == "out_dir") {
        cfg.out_dir = value;
    } else if (key == "field.size") {
        cfg.field.field_size = std::stod(value);
    } else if (key == "field.devices") {
        cfg.field.device_count = std::stoi(value);
    } else if (key == "field.range") {
        cfg.field.comm_range = std::stod(value);
    } else if (key == "field.speed") {
        cfg.field.speed = std::stod(value);
    } else if (key == "dataset.classes") {
        cfg.dataset.classes = std::stoi(value);
    } else if (key == "dataset.per_class") {
        cfg.dataset.per_class = std::stoi(value);
    } else if (key == "dataset.input_dim") {
        cfg.dataset.input_dim = std::stoi(value);
    } else if (key == "dataset.spread") {
        cfg.dataset.spread = std::stod(value);
    } else if (key == "dataset.test_fraction") {
        cfg.dataset.test_fraction = std::stod(value);
    } else if (key == "dataset.csv") {
        cfg.dataset.csv_path = value;
    } else if (key == "partition.mode") {
        if (value == "iid") cfg.partition.mode = data::PartitionMode::IID;
        else if (value == "dirichlet") cfg.partition.mode = data::PartitionMode::Dirichlet;
        else throw std::invalid_argument("config: partition.mode must be iid or dirichlet");
    } else if (key == "partition.alpha") {
        cfg.partition.alpha = std::stod(value);
    } else if (key == "gossip.intra_rounds") {
        cfg.gossip.intra_rounds = std::stoi(value);
    } else if (key == "gossip.inter_rounds") {
        cfg.gossip.inter_rounds = std::stoi(value);
    } else if (key == "gossip.mode") {
        if (value == "cumulative") cfg.gossip.mode = gossip::MixingMode::CumulativeFedAvg;
        else if (value == "fixed-alpha") cfg.gossip.mode = gossip::MixingMode::FixedAlpha;
        else throw std::invalid_argument("config: gossip.mode must be cumulative or fixed-alpha");
    } else if (key == "gossip.alpha") {
        cfg.gossip.alpha = std::stod(value);
    } else if (key == "gossip.heads_only_inter") {
        cfg.gossip.heads_only_inter = parse_bool(value, key);
    } else if (key == "gossip.resnapshot") {
        cfg.gossip.resnapshot_each_iteration = parse_bool(value, key);
    } else if (key == "clustering.k_init") {
        cfg.clustering.k_init = std::stoi(value);
    } else if (key == "clustering.max_iterations") {
        cfg.clustering.max_iterations = std::stoi(value);
    } else if (key == "clustering.criterion") {
        if (value == "geographic") cfg.clustering.criterion = clustering::Criterion::Geographic;
        else if (value == "emd") cfg.clustering.criterion = clustering::Criterion::EMD;
        else throw std::invalid_argument("config: clustering.criterion must be geographic or emd");
    } else if (key == "model.hidden_dim") {
        cfg.hidden_dim = std::stoi(value);
    } else if (key == "optimiser.kind") {
        if (value == "sgd") cfg.optimiser.kind = model::OptimiserKind::SGD;
        else if (value == "adam") cfg.optimiser.kind = model::OptimiserKind::Adam;
        else throw std::invalid_argument("config: optimiser.kind must be sgd or adam");
    } else if (key == "optimiser.learning_rate") {
        cfg.optimiser.learning_rate = std::stod(value);
    } else if (key == "optimiser.weight_decay") {
        cfg.optimiser.weight_decay = std::stod(value);
    } else if (key == "costs.training_per_sample") {
        cfg.costs.training_per_sample = std::stod(value);
    } else if (key == "costs.gossip_iteration") {
        cfg.costs.gossip_iteration = std::stod(value);
    } else if (key == "costs.cfl_overhead") {
        cfg.costs.cfl_overhead = std::stod(value);
    } else {
        throw std::invalid_argument("config: unknown key '" + key + "'");
    }
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    std::stringstream ss(text);
    std::string line;
    int line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(line_no) +
                                        " is not 'key = value'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        try {
            apply_key(cfg, key, value);
        } catch (const std::exception& e) {
            // deliberate messages carry the config: prefix; anything else is a
            // raw stoi/stod failure that deserves the key and line number
            if (std::string(e.what()).rfind("config:", 0) == 0) throw;
            throw std::invalid_argument("config: bad value for '" + key + "' on line " +
                                        std::to_string(line_no));
        }
    }
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string serialise_config(const ExperimentConfig& cfg) {
    std::string out;
    auto kv = [&out](const std::string& k, const std::string& v) {
        out += k;
        out += " = ";
        out += v;
        out += '\n';
    };
    kv("method", method_name(cfg.method));
    kv("seed", std::to_string(cfg.seed));
    kv("rounds", std::to_string(cfg.rounds));
    kv("epochs", std::to_string(cfg.epochs));
    kv("batch_size", std::to_string(cfg.batch_size));
    kv("mobility_dt", fmt(cfg.mobility_dt));
    kv("out_dir", cfg.out_dir);
    kv("field.size", fmt(cfg.field.field_size));
    kv("field.devices", std::to_string(cfg.field.device_count));
    kv("field.range", fmt(cfg.field.comm_range));
    kv("field.speed", fmt(cfg.field.speed));
    kv("dataset.classes", std::to_string(cfg.dataset.classes));
    kv("dataset.per_class", std::to_string(cfg.dataset.per_class));
    kv("dataset.input_dim", std::to_string(cfg.dataset.input_dim));
    kv("dataset.spread", fmt(cfg.dataset.spread));
    kv("dataset.test_fraction", fmt(cfg.dataset.test_fraction));
    kv("dataset.csv", cfg.dataset.csv_path);
    kv("partition.mode", cfg.partition.mode == data::PartitionMode::IID ? "iid" : "dirichlet");
    kv("partition.alpha", fmt(cfg.partition.alpha));
    kv("gossip.intra_rounds", std::to_string(cfg.gossip.intra_rounds));
    kv("gossip.inter_rounds", std::to_string(cfg.gossip.inter_rounds));
    kv("gossip.mode",
       cfg.gossip.mode == gossip::MixingMode::CumulativeFedAvg ? "cumulative" : "fixed-alpha");
    kv("gossip.alpha", fmt(cfg.gossip.alpha));
    kv("gossip.heads_only_inter", cfg.gossip.heads_only_inter ? "true" : "false");
    kv("gossip.resnapshot", cfg.gossip.resnapshot_each_iteration ? "true" : "false");
    kv("clustering.k_init", std::to_string(cfg.clustering.k_init));
    kv("clustering.max_iterations", std::to_string(cfg.clustering.max_iterations));
    kv("clustering.criterion",
       cfg.clustering.criterion == clustering::Criterion::Geographic ? "geographic" : "emd");
    kv("model.hidden_dim", std::to_string(cfg.hidden_dim));
    kv("optimiser.kind", cfg.optimiser.kind == model::OptimiserKind::SGD ? "sgd" : "adam");
    kv("optimiser.learning_rate", fmt(cfg.optimiser.learning_rate));
    kv("optimiser.weight_decay", fmt(cfg.optimiser.weight_decay));
    kv("costs.training_per_sample", fmt(cfg.costs.training_per_sample));
    kv("costs.gossip_iteration", fmt(cfg.costs.gossip_iteration));
    kv("costs.cfl_overhead", fmt(cfg.costs.cfl_overhead));
    return out;
}

namespace {

struct EvalStats {
    double mean = 0.0, min = 0.0, max = 0.0, f1 = 0.0, loss = 0.0;
};

EvalStats evaluate_devices(const std::vector<sim::DeviceState>& devices,
                           const model::ModelShape& shape, const data::DatasetView& test) {
    EvalStats st;
    st.min = 1.0;
    bool any = false;
    for (const auto& d : devices) {
        auto ev = model::evaluate(d.params, shape, test);
        st.mean += ev.accuracy;
        st.f1 += ev.macro_f1;
        st.loss += ev.loss;
        st.min = std::min(st.min, ev.accuracy);
        st.max = std::max(st.max, ev.accuracy);
        any = true;
    }
    if (any) {
        double n = static_cast<double>(devices.size());
        st.mean /= n;
        st.f1 /= n;
        st.loss /= n;
    } else {
        st.min = 0.0;
    }
    return st;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& input) {
    ExperimentConfig cfg = input;
    cfg.validate();
    cfg.field.seed = cfg.seed;
    cfg.partition.device_count = cfg.field.device_count;
    cfg.partition.seed = cfg.seed;

    data::Dataset ds = cfg.dataset.csv_path.empty()
                           ? data::generate_blobs(cfg.dataset.classes, cfg.dataset.per_class,
                                                  cfg.dataset.input_dim, cfg.dataset.spread,
                                                  cfg.seed)
                           : data::load_csv(cfg.dataset.csv_path);
    auto split = data::train_test_split(ds, cfg.dataset.test_fraction, cfg.seed);
    const data::DatasetView& train = split.first;
    const data::DatasetView& test = split.second;

    std::vector<data::DatasetView> shards =
        cfg.partition.mode == data::PartitionMode::IID
            ? data::partition_iid(train, cfg.partition.device_count, cfg.seed)
            : data::partition_dirichlet(train, cfg.partition.device_count, cfg.partition.alpha,
                                        cfg.seed);

    model::ModelShape shape{ds.input_dim, ds.class_count, cfg.hidden_dim};
    shape.validate();
    std::vector<sim::DeviceState> devices = sim::make_devices(cfg.field, shards, shape, cfg.optimiser);

    RunResult result;
    result.config = cfg;
    std::vector<std::string> report_lines;

    std::size_t largest_shard = 0;
    for (const auto& s : shards) largest_shard = std::max(largest_shard, s.size());
    // a round always advances wall time, even with nothing to train
    auto training_cost = [&cfg](std::size_t samples) {
        return std::max(static_cast<double>(samples) * cfg.epochs * cfg.costs.training_per_sample,
                        1.0);
    };

    if (cfg.method == Method::DFL) {
        gossip::RoundSchedule sched;
        sched.shape = shape;
        sched.epochs = cfg.epochs;
        sched.batch_size = cfg.batch_size;
        sched.mobility_dt = cfg.mobility_dt;
        double wall = 0.0;
        for (int r = 1; r <= cfg.rounds; ++r) {
            gossip::RoundReport rep = gossip::run_round(devices, cfg.field, cfg.gossip,
                                                        cfg.clustering, sched, cfg.seed, r);
            wall += training_cost(largest_shard) +
                    (cfg.gossip.intra_rounds + cfg.gossip.inter_rounds) * cfg.costs.gossip_iteration;
            EvalStats st = evaluate_devices(devices, shape, test);
            MetricsRecord rec;
            rec.method = method_name(cfg.method);
            rec.round = r;
            rec.wall_step = wall;
            rec.acc_mean = st.mean;
            rec.acc_min = st.min;
            rec.acc_max = st.max;
            rec.macro_f1 = st.f1;
            rec.loss = st.loss;
            rec.consensus_error = analysis::consensus_error(devices);
            rec.cluster_count = rep.cluster_count;
            rec.messages = rep.messages;
            rec.lambda2_intra = analysis::spectral_report(rep.intra.graph).lambda_2;
            rec.lambda2_inter = analysis::spectral_report(rep.inter.graph).lambda_2;
            result.records.push_back(std::move(rec));
            report_lines.push_back(rep.to_json_line());
        }
    } else if (cfg.method == Method::CFL) {
        baselines::CflState state;
        state.global_params = ParamVector::zeros(shape.param_count());
        double wall = 0.0;
        for (int r = 1; r <= cfg.rounds; ++r) {
            baselines::cfl_round(state, devices, shape, cfg.epochs, cfg.batch_size, cfg.seed);
            baselines::CflMetrics met = baselines::cfl_evaluate(state, devices, shape, test);
            wall += training_cost(largest_shard) + cfg.costs.cfl_overhead;
            MetricsRecord rec;
            rec.method = method_name(cfg.method);
            rec.round = r;
            rec.wall_step = wall;
            rec.acc_mean = met.global.accuracy;
            rec.acc_min = met.global.accuracy;
            rec.acc_max = met.global.accuracy;
            rec.macro_f1 = met.global.macro_f1;
            rec.loss = met.global.loss;
            rec.consensus_error = analysis::consensus_error(devices);
            rec.messages = 2LL * static_cast<long long>(devices.size());
            result.records.push_back(std::move(rec));
        }
    } else {
        ParamVector full_params = ParamVector::zeros(shape.param_count());
        model::OptimiserState full_opt = cfg.optimiser;
        full_opt.reset();
        std::vector<double> wall_dev(devices.size(), 0.0);
        double wall_full = 0.0;
        for (int r = 1; r <= cfg.rounds; ++r) {
            for (auto& d : devices) {
                Rng rng(derive_seed(cfg.seed, {stream::kTraining, static_cast<std::uint64_t>(r),
                                               static_cast<std::uint64_t>(d.id)}));
                sim::train_local(d, shape, cfg.epochs, cfg.batch_size, rng);
                auto ev = model::evaluate(d.params, shape, test);
                auto& wall = wall_dev[static_cast<std::size_t>(d.id)];
                wall += training_cost(d.shard.size());
                MetricsRecord rec;
                rec.method = "local:" + std::to_string(d.id);
                rec.round = r;
                rec.wall_step = wall;
                rec.acc_mean = rec.acc_min = rec.acc_max = ev.accuracy;
                rec.macro_f1 = ev.macro_f1;
                rec.loss = ev.loss;
                result.records.push_back(std::move(rec));
            }
            // single reference model over the union of all shards
            Rng rng(derive_seed(cfg.seed, {stream::kTraining, static_cast<std::uint64_t>(r),
                                           static_cast<std::uint64_t>(devices.size())}));
            model::train(full_params, full_opt, shape, train, cfg.epochs, cfg.batch_size, rng);
            auto ev = model::evaluate(full_params, shape, test);
            wall_full += training_cost(train.size());
            MetricsRecord rec;
            rec.method = "local:full";
            rec.round = r;
            rec.wall_step = wall_full;
            rec.acc_mean = rec.acc_min = rec.acc_max = ev.accuracy;
            rec.macro_f1 = ev.macro_f1;
            rec.loss = ev.loss;
            result.records.push_back(std::move(rec));
        }
    }

    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        result.csv_path = (std::filesystem::path(cfg.out_dir) / "metrics.csv").string();
        std::ofstream csv(result.csv_path, std::ios::binary);
        if (!csv) throw std::runtime_error("cannot write " + result.csv_path);
        csv << metrics_csv_header() << '\n';
        for (const auto& r : result.records) csv << to_csv_row(r) << '\n';

        std::string cfg_path = (std::filesystem::path(cfg.out_dir) / "config.txt").string();
        std::ofstream cf(cfg_path, std::ios::binary);
        cf << serialise_config(cfg);

        if (!report_lines.empty()) {
            result.report_path = (std::filesystem::path(cfg.out_dir) / "rounds.jsonl").string();
            std::ofstream rep(result.report_path, std::ios::binary);
            for (const auto& l : report_lines) rep << l << '\n';
        }
    }
    return result;
}

namespace {

std::vector<const MetricsRecord*> primary_stream(const std::vector<MetricsRecord>& records) {
    std::vector<const MetricsRecord*> out;
    if (records.empty()) return out;
    const std::string& m = records.front().method;
    for (const auto& r : records)
        if (r.method == m) out.push_back(&r);
    return out;
}

}  // namespace

int rounds_to_threshold(const std::vector<MetricsRecord>& records, double threshold_accuracy) {
    for (const MetricsRecord* r : primary_stream(records))
        if (r->acc_mean >= threshold_accuracy) return r->round;
    return -1;
}

Comparison compare_runs(const std::vector<MetricsRecord>& a, const std::vector<MetricsRecord>& b,
                        double threshold_accuracy) {
    if (a.empty() || b.empty()) throw std::invalid_argument("compare_runs: empty run");
    auto sa = primary_stream(a);
    auto sb = primary_stream(b);

    Comparison cmp;
    cmp.threshold = threshold_accuracy;
    std::size_t n = std::min(sa.size(), sb.size());
    for (std::size_t i = 0; i < n; ++i) {
        ComparisonRow row;
        row.round = sa[i]->round;
        row.acc_a = sa[i]->acc_mean;
        row.acc_b = sb[i]->acc_mean;
        row.delta = row.acc_a - row.acc_b;
        cmp.rows.push_back(row);
    }
    for (const MetricsRecord* r : sa)
        if (r->acc_mean >= threshold_accuracy) {
            cmp.rounds_to_threshold_a = r->round;
            cmp.wall_to_threshold_a = r->wall_step;
            break;
        }
    for (const MetricsRecord* r : sb)
        if (r->acc_mean >= threshold_accuracy) {
            cmp.rounds_to_threshold_b = r->round;
            cmp.wall_to_threshold_b = r->wall_step;
            break;
        }
    if (cmp.wall_to_threshold_a > 0.0 && cmp.wall_to_threshold_b > 0.0)
        cmp.wall_ratio = cmp.wall_to_threshold_a / cmp.wall_to_threshold_b;
    return cmp;
}

std::string Comparison::format() const {
    std::string out = "round  acc_a     acc_b     delta\n";
    char buf[96];
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof buf, "%-6d %-9.4f %-9.4f %+.4f\n", row.round, row.acc_a,
                      row.acc_b, row.delta);
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "threshold %.4f: ", threshold);
    out += buf;
    if (rounds_to_threshold_a >= 0)
        std::snprintf(buf, sizeof buf, "a reaches it at round %d (wall %.0f), ",
                      rounds_to_threshold_a, wall_to_threshold_a);
    else
        std::snprintf(buf, sizeof buf, "a never reaches it, ");
    out += buf;
    if (rounds_to_threshold_b >= 0)
        std::snprintf(buf, sizeof buf, "b at round %d (wall %.0f)", rounds_to_threshold_b,
                      wall_to_threshold_b);
    else
        std::snprintf(buf, sizeof buf, "b never reaches it");
    out += buf;
    if (wall_ratio > 0.0) {
        std::snprintf(buf, sizeof buf, "; wall ratio a/b = %.3f", wall_ratio);
        out += buf;
    }
    out += '\n';
    return out;
}

}  // namespace dfl::harness
