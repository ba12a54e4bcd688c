#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "dfl/analysis.hpp"
#include "dfl/clustering.hpp"
#include "dfl/gossip.hpp"
#include "dfl/harness.hpp"
#include "dfl/rng.hpp"
#include "dfl/sim.hpp"

namespace {

int cmd_run(const std::string& preset_name, const std::string& config_path, bool seed_given,
            std::uint64_t seed, const std::string& out_dir) {
    if (preset_name.empty() == config_path.empty()) {
        std::fprintf(stderr, "run: give exactly one of --preset or --config\n");
        return 2;
    }
    dfl::harness::ExperimentConfig cfg = preset_name.empty()
                                             ? dfl::harness::load_config_file(config_path)
                                             : dfl::harness::preset(preset_name);
    if (seed_given) cfg.seed = seed;
    if (!out_dir.empty()) cfg.out_dir = out_dir;

    dfl::harness::RunResult res = dfl::harness::run_experiment(cfg);
    if (res.csv_path.empty()) {
        std::printf("%s\n", dfl::harness::metrics_csv_header().c_str());
        for (const auto& r : res.records) std::printf("%s\n", dfl::harness::to_csv_row(r).c_str());
    } else {
        std::printf("wrote %s (%zu records)\n", res.csv_path.c_str(), res.records.size());
        if (!res.report_path.empty()) std::printf("wrote %s\n", res.report_path.c_str());
        if (!res.records.empty()) {
            const auto& last = res.records.back();
            std::printf("final: %s round %d acc_mean %.4f\n", last.method.c_str(), last.round,
                        last.acc_mean);
        }
    }
    return 0;
}

int cmd_compare(const std::string& path_a, const std::string& path_b, double threshold) {
    auto a = dfl::harness::load_metrics_csv(path_a);
    auto b = dfl::harness::load_metrics_csv(path_b);
    auto cmp = dfl::harness::compare_runs(a, b, threshold);
    std::printf("%s", cmp.format().c_str());
    return 0;
}

int cmd_spectra(const std::string& config_path, int rounds_override) {
    dfl::harness::ExperimentConfig cfg = dfl::harness::load_config_file(config_path);
    cfg.validate();
    cfg.field.seed = cfg.seed;
    if (rounds_override > 0) cfg.rounds = rounds_override;
    if (cfg.clustering.criterion == dfl::clustering::Criterion::EMD) {
        std::fprintf(stderr, "spectra: no data is loaded, falling back to geographic clustering\n");
        cfg.clustering.criterion = dfl::clustering::Criterion::Geographic;
    }

    // positions and mobility only; models and shards stay empty
    std::vector<dfl::data::DatasetView> shards(static_cast<std::size_t>(cfg.field.device_count));
    dfl::model::ModelShape shape;
    auto devices = dfl::sim::make_devices(cfg.field, shards, shape, cfg.optimiser);

    std::printf(
        "round,lambda_2,lambda_n,rho_mixing,laplacian_lambda_2,rho_laplacian,flagged,"
        "lambda2_intra,lambda2_inter,t_ave_lower,t_ave_upper\n");
    for (int r = 1; r <= cfg.rounds; ++r) {
        auto topo = dfl::sim::snapshot_topology(devices);
        auto rep = dfl::analysis::spectral_report(topo);
        std::uint64_t rseed = dfl::derive_seed(cfg.seed, {static_cast<std::uint64_t>(r)});
        auto clusters = dfl::clustering::dk_means(devices, topo, cfg.clustering, rseed);
        auto intra = dfl::gossip::eligible_subgraph(topo, clusters, dfl::gossip::Phase::Intra);
        auto inter = dfl::gossip::eligible_subgraph(topo, clusters, dfl::gossip::Phase::Inter,
                                                    cfg.gossip.heads_only_inter);
        double l2i = dfl::analysis::spectral_report(intra).lambda_2;
        double l2x = dfl::analysis::spectral_report(inter).lambda_2;
        double lower = std::nan("");
        double upper = std::nan("");
        if (rep.lambda_2 > 0.0 && rep.lambda_2 < 1.0) {
            auto bounds = dfl::analysis::averaging_time_bounds(1e-3, rep.lambda_2);
            lower = bounds.first;
            upper = bounds.second;
        }
        std::printf("%d,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%.17g,%.17g,%.17g,%.17g\n", r,
                    rep.lambda_2, rep.lambda_n, rep.rho_mixing, rep.laplacian_lambda_2,
                    rep.rho_laplacian, rep.flagged ? 1 : 0, l2i, l2x, lower, upper);
        dfl::Rng mrng(dfl::derive_seed(rseed, {dfl::stream::kMobility}));
        dfl::sim::step_mobility(devices, cfg.field.field_size, cfg.mobility_dt, mrng);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bilayer gossip learning simulator"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "execute one experiment and emit metrics");
    std::string preset_name, config_path, out_dir;
    std::uint64_t seed = 0;
    run->add_option("--preset", preset_name, "named preset configuration");
    run->add_option("--config", config_path, "config file with key = value lines");
    auto* seed_opt = run->add_option("--seed", seed, "override the config seed");
    run->add_option("--out", out_dir, "directory for metrics.csv and round reports");

    auto* cmp = app.add_subcommand("compare", "compare two metrics.csv files");
    std::string path_a, path_b;
    double threshold = 0.9;
    cmp->add_option("run_a", path_a, "first metrics.csv")->required();
    cmp->add_option("run_b", path_b, "second metrics.csv")->required();
    cmp->add_option("--threshold", threshold, "accuracy threshold for rounds-to-threshold");

    auto* spec = app.add_subcommand("spectra", "spectral sweep over the mobility topology");
    std::string spectra_config;
    int spectra_rounds = 0;
    spec->add_option("--config", spectra_config, "config file")->required();
    spec->add_option("--rounds", spectra_rounds, "override the number of snapshots");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return cmd_run(preset_name, config_path, seed_opt->count() > 0, seed, out_dir);
        if (cmp->parsed()) return cmd_compare(path_a, path_b, threshold);
        if (spec->parsed()) return cmd_spectra(spectra_config, spectra_rounds);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
