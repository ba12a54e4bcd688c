#include "dfl/gossip.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "dfl/errors.hpp"
#include "json.hpp"

namespace dfl::gossip {

void GossipConfig::validate() const {
    if (intra_rounds < 1) throw std::invalid_argument("GossipConfig: intra_rounds must be positive");
    if (inter_rounds < 1) throw std::invalid_argument("GossipConfig: inter_rounds must be positive");
    if (mode == MixingMode::FixedAlpha && !(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("GossipConfig: alpha must lie strictly inside (0,1)");
}

void Accumulator::accumulate(const ParamVector& incoming) {
    if (incoming.sample_count <= 0)
        throw ProtocolError("Accumulator: contribution carries no sample evidence");
    if (weighted_sum.empty()) weighted_sum.assign(incoming.values.size(), 0.0);
    if (weighted_sum.size() != incoming.values.size())
        throw std::invalid_argument("Accumulator: parameter length mismatch");
    double w = static_cast<double>(incoming.sample_count);
    for (std::size_t k = 0; k < weighted_sum.size(); ++k) weighted_sum[k] += incoming.values[k] * w;
    total_count += incoming.sample_count;
}

ParamVector Accumulator::finalise() const {
    if (total_count == 0) throw ProtocolError("Accumulator: finalise on empty accumulator");
    ParamVector out;
    out.values.resize(weighted_sum.size());
    double inv = 1.0 / static_cast<double>(total_count);
    for (std::size_t k = 0; k < weighted_sum.size(); ++k) out.values[k] = weighted_sum[k] * inv;
    out.sample_count = total_count;
    return out;
}

ParamVector mix_fixed_alpha(const ParamVector& own, const ParamVector& peer, double alpha) {
    if (own.values.size() != peer.values.size())
        throw std::invalid_argument("mix_fixed_alpha: parameter length mismatch");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("mix_fixed_alpha: alpha must lie strictly inside (0,1)");
    ParamVector out;
    out.values.resize(own.values.size());
    for (std::size_t k = 0; k < own.values.size(); ++k)
        out.values[k] = alpha * own.values[k] + (1.0 - alpha) * peer.values[k];
    out.sample_count = own.sample_count;
    return out;
}

sim::TopologyGraph eligible_subgraph(const sim::TopologyGraph& topo,
                                     const clustering::ClusterRound& clusters, Phase phase,
                                     bool heads_only_inter) {
    std::vector<int> cid(static_cast<std::size_t>(topo.n), -1);
    std::set<int> heads;
    for (const auto& c : clusters.clusters) {
        heads.insert(c.head);
        for (int m : c.members) cid[static_cast<std::size_t>(m)] = c.cluster_id;
    }
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < topo.n; ++i) {
        for (int j : topo.adj[static_cast<std::size_t>(i)]) {
            if (j <= i) continue;
            bool same = cid[static_cast<std::size_t>(i)] == cid[static_cast<std::size_t>(j)];
            if (phase == Phase::Intra) {
                if (same) edges.emplace_back(i, j);
            } else {
                if (same) continue;
                if (heads_only_inter && (!heads.count(i) || !heads.count(j))) continue;
                edges.emplace_back(i, j);
            }
        }
    }
    return sim::build_graph(topo.n, edges);
}

namespace {

// mean squared distance of device models from their unweighted mean
double consensus_sq(const std::vector<sim::DeviceState>& devices) {
    if (devices.size() < 2) return 0.0;
    std::size_t dim = devices.front().params.values.size();
    std::vector<double> mean(dim, 0.0);
    for (const auto& d : devices)
        for (std::size_t k = 0; k < dim; ++k) mean[k] += d.params.values[k];
    for (auto& v : mean) v /= static_cast<double>(devices.size());
    double total = 0.0;
    for (const auto& d : devices) {
        double s = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
            double diff = d.params.values[k] - mean[k];
            s += diff * diff;
        }
        total += s;
    }
    return total / static_cast<double>(devices.size());
}

PhaseReport run_phase(std::vector<sim::DeviceState>& devices,
                      const clustering::ClusterRound& clusters, const sim::TopologyGraph& topo,
                      const GossipConfig& cfg, std::uint64_t seed, Phase phase) {
    cfg.validate();
    int n = static_cast<int>(devices.size());
    int iterations = phase == Phase::Intra ? cfg.intra_rounds : cfg.inter_rounds;
    std::uint64_t tag = phase == Phase::Intra ? stream::kGossipIntra : stream::kGossipInter;

    PhaseReport rep;
    rep.phase = phase;
    rep.graph = eligible_subgraph(topo, clusters, phase, cfg.heads_only_inter);

    std::vector<int> cid(static_cast<std::size_t>(n), -1);
    for (const auto& c : clusters.clusters)
        for (int m : c.members) cid[static_cast<std::size_t>(m)] = c.cluster_id;

    for (auto& d : devices) {
        d.contacted.clear();
        d.inbox.clear();
    }

    std::vector<Accumulator> acc(static_cast<std::size_t>(n));
    std::vector<std::set<int>> folded(static_cast<std::size_t>(n));
    std::vector<char> fold_happened(static_cast<std::size_t>(n), 0);
    std::vector<char> mixed(static_cast<std::size_t>(n), 0);
    if (cfg.mode == MixingMode::CumulativeFedAvg) {
        for (auto& d : devices)
            if (d.params.sample_count > 0) acc[static_cast<std::size_t>(d.id)].accumulate(d.params);
    }

    for (int g = 0; g < iterations; ++g) {
        const sim::TopologyGraph* egraph = &rep.graph;
        sim::TopologyGraph fresh_graph;
        if (cfg.resnapshot_each_iteration) {
            fresh_graph = eligible_subgraph(sim::snapshot_topology(devices), clusters, phase,
                                            cfg.heads_only_inter);
            egraph = &fresh_graph;
        }
        Rng rng(derive_seed(seed, {tag, static_cast<std::uint64_t>(g)}));
        std::vector<Pairing> pairs = pair_devices(devices, *egraph, rng);

        std::vector<char> busy(static_cast<std::size_t>(n), 0);
        for (const auto& p : pairs) {
            // pairing validity is load-bearing: a violation means the protocol
            // state is corrupt, so abort rather than continue
            if (busy[static_cast<std::size_t>(p.a)] || busy[static_cast<std::size_t>(p.b)])
                throw ProtocolError("gossip: device paired twice in one iteration");
            busy[static_cast<std::size_t>(p.a)] = busy[static_cast<std::size_t>(p.b)] = 1;
            if (!egraph->edge(p.a, p.b))
                throw ProtocolError("gossip: pairing is not a topology edge");
            bool same = cid[static_cast<std::size_t>(p.a)] == cid[static_cast<std::size_t>(p.b)];
            if (phase == Phase::Intra ? !same : same)
                throw ProtocolError("gossip: pairing violates phase eligibility");
            sim::deliver(devices, p.a, p.b, devices[static_cast<std::size_t>(p.a)].params);
            sim::deliver(devices, p.b, p.a, devices[static_cast<std::size_t>(p.b)].params);
            rep.messages += 2;
        }

        for (auto& d : devices) {
            for (const auto& msg : d.inbox) {
                if (cfg.mode == MixingMode::CumulativeFedAvg) {
                    // each peer is folded at most once per phase; models with no
                    // sample evidence are heard but never aggregated
                    if (folded[static_cast<std::size_t>(d.id)].insert(msg.from).second &&
                        msg.payload.sample_count > 0) {
                        acc[static_cast<std::size_t>(d.id)].accumulate(msg.payload);
                        fold_happened[static_cast<std::size_t>(d.id)] = 1;
                    }
                } else {
                    d.params = mix_fixed_alpha(d.params, msg.payload, cfg.alpha);
                    mixed[static_cast<std::size_t>(d.id)] = 1;
                }
            }
            d.inbox.clear();
        }

        rep.pairings.push_back(std::move(pairs));
        rep.consensus_after.push_back(consensus_sq(devices));
    }

    if (cfg.mode == MixingMode::CumulativeFedAvg) {
        for (auto& d : devices) {
            std::size_t i = static_cast<std::size_t>(d.id);
            if (!fold_happened[i]) continue;  // nothing aggregated: model stays untouched
            d.params = acc[i].finalise();
            d.opt.reset();
        }
    } else {
        for (auto& d : devices)
            if (mixed[static_cast<std::size_t>(d.id)]) d.opt.reset();
    }
    return rep;
}

}  // namespace

std::vector<Pairing> pair_devices(std::vector<sim::DeviceState>& devices,
                                  const sim::TopologyGraph& eligible, Rng& rng) {
    int n = eligible.n;
    std::vector<int> proposal(static_cast<std::size_t>(n), -1);
    for (int i = 0; i < n; ++i) {
        const auto& nbrs = eligible.adj[static_cast<std::size_t>(i)];
        if (nbrs.empty()) continue;
        std::vector<int> fresh;
        for (int j : nbrs)
            if (!devices[static_cast<std::size_t>(i)].contacted.count(j)) fresh.push_back(j);
        const std::vector<int>& pool = fresh.empty() ? nbrs : fresh;
        proposal[static_cast<std::size_t>(i)] =
            pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(pool.size()) - 1))];
    }

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    std::vector<char> matched(static_cast<std::size_t>(n), 0);
    std::vector<Pairing> pairs;
    for (int i : order) {
        if (matched[static_cast<std::size_t>(i)]) continue;
        int j = proposal[static_cast<std::size_t>(i)];
        if (j < 0 || matched[static_cast<std::size_t>(j)]) continue;
        matched[static_cast<std::size_t>(i)] = matched[static_cast<std::size_t>(j)] = 1;
        pairs.push_back({std::min(i, j), std::max(i, j)});
    }

    // devices whose proposal collided pick again among unmatched neighbours so
    // the matching ends maximal and nobody idles next to an idle neighbour
    for (int i : order) {
        if (matched[static_cast<std::size_t>(i)]) continue;
        std::vector<int> fresh, any;
        for (int j : eligible.adj[static_cast<std::size_t>(i)]) {
            if (matched[static_cast<std::size_t>(j)]) continue;
            any.push_back(j);
            if (!devices[static_cast<std::size_t>(i)].contacted.count(j)) fresh.push_back(j);
        }
        const std::vector<int>& pool = fresh.empty() ? any : fresh;
        if (pool.empty()) continue;
        int j = pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(pool.size()) - 1))];
        matched[static_cast<std::size_t>(i)] = matched[static_cast<std::size_t>(j)] = 1;
        pairs.push_back({std::min(i, j), std::max(i, j)});
    }

    for (const auto& p : pairs) {
        devices[static_cast<std::size_t>(p.a)].contacted.insert(p.b);
        devices[static_cast<std::size_t>(p.b)].contacted.insert(p.a);
    }
    std::sort(pairs.begin(), pairs.end(),
              [](const Pairing& x, const Pairing& y) { return x.a < y.a; });
    return pairs;
}

PhaseReport run_intra_phase(std::vector<sim::DeviceState>& devices,
                            const clustering::ClusterRound& clusters,
                            const sim::TopologyGraph& topo, const GossipConfig& cfg,
                            std::uint64_t seed) {
    return run_phase(devices, clusters, topo, cfg, seed, Phase::Intra);
}

PhaseReport run_inter_phase(std::vector<sim::DeviceState>& devices,
                            const clustering::ClusterRound& clusters,
                            const sim::TopologyGraph& topo, const GossipConfig& cfg,
                            std::uint64_t seed) {
    return run_phase(devices, clusters, topo, cfg, seed, Phase::Inter);
}

std::string RoundReport::to_json_line() const {
    nlohmann::json j;
    j["round"] = round;
    j["clusters"] = cluster_count;
    j["clustering_iterations"] = clustering_iterations;
    j["messages"] = messages;
    auto phase_json = [](const PhaseReport& p) {
        nlohmann::json q;
        q["messages"] = p.messages;
        auto all = nlohmann::json::array();
        for (const auto& iter : p.pairings) {
            auto one = nlohmann::json::array();
            for (const auto& pr : iter) one.push_back({pr.a, pr.b});
            all.push_back(one);
        }
        q["pairings"] = all;
        q["consensus_after"] = p.consensus_after;
        return q;
    };
    j["intra"] = phase_json(intra);
    j["inter"] = phase_json(inter);
    j["consensus_distance"] = consensus_distance;
    return j.dump();
}

RoundReport run_round(std::vector<sim::DeviceState>& devices, const sim::FieldConfig& field,
                      const GossipConfig& gcfg, const clustering::ClusteringConfig& ccfg,
                      const RoundSchedule& sched, std::uint64_t seed, int round_index) {
    gcfg.validate();
    ccfg.validate(static_cast<int>(devices.size()));
    if (sched.epochs < 0) throw std::invalid_argument("run_round: epochs must be non-negative");
    if (sched.batch_size < 1) throw std::invalid_argument("run_round: batch_size must be positive");

    std::uint64_t rseed = derive_seed(seed, {static_cast<std::uint64_t>(round_index)});
    RoundReport rep;
    rep.round = round_index;

    sim::TopologyGraph topo = sim::snapshot_topology(devices);
    clustering::ClusterRound clusters =
        ccfg.criterion == clustering::Criterion::EMD
            ? clustering::dk_means_emd(devices, topo, ccfg, rseed)
            : clustering::dk_means(devices, topo, ccfg, rseed);
    rep.cluster_count = static_cast<int>(clusters.clusters.size());
    rep.clustering_iterations = clusters.iterations_used;

    for (auto& d : devices) {
        Rng trng(derive_seed(rseed, {stream::kTraining, static_cast<std::uint64_t>(d.id)}));
        sim::train_local(d, sched.shape, sched.epochs, sched.batch_size, trng);
    }

    rep.intra = run_intra_phase(devices, clusters, topo, gcfg, rseed);
    rep.inter = run_inter_phase(devices, clusters, topo, gcfg, rseed);
    rep.messages = rep.intra.messages + rep.inter.messages;

    std::size_t dim = devices.empty() ? 0 : devices.front().params.values.size();
    std::vector<double> mean(dim, 0.0);
    for (const auto& d : devices)
        for (std::size_t k = 0; k < dim; ++k) mean[k] += d.params.values[k];
    if (!devices.empty())
        for (auto& v : mean) v /= static_cast<double>(devices.size());
    for (const auto& d : devices) {
        double s = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
            double diff = d.params.values[k] - mean[k];
            s += diff * diff;
        }
        rep.consensus_distance.push_back(std::sqrt(s));
    }

    Rng mrng(derive_seed(rseed, {stream::kMobility}));
    sim::step_mobility(devices, field.field_size, sched.mobility_dt, mrng);
    return rep;
}

}  // namespace dfl::gossip
