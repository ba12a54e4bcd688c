#include "dfl/sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dfl/errors.hpp"

namespace dfl::sim {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kHeadingSigma = 0.3;

double sq_dist(const DeviceState& a, const DeviceState& b) {
    double dx = a.x - b.x;
    double dy = a.y - b.y;
    return dx * dx + dy * dy;
}

double wrap_angle(double a) {
    while (a > kPi) a -= 2.0 * kPi;
    while (a <= -kPi) a += 2.0 * kPi;
    return a;
}
}  // namespace

void FieldConfig::validate() const {
    if (field_size <= 0.0) throw std::invalid_argument("FieldConfig: field_size must be positive");
    if (device_count < 1) throw std::invalid_argument("FieldConfig: device_count must be positive");
    if (comm_range <= 0.0) throw std::invalid_argument("FieldConfig: comm_range must be positive");
    if (speed < 0.0) throw std::invalid_argument("FieldConfig: speed must be >= 0");
}

bool TopologyGraph::edge(int i, int j) const {
    const auto& row = adj[static_cast<std::size_t>(i)];
    return std::binary_search(row.begin(), row.end(), j);
}

int TopologyGraph::connected_components() const {
    std::vector<int> comp(static_cast<std::size_t>(n), -1);
    int count = 0;
    std::vector<int> stack;
    for (int s = 0; s < n; ++s) {
        if (comp[static_cast<std::size_t>(s)] >= 0) continue;
        ++count;
        stack.push_back(s);
        comp[static_cast<std::size_t>(s)] = count;
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            for (int v : adj[static_cast<std::size_t>(u)]) {
                if (comp[static_cast<std::size_t>(v)] < 0) {
                    comp[static_cast<std::size_t>(v)] = count;
                    stack.push_back(v);
                }
            }
        }
    }
    return count;
}

std::vector<DeviceState> make_devices(const FieldConfig& field,
                                      const std::vector<data::DatasetView>& shards,
                                      const model::ModelShape& shape,
                                      const model::OptimiserState& opt_template) {
    field.validate();
    if (static_cast<int>(shards.size()) != field.device_count)
        throw std::invalid_argument("make_devices: shard count does not match device count");

    Rng rng(derive_seed(field.seed, {stream::kDeviceInit}));
    std::vector<DeviceState> devices(static_cast<std::size_t>(field.device_count));
    for (int i = 0; i < field.device_count; ++i) {
        DeviceState& d = devices[static_cast<std::size_t>(i)];
        d.id = i;
        d.x = rng.uniform(0.0, field.field_size);
        d.y = rng.uniform(0.0, field.field_size);
        d.heading = rng.uniform(-kPi, kPi);
        d.speed = field.speed;
        d.comm_range = field.comm_range;
        d.shard = shards[static_cast<std::size_t>(i)];
        d.params = ParamVector::zeros(shape.param_count());
        d.opt = opt_template;
    }
    return devices;
}

void step_mobility(std::vector<DeviceState>& devices, double field_size, double dt, Rng& rng) {
    if (dt <= 0.0) throw std::invalid_argument("step_mobility: dt must be positive");
    if (field_size <= 0.0) throw std::invalid_argument("step_mobility: field_size must be positive");
    for (DeviceState& d : devices) {
        d.heading = wrap_angle(d.heading + rng.normal(0.0, kHeadingSigma));
        double nx = d.x + d.speed * dt * std::cos(d.heading);
        double ny = d.y + d.speed * dt * std::sin(d.heading);

        // reflect on each axis until inside; headings flip accordingly
        bool flip_x = false, flip_y = false;
        while (nx < 0.0 || nx > field_size) {
            nx = nx < 0.0 ? -nx : 2.0 * field_size - nx;
            flip_x = !flip_x;
        }
        while (ny < 0.0 || ny > field_size) {
            ny = ny < 0.0 ? -ny : 2.0 * field_size - ny;
            flip_y = !flip_y;
        }
        if (flip_x) d.heading = wrap_angle(kPi - d.heading);
        if (flip_y) d.heading = wrap_angle(-d.heading);
        d.x = nx;
        d.y = ny;
    }
}

TopologyGraph snapshot_topology(const std::vector<DeviceState>& devices) {
    if (devices.empty()) throw std::invalid_argument("snapshot_topology: no devices");
    int n = static_cast<int>(devices.size());
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            double r = std::min(devices[static_cast<std::size_t>(i)].comm_range,
                                devices[static_cast<std::size_t>(j)].comm_range);
            if (sq_dist(devices[static_cast<std::size_t>(i)], devices[static_cast<std::size_t>(j)]) <=
                r * r)
                edges.emplace_back(i, j);
        }
    }
    return build_graph(n, edges);
}

TopologyGraph build_graph(int n, const std::vector<std::pair<int, int>>& edges) {
    TopologyGraph g;
    g.n = n;
    g.adj.assign(static_cast<std::size_t>(n), {});
    for (auto [i, j] : edges) {
        if (i == j) continue;
        g.adj[static_cast<std::size_t>(i)].push_back(j);
        g.adj[static_cast<std::size_t>(j)].push_back(i);
    }
    for (auto& row : g.adj) {
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
    }
    g.mixing.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        double row_sum = 0.0;
        auto deg = [&](int k) { return static_cast<double>(g.adj[static_cast<std::size_t>(k)].size()); };
        for (int j : g.adj[static_cast<std::size_t>(i)]) {
            double w = 1.0 / (2.0 * std::max(deg(i), deg(j)));
            g.mixing[static_cast<std::size_t>(i) * n + j] = w;
            row_sum += w;
        }
        g.mixing[static_cast<std::size_t>(i) * n + i] = 1.0 - row_sum;
    }
    return g;
}

std::vector<int> neighbours(int device_id, const TopologyGraph& graph) {
    if (device_id < 0 || device_id >= graph.n)
        throw std::invalid_argument("neighbours: device not in graph");
    return graph.adj[static_cast<std::size_t>(device_id)];
}

void deliver(std::vector<DeviceState>& devices, int sender, int receiver,
             const ParamVector& payload) {
    if (sender < 0 || sender >= static_cast<int>(devices.size()) || receiver < 0 ||
        receiver >= static_cast<int>(devices.size()))
        throw std::invalid_argument("deliver: unknown device id");
    const DeviceState& s = devices[static_cast<std::size_t>(sender)];
    DeviceState& r = devices[static_cast<std::size_t>(receiver)];
    double range = std::min(s.comm_range, r.comm_range);
    if (sq_dist(s, r) > range * range)
        throw ProtocolError("deliver: receiver " + std::to_string(receiver) +
                            " out of range of sender " + std::to_string(sender));
    r.inbox.push_back(Message{sender, payload});
}

void train_local(DeviceState& device, const model::ModelShape& shape, int epochs, int batch_size,
                 Rng& rng) {
    if (device.shard.empty()) {
        device.training_skipped = true;
        return;
    }
    device.training_skipped = false;
    model::train(device.params, device.opt, shape, device.shard, epochs, batch_size, rng);
}

}  // namespace dfl::sim
