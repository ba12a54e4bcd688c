#pragma once

#include <cstdint>
#include <vector>

namespace dfl {

// Flat model parameter vector plus the number of training samples behind it.
// sample_count is the aggregation weight exchanged during gossip; it is 0
// only for untrained (zero-initialised) models.
struct ParamVector {
    std::vector<double> values;
    std::int64_t sample_count = 0;

    ParamVector() = default;
    ParamVector(std::vector<double> v, std::int64_t n) : values(std::move(v)), sample_count(n) {}

    static ParamVector zeros(std::size_t dim) { return ParamVector(std::vector<double>(dim, 0.0), 0); }

    std::size_t size() const { return values.size(); }
    bool finite() const;
};

}  // namespace dfl
