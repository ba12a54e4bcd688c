#include "dfl/param_vector.hpp"

#include <cmath>

namespace dfl {

bool ParamVector::finite() const {
    for (double v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace dfl
