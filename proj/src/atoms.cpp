#include "bbmlab/atoms.hpp"

#include <algorithm>
#include <cmath>

namespace bbmlab {

void WeightedAtomConfiguration::sort_nonincreasing() {
    std::sort(atoms.begin(), atoms.end(),
              [](const WeightedAtom& a, const WeightedAtom& b) {
                  return a.location > b.location;
              });
    sorted_nonincreasing = true;
}

bool WeightedAtomConfiguration::valid() const {
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        if (!std::isfinite(atoms[i].location) || !std::isfinite(atoms[i].log_weight))
            return false;
        if (sorted_nonincreasing && i > 0 && atoms[i].location > atoms[i - 1].location)
            return false;
    }
    return true;
}

} // namespace bbmlab
