#pragma once

#include <cstddef>
#include <vector>

namespace bbmlab {

// Finite list of weighted atoms representing a point-process sample.
// Locations are positions on the line; weights are carried in log space
// end-to-end (linear weights only ever appear inside log-sum-exp kernels).
struct WeightedAtom {
    double location = 0.0;
    double log_weight = 0.0;
};

struct WeightedAtomConfiguration {
    std::vector<WeightedAtom> atoms;
    // When set, locations are nonincreasing.
    bool sorted_nonincreasing = false;

    std::size_t size() const { return atoms.size(); }
    bool empty() const { return atoms.empty(); }

    // Sorts atoms by location, largest first, and sets the flag.
    void sort_nonincreasing();

    // True when all locations/weights are finite and the sorted flag, if
    // set, is consistent with the data.
    bool valid() const;
};

} // namespace bbmlab
