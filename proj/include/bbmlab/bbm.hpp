#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bbmlab/rng.hpp"

namespace bbmlab {

// standard: drift 0, variance 1 (max-oriented frame).
// abbs: drift 2, variance 2 (min-oriented frame).
enum class Normalization { standard, abbs };

struct PruningSpec {
    // A branch event whose position lies below (running max - cutoff)
    // produces no children; the two suppressed subtrees are logged.
    double cutoff_below_running_max = 20.0;
};

struct PruningRecord {
    std::optional<double> cutoff;
    std::uint64_t discarded_subtrees = 0;
};

// Flat node storage; children of a branch node occupy consecutive slots
// and always appear after their parent. Addresses over {0,1} are
// materialized lazily from parent links.
struct TreeNode {
    double birth_time = 0.0;
    double end_time = 0.0;        // branch time, or the horizon for leaves
    double position_at_end = 0.0; // position at end_time
    std::int32_t parent = -1;
    std::int32_t first_child = -1; // -1: no stored children
};

class ParticleTree {
public:
    ParticleTree(double horizon, Normalization normalization)
        : horizon_(horizon), normalization_(normalization) {}

    // Builds a tree from explicit nodes (synthetic fixtures, readers).
    // Validates parent ordering, birth/end consistency and child adjacency.
    static ParticleTree from_nodes(double horizon, Normalization normalization,
                                   std::vector<TreeNode> nodes);

    double horizon() const { return horizon_; }
    Normalization normalization() const { return normalization_; }
    const std::vector<TreeNode>& nodes() const { return nodes_; }
    const PruningRecord& pruning() const { return pruning_; }

    bool is_leaf(std::int32_t i) const { return nodes_[i].first_child < 0; }
    bool alive_at_horizon(std::int32_t i) const {
        return is_leaf(i) && nodes_[i].end_time >= horizon_;
    }
    // 0 if i is its parent's first child, 1 otherwise (root: 0).
    int child_bit(std::int32_t i) const {
        const std::int32_t p = nodes_[i].parent;
        return p < 0 ? 0 : static_cast<int>(i - nodes_[p].first_child);
    }

    std::string address_of(std::int32_t i) const;
    // -1 when no such node exists.
    std::int32_t node_by_address(const std::string& address) const;
    std::int32_t mrca(std::int32_t a, std::int32_t b) const;

    std::uint64_t alive_count() const;

private:
    friend ParticleTree simulate(double, Normalization, std::optional<PruningSpec>, RngStream&,
                                 std::uint64_t);
    double horizon_;
    Normalization normalization_;
    std::vector<TreeNode> nodes_;
    PruningRecord pruning_;
};

// Exact event-driven simulation: every particle draws an Exp(1) lifetime
// and a single Gaussian displacement per segment; trajectories are never
// discretized. The randomness of each node is a pure function of
// (rng identity, node address), so a pruned run and an unpruned run fed
// copies of the same stream realize identical positions on shared nodes.
//
// Refuses upfront (ResourceRefusal) when the expected node count
// 2 e^horizon exceeds node_budget, and aborts if the realized count
// overshoots the budget.
ParticleTree simulate(double horizon, Normalization normalization,
                      std::optional<PruningSpec> pruning, RngStream& rng,
                      std::uint64_t node_budget = std::uint64_t{1} << 27);

struct SnapshotParticle {
    std::int32_t node = -1;
    double position = 0.0;
    double centered = 0.0; // position - m_t in the standard frame
    double gamma = 0.0;
};

struct PopulationSnapshot {
    double horizon = 0.0;
    Normalization frame = Normalization::standard;
    std::vector<SnapshotParticle> particles;
    PruningRecord pruning;
};

// All particles alive at the horizon, with centered positions and the
// genealogical embedding gamma_t(u) = sum over '1'-ancestors of e^{-birth}.
PopulationSnapshot snapshot(const ParticleTree& tree);

// q_t(u,v) = d_{u and v} / t for distinct particles, 1 on the diagonal.
// Both arguments must be alive at the horizon.
double overlap(const ParticleTree& tree, std::int32_t u, std::int32_t v);
double overlap(const ParticleTree& tree, const std::string& u, const std::string& v);

// Affine frame maps X = sqrt(2)(sqrt(2) t - x) and its inverse. The map
// is an involution pair: to_standard_frame(to_abbs_frame(s)) == s up to
// float rounding. In the abbs frame the centered field holds
// position - (3/2) log t (the min-frame centering).
PopulationSnapshot to_abbs_frame(const PopulationSnapshot& snap);
PopulationSnapshot to_standard_frame(const PopulationSnapshot& snap);

// Binary snapshot interchange.
// Header: magic "BBMS", version u32, t f64, count u64; then one record per
// particle: address bit-length u16, packed address bits (LSB first),
// position f64, gamma f64. Little-endian throughout.
void write_snapshot_binary(const PopulationSnapshot& snap, const ParticleTree& tree,
                           std::ostream& out);

struct SnapshotRecord {
    std::string address;
    double position = 0.0;
    double gamma = 0.0;
};

struct SnapshotFile {
    std::uint32_t version = 0;
    double horizon = 0.0;
    std::vector<SnapshotRecord> records;
};

SnapshotFile read_snapshot_binary(std::istream& in);

} // namespace bbmlab
