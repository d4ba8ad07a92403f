#include "bbmlab/bbm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <queue>
#include <stdexcept>

#include "bbmlab/constants.hpp"
#include "bbmlab/errors.hpp"

namespace bbmlab {

namespace {

struct Kinematics {
    double drift;
    double sigma;
};

Kinematics kinematics(Normalization n) {
    return n == Normalization::standard ? Kinematics{0.0, 1.0}
                                        : Kinematics{2.0, std::numbers::sqrt2};
}

} // namespace

ParticleTree ParticleTree::from_nodes(double horizon, Normalization normalization,
                                      std::vector<TreeNode> nodes) {
    ParticleTree tree(horizon, normalization);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const TreeNode& n = nodes[i];
        if (i == 0) {
            if (n.parent != -1 || n.birth_time != 0.0)
                throw std::domain_error("from_nodes: bad root");
        } else {
            if (n.parent < 0 || n.parent >= static_cast<std::int32_t>(i))
                throw std::domain_error("from_nodes: parent must precede child");
            const TreeNode& p = nodes[static_cast<std::size_t>(n.parent)];
            if (n.birth_time != p.end_time)
                throw std::domain_error("from_nodes: child birth != parent branch time");
            const std::int32_t fc = p.first_child;
            if (fc < 0 || (static_cast<std::int32_t>(i) != fc &&
                           static_cast<std::int32_t>(i) != fc + 1))
                throw std::domain_error("from_nodes: children must be adjacent to first_child");
        }
        if (!(n.birth_time < n.end_time) || n.end_time > horizon)
            throw std::domain_error("from_nodes: need birth < end <= horizon");
    }
    tree.nodes_ = std::move(nodes);
    return tree;
}

std::string ParticleTree::address_of(std::int32_t i) const {
    std::string bits;
    while (nodes_[i].parent >= 0) {
        bits.push_back(child_bit(i) ? '1' : '0');
        i = nodes_[i].parent;
    }
    std::reverse(bits.begin(), bits.end());
    return bits;
}

std::int32_t ParticleTree::node_by_address(const std::string& address) const {
    if (nodes_.empty())
        return -1;
    std::int32_t i = 0;
    for (char c : address) {
        const std::int32_t fc = nodes_[i].first_child;
        if (fc < 0)
            return -1;
        i = fc + (c == '1' ? 1 : 0);
    }
    return i;
}

std::int32_t ParticleTree::mrca(std::int32_t a, std::int32_t b) const {
    // Parents always precede children in the flat array.
    while (a != b) {
        if (a > b)
            a = nodes_[a].parent;
        else
            b = nodes_[b].parent;
    }
    return a;
}

std::uint64_t ParticleTree::alive_count() const {
    std::uint64_t n = 0;
    for (std::int32_t i = 0; i < static_cast<std::int32_t>(nodes_.size()); ++i)
        n += alive_at_horizon(i) ? 1 : 0;
    return n;
}

ParticleTree simulate(double horizon, Normalization normalization,
                      std::optional<PruningSpec> pruning, RngStream& rng,
                      std::uint64_t node_budget) {
    if (!(horizon > 0.0))
        throw std::domain_error("simulate: horizon must be positive");
    if (pruning && !(pruning->cutoff_below_running_max > 0.0))
        throw std::domain_error("simulate: pruning cutoff must be positive");

    const double expected_nodes = 2.0 * std::exp(horizon);
    if (expected_nodes > static_cast<double>(node_budget)) {
        throw ResourceRefusal("simulate: expected node count 2 e^t = " +
                                  std::to_string(expected_nodes) + " exceeds budget " +
                                  std::to_string(node_budget),
                              expected_nodes, static_cast<double>(node_budget));
    }

    const auto [drift, sigma] = kinematics(normalization);

    ParticleTree tree(horizon, normalization);
    auto& nodes = tree.nodes_;
    nodes.reserve(static_cast<std::size_t>(std::min(expected_nodes * 2.0, 1e7)));
    std::vector<RngStream> streams;
    streams.reserve(nodes.capacity());
    if (pruning)
        tree.pruning_.cutoff = pruning->cutoff_below_running_max;

    // Each node consumes draws only from its own derived stream.
    auto create_node = [&](std::int32_t parent, double birth, double pos_birth,
                           RngStream stream) -> std::int32_t {
        if (nodes.size() + 1 > node_budget)
            throw ResourceRefusal("simulate: realized node count exceeded budget",
                                  static_cast<double>(nodes.size() + 1),
                                  static_cast<double>(node_budget));
        TreeNode n;
        n.parent = parent;
        n.birth_time = birth;
        const double lifetime = stream.exponential();
        n.end_time = std::min(birth + lifetime, horizon);
        const double dt = n.end_time - birth;
        n.position_at_end = pos_birth + drift * dt + sigma * std::sqrt(dt) * stream.normal();
        nodes.push_back(n);
        streams.push_back(stream);
        return static_cast<std::int32_t>(nodes.size()) - 1;
    };

    const std::int32_t root = create_node(-1, 0.0, 0.0, rng.split(rng.next_u64()));

    if (!pruning) {
        // Processing order is irrelevant without pruning; a LIFO walk is
        // cheaper than a time-ordered queue.
        std::vector<std::int32_t> stack{root};
        while (!stack.empty()) {
            const std::int32_t i = stack.back();
            stack.pop_back();
            if (nodes[i].end_time >= horizon)
                continue;
            const RngStream s = streams[i];
            const double b = nodes[i].end_time;
            const double p = nodes[i].position_at_end;
            const std::int32_t c0 = create_node(i, b, p, s.split(0));
            create_node(i, b, p, s.split(1));
            nodes[i].first_child = c0;
            stack.push_back(c0);
            stack.push_back(c0 + 1);
        }
        return tree;
    }

    // The running max must evolve in event-time order for the pruning rule
    // to make sense, so branch events are processed chronologically.
    const double cutoff = pruning->cutoff_below_running_max;
    using Event = std::pair<double, std::int32_t>;
    std::priority_queue<Event, std::vector<Event>, std::greater<>> events;
    events.emplace(nodes[root].end_time, root);
    double running_max = -std::numeric_limits<double>::infinity();
    while (!events.empty()) {
        const auto [t_event, i] = events.top();
        events.pop();
        running_max = std::max(running_max, nodes[i].position_at_end);
        if (t_event >= horizon)
            continue;
        if (nodes[i].position_at_end < running_max - cutoff) {
            tree.pruning_.discarded_subtrees += 2;
            continue;
        }
        const RngStream s = streams[i];
        const double b = nodes[i].end_time;
        const double p = nodes[i].position_at_end;
        const std::int32_t c0 = create_node(i, b, p, s.split(0));
        create_node(i, b, p, s.split(1));
        nodes[i].first_child = c0;
        events.emplace(nodes[c0].end_time, c0);
        events.emplace(nodes[c0 + 1].end_time, c0 + 1);
    }
    return tree;
}

PopulationSnapshot snapshot(const ParticleTree& tree) {
    const auto& nodes = tree.nodes();
    PopulationSnapshot snap;
    snap.horizon = tree.horizon();
    snap.frame = tree.normalization();
    snap.pruning = tree.pruning();

    // gamma propagates root-to-leaf; children always follow parents in
    // index order, so one forward sweep suffices.
    std::vector<double> gamma(nodes.size(), 0.0);
    for (std::int32_t i = 0; i < static_cast<std::int32_t>(nodes.size()); ++i) {
        const std::int32_t fc = nodes[i].first_child;
        if (fc >= 0) {
            gamma[fc] = gamma[i];
            gamma[fc + 1] = gamma[i] + std::exp(-nodes[i].end_time);
        }
    }

    const double center = tree.normalization() == Normalization::standard
                              ? centering_m(tree.horizon())
                              : 1.5 * std::log(tree.horizon());
    snap.particles.reserve(nodes.size() / 2 + 1);
    for (std::int32_t i = 0; i < static_cast<std::int32_t>(nodes.size()); ++i) {
        if (!tree.alive_at_horizon(i))
            continue;
        SnapshotParticle p;
        p.node = i;
        p.position = nodes[i].position_at_end;
        p.centered = p.position - center;
        p.gamma = gamma[i];
        snap.particles.push_back(p);
    }
    return snap;
}

double overlap(const ParticleTree& tree, std::int32_t u, std::int32_t v) {
    const auto n = static_cast<std::int32_t>(tree.nodes().size());
    if (u < 0 || v < 0 || u >= n || v >= n || !tree.alive_at_horizon(u) ||
        !tree.alive_at_horizon(v))
        throw std::domain_error("overlap: particle not alive at horizon");
    if (u == v)
        return 1.0;
    const std::int32_t a = tree.mrca(u, v);
    return tree.nodes()[a].end_time / tree.horizon();
}

double overlap(const ParticleTree& tree, const std::string& u, const std::string& v) {
    const std::int32_t iu = tree.node_by_address(u);
    const std::int32_t iv = tree.node_by_address(v);
    if (iu < 0 || iv < 0)
        throw std::domain_error("overlap: unknown address");
    return overlap(tree, iu, iv);
}

namespace {

PopulationSnapshot map_frame(const PopulationSnapshot& snap, Normalization target) {
    PopulationSnapshot out = snap;
    out.frame = target;
    const double t = snap.horizon;
    const double center = target == Normalization::standard ? centering_m(t)
                                                            : 1.5 * std::log(t);
    for (auto& p : out.particles) {
        p.position = target == Normalization::abbs
                         ? std::numbers::sqrt2 * (std::numbers::sqrt2 * t - p.position)
                         : std::numbers::sqrt2 * t - p.position / std::numbers::sqrt2;
        p.centered = p.position - center;
    }
    return out;
}

} // namespace

PopulationSnapshot to_abbs_frame(const PopulationSnapshot& snap) {
    if (snap.frame != Normalization::standard)
        throw std::domain_error("to_abbs_frame: snapshot not in the standard frame");
    return map_frame(snap, Normalization::abbs);
}

PopulationSnapshot to_standard_frame(const PopulationSnapshot& snap) {
    if (snap.frame != Normalization::abbs)
        throw std::domain_error("to_standard_frame: snapshot not in the abbs frame");
    return map_frame(snap, Normalization::standard);
}

namespace {

template <typename T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

} // namespace

void write_snapshot_binary(const PopulationSnapshot& snap, const ParticleTree& tree,
                           std::ostream& out) {
    out.write("BBMS", 4);
    put<std::uint32_t>(out, 1u);
    put<double>(out, snap.horizon);
    put<std::uint64_t>(out, snap.particles.size());
    std::vector<std::uint8_t> packed;
    for (const auto& p : snap.particles) {
        const std::string addr = tree.address_of(p.node);
        if (addr.size() > 0xFFFF)
            throw std::domain_error("write_snapshot_binary: address too long");
        put<std::uint16_t>(out, static_cast<std::uint16_t>(addr.size()));
        packed.assign((addr.size() + 7) / 8, 0);
        for (std::size_t k = 0; k < addr.size(); ++k)
            if (addr[k] == '1')
                packed[k / 8] |= static_cast<std::uint8_t>(1u << (k % 8));
        out.write(reinterpret_cast<const char*>(packed.data()),
                  static_cast<std::streamsize>(packed.size()));
        put<double>(out, p.position);
        put<double>(out, p.gamma);
    }
}

SnapshotFile read_snapshot_binary(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "BBMS", 4) != 0)
        throw std::runtime_error("read_snapshot_binary: bad magic");
    SnapshotFile file;
    file.version = get<std::uint32_t>(in);
    file.horizon = get<double>(in);
    const auto count = get<std::uint64_t>(in);
    file.records.reserve(count);
    for (std::uint64_t r = 0; r < count; ++r) {
        const auto bits = get<std::uint16_t>(in);
        std::vector<std::uint8_t> packed((bits + 7) / 8);
        in.read(reinterpret_cast<char*>(packed.data()),
                static_cast<std::streamsize>(packed.size()));
        SnapshotRecord rec;
        rec.address.reserve(bits);
        for (std::uint16_t k = 0; k < bits; ++k)
            rec.address.push_back((packed[k / 8] >> (k % 8)) & 1u ? '1' : '0');
        rec.position = get<double>(in);
        rec.gamma = get<double>(in);
        if (!in)
            throw std::runtime_error("read_snapshot_binary: truncated file");
        file.records.push_back(std::move(rec));
    }
    return file;
}

} // namespace bbmlab
