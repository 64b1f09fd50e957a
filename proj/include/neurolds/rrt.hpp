#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "neurolds/point_buffer.hpp"
#include "neurolds/seqcore.hpp"

namespace neurolds {

// Configuration space is [0,1]^dim.
class Environment {
public:
    virtual ~Environment() = default;
    virtual std::size_t dim() const = 0;
    virtual std::vector<double> start() const = 0;
    virtual bool collision(std::span<const double> q) const = 0;
    virtual bool in_goal(std::span<const double> q) const = 0;
};

// No obstacles; goal is a Euclidean ball (infinite radius means the whole space).
class OpenEnvironment : public Environment {
public:
    OpenEnvironment(std::vector<double> start, std::vector<double> goal, double tolerance);

    std::size_t dim() const override { return start_.size(); }
    std::vector<double> start() const override { return start_; }
    bool collision(std::span<const double> q) const override;
    bool in_goal(std::span<const double> q) const override;

private:
    std::vector<double> start_;
    std::vector<double> goal_;
    double tolerance_;
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

// Joint positions of a planar chain: base, then the end of each link.
// Link k points along the cumulative angle q_1 + ... + q_k.
std::vector<Vec2> chain_forward_kinematics(std::span<const double> angles, Vec2 base = {}, double link_length = 0.2);

// Chain of revolute joints whose first joint sits below the mouth of a
// semicircular tunnel. In the tunnel frame the tunnel occupies the upper half
// plane around the origin; there the only free space is the corridor
// r_in < rho < r_out with r_out = r_in + width * width_scale. The lower half
// plane is open. Links must also stay inside the box [-box, box]^2.
struct ChainEnvParams {
    std::size_t joints = 4;
    double link_length = 0.2;
    double inner_radius = 0.35;
    double width = 0.40;
    double width_scale = 0.25;
    double box = 1.0;
    Vec2 center{};            // tunnel center in the world frame
    double rotation = 0.0;    // tunnel frame rotation in radians
    Vec2 base_local{0.2, -0.01};
    double path_radius = 0.40;  // start pose follows this arc inside the corridor
    std::size_t samples_per_link = 16;
    double goal_tolerance = 0.1;  // Euclidean, in configuration space
};

class ChainEnv : public Environment {
public:
    // Throws std::invalid_argument when the start pose collides.
    explicit ChainEnv(ChainEnvParams params);

    const ChainEnvParams& params() const { return p_; }
    double outer_radius() const { return p_.inner_radius + p_.width * p_.width_scale; }

    std::size_t dim() const override { return p_.joints; }
    std::vector<double> start() const override { return start_; }
    const std::vector<double>& goal() const { return goal_; }
    bool collision(std::span<const double> q) const override;
    bool in_goal(std::span<const double> q) const override;

    // [0,1] coordinates to joint angles in [-pi, pi] and back.
    static std::vector<double> angles(std::span<const double> q);
    static std::vector<double> config(std::span<const double> angles);

    Vec2 base_world() const;
    std::vector<Vec2> joints_world(std::span<const double> q) const;
    Vec2 to_local(Vec2 world) const;
    // True when a world point lies inside a wall or outside the box.
    bool blocked(Vec2 world) const;

private:
    ChainEnvParams p_;
    std::vector<double> start_;
    std::vector<double> goal_;
};

bool chain_collision(const ChainEnv& env, std::span<const double> q);

struct RrtConfig {
    std::size_t max_iterations = 10000;  // K
    double step = 0.01;                  // delta
    SequenceSpec source;
};

struct Tree {
    std::size_t dim = 0;
    std::vector<double> nodes;              // row-major, insertion order
    std::vector<std::ptrdiff_t> parents;    // -1 for the root

    std::size_t size() const { return parents.size(); }
    std::span<const double> node(std::size_t i) const { return {nodes.data() + i * dim, dim}; }
    void add(std::span<const double> q, std::ptrdiff_t parent);
    bool operator==(const Tree&) const = default;
};

struct RrtResult {
    bool success = false;
    std::size_t iterations = 0;  // samples consumed
    std::vector<std::vector<double>> path;  // root to goal node
    Tree tree;
};

// Grows a tree from env.start() with samples consumed in order. Throws when
// the start collides or the samples run out before max_iterations.
RrtResult rrt_plan(const Environment& env, const RrtConfig& cfg, const PointBuffer& samples);
// Draws max_iterations samples from cfg.source.
RrtResult rrt_plan(const Environment& env, const RrtConfig& cfg);

// CSV `node,parent,q1,...,qd`.
void write_tree_csv(std::ostream& out, const Tree& tree);

struct SweepSource {
    std::string name;
    SequenceSpec spec;
};

struct SweepConfig {
    std::vector<double> widths{0.40, 0.44, 0.48, 0.52, 0.56, 0.60, 0.64};
    std::size_t reps = 20;
    std::size_t sequences_per_source = 10;
    std::size_t max_iterations = 10000;
    double step = 0.01;
    std::uint64_t seed = 0;
    // Tunnel rotations are drawn uniformly from this interval. It keeps the
    // start and goal joint angles away from the +-pi seam.
    double rotation_lo = -1.2;
    double rotation_hi = 2.4;
    ChainEnvParams env{};
};

struct SweepCell {
    std::string source;
    double width = 0.0;
    std::size_t successes = 0;
    std::size_t reps = 0;
    double success_pct() const { return reps ? 100.0 * static_cast<double>(successes) / static_cast<double>(reps) : 0.0; }
};

// Precomputed sample sets for sequence slot s. Deterministic kinds are
// offset by s * max_iterations; randomized kinds take split_seed(seed, s).
PointBuffer sweep_samples(const SequenceSpec& spec, std::size_t slot, std::size_t count);

// Tunnel rotation for repetition `rep`.
double sweep_rotation(const SweepConfig& cfg, std::size_t rep);

// Every (source, width) cell; repetition r uses sample slot r % sequences_per_source.
// `on_plan` (optional) sees every plan result along with its environment.
using PlanObserver = void (*)(const ChainEnv&, const RrtConfig&, const RrtResult&, void*);
std::vector<SweepCell> success_rate(const SweepConfig& cfg, const std::vector<SweepSource>& sources,
                                    PlanObserver on_plan = nullptr, void* user = nullptr);

// CSV `source,width,success_pct`.
void write_success_csv(std::ostream& out, const std::vector<SweepCell>& cells);

}  // namespace neurolds
