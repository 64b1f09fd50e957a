#include "neurolds/rrt.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "neurolds/parallel.hpp"
#include "neurolds/rng.hpp"

namespace neurolds {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap_angle(double a) {
    a = std::remainder(a, 2.0 * kPi);
    return a;
}

double distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
    return std::sqrt(s);
}

}  // namespace

OpenEnvironment::OpenEnvironment(std::vector<double> start, std::vector<double> goal, double tolerance)
    : start_(std::move(start)), goal_(std::move(goal)), tolerance_(tolerance) {
    if (start_.empty() || start_.size() != goal_.size()) {
        throw std::invalid_argument("OpenEnvironment: start and goal must have the same positive dimension");
    }
    if (!(tolerance_ > 0.0)) throw std::invalid_argument("OpenEnvironment: tolerance must be positive");
}

bool OpenEnvironment::collision(std::span<const double> q) const {
    return std::any_of(q.begin(), q.end(), [](double x) { return !(x >= 0.0 && x <= 1.0); });
}

bool OpenEnvironment::in_goal(std::span<const double> q) const {
    return std::isinf(tolerance_) || distance(q, goal_) <= tolerance_;
}

// ---------------------------------------------------------------------------

std::vector<Vec2> chain_forward_kinematics(std::span<const double> angles, Vec2 base, double link_length) {
    std::vector<Vec2> pts{base};
    double heading = 0.0;
    Vec2 p = base;
    for (double a : angles) {
        heading += a;
        p = {p.x + link_length * std::cos(heading), p.y + link_length * std::sin(heading)};
        pts.push_back(p);
    }
    return pts;
}

ChainEnv::ChainEnv(ChainEnvParams params) : p_(params) {
    if (p_.joints < 2) throw std::invalid_argument("ChainEnv: at least two joints required");
    if (!(p_.link_length > 0.0)) throw std::invalid_argument("ChainEnv: link length must be positive");
    if (!(p_.width > 0.0)) throw std::invalid_argument("ChainEnv: passage width must be positive");
    if (p_.samples_per_link < 2) throw std::invalid_argument("ChainEnv: need at least 2 samples per link");

    const double L = p_.link_length;
    const double R = p_.path_radius;
    const Vec2 b = p_.base_local;

    // First joint: intersection of the path arc with the circle of radius L
    // around the base, the one further into the tunnel.
    const double db = std::hypot(b.x, b.y);
    const double a = (R * R - L * L + db * db) / (2.0 * db);
    const double h2 = R * R - a * a;
    if (h2 < 0.0) throw std::invalid_argument("ChainEnv: first link cannot reach the path arc");
    const double h = std::sqrt(h2);
    const Vec2 mid{a * b.x / db, a * b.y / db};
    const Vec2 c1{mid.x + h * b.y / db, mid.y - h * b.x / db};
    const Vec2 c2{mid.x - h * b.y / db, mid.y + h * b.x / db};
    const double phi1 = std::max(std::atan2(c1.y, c1.x), std::atan2(c2.y, c2.x));

    // Remaining joints walk along the arc by chords of length L.
    const double step = 2.0 * std::asin(L / (2.0 * R));
    std::vector<Vec2> pts{b};
    for (std::size_t k = 0; k < p_.joints; ++k) {
        const double phi = phi1 + static_cast<double>(k) * step;
        pts.push_back({R * std::cos(phi), R * std::sin(phi)});
    }
    std::vector<double> ang(p_.joints);
    double prev = 0.0;
    for (std::size_t k = 0; k < p_.joints; ++k) {
        const double heading = std::atan2(pts[k + 1].y - pts[k].y, pts[k + 1].x - pts[k].x);
        ang[k] = wrap_angle(heading - prev);
        prev = heading;
    }
    ang[0] = wrap_angle(ang[0] + p_.rotation);
    start_ = config(ang);

    std::vector<double> goal_ang(p_.joints, 0.0);
    goal_ang[0] = wrap_angle(-kPi / 2.0 + p_.rotation);
    goal_ = config(goal_ang);

    if (collision(start_)) throw std::invalid_argument("ChainEnv: start configuration collides");
    if (collision(goal_)) throw std::invalid_argument("ChainEnv: goal configuration collides");
}

std::vector<double> ChainEnv::angles(std::span<const double> q) {
    std::vector<double> out(q.size());
    for (std::size_t j = 0; j < q.size(); ++j) out[j] = -kPi + 2.0 * kPi * q[j];
    return out;
}

std::vector<double> ChainEnv::config(std::span<const double> angles) {
    std::vector<double> out(angles.size());
    for (std::size_t j = 0; j < angles.size(); ++j) out[j] = (angles[j] + kPi) / (2.0 * kPi);
    return out;
}

Vec2 ChainEnv::base_world() const {
    const double c = std::cos(p_.rotation), s = std::sin(p_.rotation);
    const Vec2 b = p_.base_local;
    return {p_.center.x + c * b.x - s * b.y, p_.center.y + s * b.x + c * b.y};
}

std::vector<Vec2> ChainEnv::joints_world(std::span<const double> q) const {
    return chain_forward_kinematics(angles(q), base_world(), p_.link_length);
}

Vec2 ChainEnv::to_local(Vec2 w) const {
    const double c = std::cos(p_.rotation), s = std::sin(p_.rotation);
    const double dx = w.x - p_.center.x, dy = w.y - p_.center.y;
    return {c * dx + s * dy, -s * dx + c * dy};
}

bool ChainEnv::blocked(Vec2 world) const {
    const Vec2 p = to_local(world);
    if (std::abs(p.x) > p_.box || std::abs(p.y) > p_.box) return true;
    if (p.y <= 0.0) return false;
    const double rho = std::hypot(p.x, p.y);
    return rho <= p_.inner_radius || rho >= outer_radius();
}

bool ChainEnv::collision(std::span<const double> q) const {
    if (q.size() != p_.joints) throw std::invalid_argument("ChainEnv: configuration has wrong dimension");
    for (double x : q) {
        if (!(x >= 0.0 && x <= 1.0)) return true;
    }
    const auto pts = joints_world(q);
    const double last = static_cast<double>(p_.samples_per_link - 1);
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
        for (std::size_t s = 0; s < p_.samples_per_link; ++s) {
            const double t = static_cast<double>(s) / last;
            const Vec2 w{pts[k].x + t * (pts[k + 1].x - pts[k].x), pts[k].y + t * (pts[k + 1].y - pts[k].y)};
            if (blocked(w)) return true;
        }
    }
    return false;
}

bool ChainEnv::in_goal(std::span<const double> q) const { return distance(q, goal_) <= p_.goal_tolerance; }

bool chain_collision(const ChainEnv& env, std::span<const double> q) { return env.collision(q); }

// ---------------------------------------------------------------------------

void Tree::add(std::span<const double> q, std::ptrdiff_t parent) {
    nodes.insert(nodes.end(), q.begin(), q.end());
    parents.push_back(parent);
}

RrtResult rrt_plan(const Environment& env, const RrtConfig& cfg, const PointBuffer& samples) {
    if (cfg.max_iterations < 1) throw std::invalid_argument("rrt: max_iterations must be at least 1");
    if (!(cfg.step > 0.0)) throw std::invalid_argument("rrt: step must be positive");
    const std::size_t d = env.dim();
    if (samples.dim() != d) throw std::invalid_argument("rrt: sample dimension does not match the environment");
    const std::vector<double> root = env.start();
    if (env.collision(root)) throw std::invalid_argument("rrt: start configuration is in collision");

    RrtResult res;
    res.tree.dim = d;
    res.tree.add(root, -1);
    std::vector<double> x_new(d);

    for (std::size_t k = 0; k < cfg.max_iterations; ++k) {
        if (k >= samples.size()) {
            throw std::out_of_range("rrt: sample sequence exhausted after " + std::to_string(samples.size()) +
                                    " of " + std::to_string(cfg.max_iterations) + " iterations");
        }
        res.iterations = k + 1;
        const auto x_rand = samples.row(k);

        std::size_t nearest = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < res.tree.size(); ++i) {
            const auto node = res.tree.node(i);
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) s += (node[j] - x_rand[j]) * (node[j] - x_rand[j]);
            if (s < best) {
                best = s;
                nearest = i;
            }
        }
        const double dist = std::sqrt(best);
        if (dist == 0.0) continue;  // sample coincides with a node
        const auto from = res.tree.node(nearest);
        const double t = std::min(1.0, cfg.step / dist);
        for (std::size_t j = 0; j < d; ++j) x_new[j] = from[j] + t * (x_rand[j] - from[j]);

        if (env.collision(x_new)) continue;
        res.tree.add(x_new, static_cast<std::ptrdiff_t>(nearest));
        if (env.in_goal(x_new)) {
            res.success = true;
            for (std::ptrdiff_t i = static_cast<std::ptrdiff_t>(res.tree.size()) - 1; i >= 0; i = res.tree.parents[i]) {
                const auto node = res.tree.node(static_cast<std::size_t>(i));
                res.path.emplace_back(node.begin(), node.end());
            }
            std::reverse(res.path.begin(), res.path.end());
            return res;
        }
    }
    return res;
}

RrtResult rrt_plan(const Environment& env, const RrtConfig& cfg) {
    SequenceSpec spec = cfg.source;
    spec.dim = env.dim();
    return rrt_plan(env, cfg, generate(spec, cfg.max_iterations));
}

void write_tree_csv(std::ostream& out, const Tree& tree) {
    const auto old = out.precision(17);
    out << "node,parent";
    for (std::size_t j = 0; j < tree.dim; ++j) out << ",q" << (j + 1);
    out << '\n';
    for (std::size_t i = 0; i < tree.size(); ++i) {
        out << i << ',' << tree.parents[i];
        for (double x : tree.node(i)) out << ',' << x;
        out << '\n';
    }
    out.precision(old);
}

// ---------------------------------------------------------------------------

PointBuffer sweep_samples(const SequenceSpec& spec, std::size_t slot, std::size_t count) {
    SequenceSpec s = spec;
    if (s.randomized()) {
        s.seed = split_seed(*spec.seed, slot);
    } else {
        s.burn_in = spec.burn_in + static_cast<std::uint64_t>(slot) * count;
    }
    return generate(s, count);
}

double sweep_rotation(const SweepConfig& cfg, std::size_t rep) {
    const double u = counter_uniform(split_seed(cfg.seed, 0x7275), rep);
    return cfg.rotation_lo + u * (cfg.rotation_hi - cfg.rotation_lo);
}

std::vector<SweepCell> success_rate(const SweepConfig& cfg, const std::vector<SweepSource>& sources,
                                    PlanObserver on_plan, void* user) {
    if (cfg.reps < 1) throw std::invalid_argument("success_rate: reps must be at least 1");
    if (cfg.sequences_per_source < 1) throw std::invalid_argument("success_rate: need at least one sequence per source");
    const std::size_t n_src = sources.size();
    const std::size_t n_w = cfg.widths.size();

    std::vector<std::vector<PointBuffer>> samples(n_src);
    for (std::size_t s = 0; s < n_src; ++s) {
        SequenceSpec spec = sources[s].spec;
        spec.dim = cfg.env.joints;
        for (std::size_t slot = 0; slot < std::min(cfg.sequences_per_source, cfg.reps); ++slot) {
            samples[s].push_back(sweep_samples(spec, slot, cfg.max_iterations));
        }
    }

    // outcome[(rep * n_src + s) * n_w + w]
    std::vector<unsigned char> outcome(cfg.reps * n_src * n_w, 0);
    RrtConfig rc;
    rc.max_iterations = cfg.max_iterations;
    rc.step = cfg.step;
    const auto jobs = static_cast<std::ptrdiff_t>(outcome.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(thread_count())
    for (std::ptrdiff_t job = 0; job < jobs; ++job) {
        const std::size_t w = static_cast<std::size_t>(job) % n_w;
        const std::size_t s = (static_cast<std::size_t>(job) / n_w) % n_src;
        const std::size_t rep = static_cast<std::size_t>(job) / (n_w * n_src);
        ChainEnvParams p = cfg.env;
        p.width = cfg.widths[w];
        p.rotation = sweep_rotation(cfg, rep);
        const ChainEnv env(p);
        const RrtResult r = rrt_plan(env, rc, samples[s][rep % cfg.sequences_per_source]);
        outcome[job] = r.success ? 1 : 0;
        if (on_plan) {
#pragma omp critical(neurolds_sweep_observer)
            on_plan(env, rc, r, user);
        }
    }

    std::vector<SweepCell> cells;
    for (std::size_t s = 0; s < n_src; ++s) {
        for (std::size_t w = 0; w < n_w; ++w) {
            SweepCell c{sources[s].name, cfg.widths[w], 0, cfg.reps};
            for (std::size_t rep = 0; rep < cfg.reps; ++rep) c.successes += outcome[(rep * n_src + s) * n_w + w];
            cells.push_back(c);
        }
    }
    return cells;
}

void write_success_csv(std::ostream& out, const std::vector<SweepCell>& cells) {
    out << "source,width,success_pct\n";
    for (const auto& c : cells) out << c.source << ',' << c.width << ',' << c.success_pct() << '\n';
}

}  // namespace neurolds
