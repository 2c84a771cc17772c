#include "bcih/maze.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>

#include "bcih/errors.hpp"

namespace bcih {

namespace {

constexpr double kPi = std::numbers::pi;

// Appends points of a straight run (excluding its start).
void append_line(std::vector<Vec2>& pts, Vec2 to, double step) {
    const Vec2 from = pts.back();
    const double len = distance(from, to);
    const int n = std::max(1, static_cast<int>(std::ceil(len / step)));
    for (int i = 1; i <= n; ++i) pts.push_back(from + (to - from) * (static_cast<double>(i) / n));
}

// Appends a circular arc around `center` from the current point, sweeping
// `sweep` radians (positive = counter-clockwise in screen coordinates).
void append_arc(std::vector<Vec2>& pts, Vec2 center, double sweep, double step) {
    const Vec2 from = pts.back();
    const double r = distance(from, center);
    const double a0 = std::atan2(from.y - center.y, from.x - center.x);
    const int n = std::max(2, static_cast<int>(std::ceil(std::abs(sweep) * r / step)));
    for (int i = 1; i <= n; ++i) {
        const double a = a0 + sweep * static_cast<double>(i) / n;
        pts.push_back(center + Vec2{r * std::cos(a), r * std::sin(a)});
    }
}

double segment_distance(Vec2 p, Vec2 a, Vec2 b) {
    const Vec2 ab = b - a;
    const double len2 = ab.dot(ab);
    const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    return distance(p, a + ab * t);
}

double polyline_distance(const std::vector<Vec2>& line, Vec2 p, std::size_t* nearest_seg = nullptr) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < line.size(); ++i) {
        const double d = segment_distance(p, line[i], line[i + 1]);
        if (d < best) {
            best = d;
            if (nearest_seg) *nearest_seg = i;
        }
    }
    return best;
}

}  // namespace

const char* to_string(Part p) { return p == Part::Part1 ? "part1" : "part2"; }

json to_json(const SceneSpec& s) {
    return {{"width", s.width},
            {"height", s.height},
            {"wall_radius", s.wall_radius},
            {"cursor_radius", s.cursor_radius},
            {"corridor_width_part1", s.corridor_width_part1},
            {"corridor_width_part2", s.corridor_width_part2},
            {"wall_spacing_part1", s.wall_spacing_part1},
            {"wall_spacing_part2", s.wall_spacing_part2},
            {"serpentine_legs", s.serpentine_legs},
            {"leg_spacing", s.leg_spacing},
            {"leg_length", s.leg_length},
            {"origin", vec2_to_json(s.origin)},
            {"part2_drop", s.part2_drop},
            {"part2_run", s.part2_run},
            {"waypoint_step", s.waypoint_step}};
}

SceneSpec scene_spec_from_json(const json& j) {
    SceneSpec s;
    s.width = j.value("width", s.width);
    s.height = j.value("height", s.height);
    s.wall_radius = j.value("wall_radius", s.wall_radius);
    s.cursor_radius = j.value("cursor_radius", s.cursor_radius);
    s.corridor_width_part1 = j.value("corridor_width_part1", s.corridor_width_part1);
    s.corridor_width_part2 = j.value("corridor_width_part2", s.corridor_width_part2);
    s.wall_spacing_part1 = j.value("wall_spacing_part1", s.wall_spacing_part1);
    s.wall_spacing_part2 = j.value("wall_spacing_part2", s.wall_spacing_part2);
    s.serpentine_legs = j.value("serpentine_legs", s.serpentine_legs);
    s.leg_spacing = j.value("leg_spacing", s.leg_spacing);
    s.leg_length = j.value("leg_length", s.leg_length);
    if (j.contains("origin")) s.origin = vec2_from_json(j.at("origin"));
    s.part2_drop = j.value("part2_drop", s.part2_drop);
    s.part2_run = j.value("part2_run", s.part2_run);
    s.waypoint_step = j.value("waypoint_step", s.waypoint_step);
    return s;
}

Vec2 Scene::clamp(Vec2 p) const { return {std::clamp(p.x, 0.0, width), std::clamp(p.y, 0.0, height)}; }

void Scene::finalize() {
    arc_length.assign(centerline.size(), 0.0);
    cumulative_turn.assign(centerline.size(), 0.0);
    for (std::size_t i = 1; i < centerline.size(); ++i) {
        arc_length[i] = arc_length[i - 1] + distance(centerline[i], centerline[i - 1]);
        cumulative_turn[i] = cumulative_turn[i - 1];
        if (i + 1 < centerline.size()) {
            const Vec2 a = centerline[i] - centerline[i - 1];
            const Vec2 b = centerline[i + 1] - centerline[i];
            cumulative_turn[i] += std::abs(std::atan2(a.cross(b), a.dot(b)));
        }
    }
}

std::size_t Scene::waypoint_at(double s) const {
    if (centerline.empty()) return 0;
    const auto it = std::upper_bound(arc_length.begin(), arc_length.end(), s);
    if (it == arc_length.begin()) return 0;
    return static_cast<std::size_t>(std::distance(arc_length.begin(), it) - 1);
}

Vec2 Scene::point_at(double s) const {
    if (centerline.empty()) return {};
    s = std::clamp(s, 0.0, path_length());
    const std::size_t i = waypoint_at(s);
    if (i + 1 >= centerline.size()) return centerline.back();
    const double seg = arc_length[i + 1] - arc_length[i];
    const double t = seg > 0.0 ? (s - arc_length[i]) / seg : 0.0;
    return centerline[i] + (centerline[i + 1] - centerline[i]) * t;
}

double Scene::turn_between(double s0, double s1) const {
    if (centerline.size() < 3) return 0.0;
    auto turn_at = [&](double s) {
        s = std::clamp(s, 0.0, path_length());
        const std::size_t i = waypoint_at(s);
        if (i + 1 >= centerline.size()) return cumulative_turn.back();
        const double seg = arc_length[i + 1] - arc_length[i];
        const double t = seg > 0.0 ? (s - arc_length[i]) / seg : 0.0;
        return cumulative_turn[i] + (cumulative_turn[i + 1] - cumulative_turn[i]) * t;
    };
    return turn_at(s1) - turn_at(s0);
}

double Scene::project(Vec2 p, double s_lo, double s_hi) const {
    if (centerline.size() < 2) return 0.0;
    const std::size_t i0 = waypoint_at(std::max(0.0, s_lo));
    const std::size_t i1 = std::min(centerline.size() - 1, waypoint_at(std::min(s_hi, path_length())) + 1);
    double best_d = std::numeric_limits<double>::infinity();
    double best_s = arc_length[i0];
    for (std::size_t i = i0; i < i1; ++i) {
        const Vec2 a = centerline[i];
        const Vec2 ab = centerline[i + 1] - a;
        const double len2 = ab.dot(ab);
        const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
        const double d = distance(p, a + ab * t);
        if (d < best_d) {
            best_d = d;
            best_s = arc_length[i] + t * (arc_length[i + 1] - arc_length[i]);
        }
    }
    return best_s;
}

void line_walls(Scene& scene) {
    scene.walls.clear();
    const auto& line = scene.centerline;
    if (line.size() < 2) return;
    const double r = scene.wall_radius;
    auto width_at = [&](std::size_t i) {
        return i < scene.part_boundary ? scene.corridor_width_part1 : scene.corridor_width_part2;
    };
    auto spacing_at = [&](std::size_t i) {
        return i < scene.part_boundary ? scene.spec.wall_spacing_part1 : scene.spec.wall_spacing_part2;
    };

    for (int side : {-1, 1}) {
        double since_last = std::numeric_limits<double>::infinity();
        Vec2 prev_c;
        for (std::size_t i = 0; i < line.size(); ++i) {
            const Vec2 tangent = (i + 1 < line.size() ? line[i + 1] - line[i] : line[i] - line[i - 1]).normalized();
            const Vec2 normal{-tangent.y, tangent.x};
            const Vec2 c = line[i] + normal * (side * (width_at(i) / 2.0 + r));
            // Spacing is measured along the offset curve so outer hairpin
            // walls stay as dense as straight ones.
            if (i > 0) since_last += distance(c, prev_c);
            prev_c = c;
            if (since_last + 1e-9 < spacing_at(i)) continue;
            // Keep only spheres that stay outside every corridor.
            std::size_t seg = 0;
            const double d = polyline_distance(line, c, &seg);
            if (d + 1e-6 < width_at(seg) / 2.0 + r) continue;
            if (!scene.in_bounds(c)) continue;
            bool dup = false;
            for (const auto& w : scene.walls)
                if (distance(w.center, c) < 0.5 * spacing_at(i)) {
                    dup = true;
                    break;
                }
            since_last = 0.0;
            if (!dup) scene.walls.push_back({c, r});
        }
    }
}

Scene build_scene(const SceneSpec& spec, std::uint64_t seed) {
    const double min_width = 2.0 * spec.cursor_radius;
    if (spec.corridor_width_part1 < min_width || spec.corridor_width_part2 < min_width)
        throw SceneError("corridor narrower than the cursor diameter");
    if (spec.serpentine_legs < 3 || spec.serpentine_legs % 2 == 0 || spec.leg_length <= 10.0 ||
        spec.leg_spacing <= spec.corridor_width_part1)
        throw SceneError("serpentine needs an odd leg count >= 3, legs > 10 px and leg spacing above the corridor width");
    if (spec.wall_spacing_part1 <= 0.0 || spec.wall_spacing_part2 <= 0.0 || spec.waypoint_step <= 0.0)
        throw SceneError("spacings must be positive");

    Scene scene;
    scene.width = spec.width;
    scene.height = spec.height;
    scene.cursor_radius = spec.cursor_radius;
    scene.wall_radius = spec.wall_radius;
    scene.corridor_width_part1 = spec.corridor_width_part1;
    scene.corridor_width_part2 = spec.corridor_width_part2;
    scene.seed = seed;
    scene.spec = spec;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-10.0, 10.0);
    const double step = spec.waypoint_step;
    const double turn_r = spec.leg_spacing / 2.0;

    // Part 1: legs alternate down/up, joined by semicircular hairpins.
    auto& pts = scene.centerline;
    pts.push_back(spec.origin);
    const double top = spec.origin.y;
    for (int leg = 0; leg < spec.serpentine_legs; ++leg) {
        const double x = spec.origin.x + leg * spec.leg_spacing;
        const bool down = leg % 2 == 0;
        const double len = seed == 0 ? spec.leg_length : spec.leg_length + jitter(rng);
        append_line(pts, {x, down ? top + len : top}, step);
        if (leg + 1 < spec.serpentine_legs) {
            // Screen y grows downward: a hairpin below the leg sweeps -pi,
            // one above it sweeps +pi.
            append_arc(pts, {x + turn_r, pts.back().y}, down ? -kPi : kPi, step);
        }
    }
    scene.part_boundary = pts.size();

    // Part 2: drop down from the last leg, a quarter bend, then a long run.
    const double bend_r = 80.0;
    append_line(pts, {pts.back().x, pts.back().y + spec.part2_drop}, step);
    append_arc(pts, {pts.back().x - bend_r, pts.back().y}, kPi / 2.0, step);
    append_line(pts, {pts.back().x - spec.part2_run, pts.back().y}, step);

    for (const auto& p : pts)
        if (!scene.in_bounds(p)) throw SceneError("centerline leaves the scene bounds");

    scene.start = pts.front();
    scene.goal = pts.back();
    scene.finalize();
    line_walls(scene);
    if (scene.walls.empty()) throw SceneError("scene has no walls");

    // Corridor invariant: no wall intrudes on the cursor disk at any waypoint.
    for (const auto& p : pts)
        if (nearest_wall_distance(scene, p).distance < 0.0) throw SceneError("wall intersects the centerline");
    return scene;
}

json to_json(const Scene& s) {
    json walls = json::array();
    for (const auto& w : s.walls) walls.push_back({w.center.x, w.center.y, w.radius});
    json line = json::array();
    for (const auto& p : s.centerline) line.push_back(vec2_to_json(p));
    return {{"format", "bcih-scene"},
            {"version", 1},
            {"width", s.width},
            {"height", s.height},
            {"cursor_radius", s.cursor_radius},
            {"wall_radius", s.wall_radius},
            {"corridor_widths", {s.corridor_width_part1, s.corridor_width_part2}},
            {"part_boundary", s.part_boundary},
            {"start", vec2_to_json(s.start)},
            {"goal", vec2_to_json(s.goal)},
            {"seed", s.seed},
            {"spec", to_json(s.spec)},
            {"walls", std::move(walls)},
            {"centerline", std::move(line)}};
}

Scene scene_from_json(const json& j) {
    Scene s;
    s.width = j.at("width").get<double>();
    s.height = j.at("height").get<double>();
    s.cursor_radius = j.at("cursor_radius").get<double>();
    s.wall_radius = j.at("wall_radius").get<double>();
    s.corridor_width_part1 = j.at("corridor_widths").at(0).get<double>();
    s.corridor_width_part2 = j.at("corridor_widths").at(1).get<double>();
    s.part_boundary = j.at("part_boundary").get<std::size_t>();
    s.start = vec2_from_json(j.at("start"));
    s.goal = vec2_from_json(j.at("goal"));
    s.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("spec")) s.spec = scene_spec_from_json(j.at("spec"));
    for (const auto& w : j.at("walls")) s.walls.push_back({{w.at(0).get<double>(), w.at(1).get<double>()}, w.at(2).get<double>()});
    for (const auto& p : j.at("centerline")) s.centerline.push_back(vec2_from_json(p));
    s.finalize();
    return s;
}

std::string scene_hash(const Scene& s) { return json_hash(to_json(s)); }

WallDistance nearest_wall_distance(const Scene& scene, Vec2 p) {
    if (scene.walls.empty()) throw SimulationError("nearest_wall_distance: scene has no walls");
    WallDistance best;
    best.distance = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < scene.walls.size(); ++i) {
        const auto& w = scene.walls[i];
        const double d = distance(p, w.center) - w.radius - scene.cursor_radius;
        if (d < best.distance) {
            best.distance = d;
            best.wall = i;
        }
    }
    const auto& w = scene.walls[best.wall];
    best.surface_point = w.center + (p - w.center).normalized() * w.radius;
    return best;
}

double GuideLaw::magnitude(double d) const {
    if (d > d_cut) return 0.0;
    const double dd = std::max(d, d_min);
    return k * (1.0 / dd - 1.0 / d_cut);
}

void GuideLaw::validate() const {
    if (!(d_min > 0.0) || !(d_cut > d_min) || !(k >= 0.0)) throw ConfigError("guide law requires 0 < d_min < d_cut, k >= 0");
}

json to_json(const GuideLaw& g) { return {{"d_cut", g.d_cut}, {"d_min", g.d_min}, {"k", g.k}}; }

GuideLaw guide_law_from_json(const json& j) {
    GuideLaw g;
    g.d_cut = j.value("d_cut", g.d_cut);
    g.d_min = j.value("d_min", g.d_min);
    g.k = j.value("k", g.k);
    return g;
}

Vec2 guide_force(const GuideLaw& law, const Scene& scene, Vec2 p) {
    const auto nw = nearest_wall_distance(scene, p);
    const double f = law.magnitude(nw.distance);
    if (f == 0.0) return {};
    const Vec2 dir = (p - scene.walls[nw.wall].center).normalized();
    return dir * f;
}

std::optional<CollisionEvent> CollisionDetector::update(const Scene& scene, Vec2 p, double time) {
    const auto nw = nearest_wall_distance(scene, p);
    if (armed_ && nw.distance < 0.0) {
        armed_ = false;
        return CollisionEvent{time, nw.wall, p};
    }
    if (!armed_ && nw.distance > rearm_) armed_ = true;
    return std::nullopt;
}

std::vector<CollisionEvent> detect_collisions(const Scene& scene, std::span<const Vec2> trajectory, double dt,
                                              double t0) {
    std::vector<CollisionEvent> events;
    CollisionDetector det;
    for (std::size_t i = 0; i < trajectory.size(); ++i) {
        if (i > 0 && distance(trajectory[i], trajectory[i - 1]) > scene.cursor_radius)
            throw SimulationError("trajectory step exceeds the cursor radius; raise the simulation rate");
        if (auto e = det.update(scene, trajectory[i], t0 + dt * static_cast<double>(i))) events.push_back(*e);
    }
    return events;
}

Part classify_part(const Scene& scene, Vec2 p) {
    if (scene.centerline.empty()) return Part::Part1;
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < scene.centerline.size(); ++i) {
        const double d = distance(p, scene.centerline[i]);
        if (d <= best_d) {
            best_d = d;
            best = i;
        }
    }
    return best < scene.part_boundary ? Part::Part1 : Part::Part2;
}

}  // namespace bcih
