#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "bcih/geometry.hpp"
#include "bcih/json_util.hpp"

namespace bcih {

struct Wall {
    Vec2 center;
    double radius = 12.0;
};

enum class Part { Part1, Part2 };

const char* to_string(Part p);

/// Layout parameters of the two-part maze. Part 1 is a vertical serpentine
/// of hairpin turns; part 2 is a wide corridor with a single bend.
struct SceneSpec {
    double width = 1024.0;
    double height = 768.0;
    double wall_radius = 12.0;
    double cursor_radius = 8.0;
    double corridor_width_part1 = 60.0;
    double corridor_width_part2 = 90.0;
    double wall_spacing_part1 = 18.0;
    double wall_spacing_part2 = 56.0;
    int serpentine_legs = 11;
    double leg_spacing = 90.0;
    double leg_length = 100.0;  // straight run between hairpins
    Vec2 origin{50.0, 80.0};    // start of the first leg
    double part2_drop = 200.0;  // vertical run after the serpentine
    double part2_run = 700.0;   // horizontal run to the goal
    double waypoint_step = 4.0;

    bool operator==(const SceneSpec&) const = default;
};

json to_json(const SceneSpec& s);
SceneSpec scene_spec_from_json(const json& j);

/// Immutable maze geometry.
struct Scene {
    double width = 1024.0;
    double height = 768.0;
    double cursor_radius = 8.0;
    double wall_radius = 12.0;
    std::vector<Wall> walls;
    std::vector<Vec2> centerline;
    std::size_t part_boundary = 0;  // first waypoint of part 2
    double corridor_width_part1 = 60.0;
    double corridor_width_part2 = 90.0;
    Vec2 start;
    Vec2 goal;
    std::uint64_t seed = 0;
    SceneSpec spec;

    // Derived along the centerline: cumulative arc length and cumulative
    // absolute heading change at each waypoint.
    std::vector<double> arc_length;
    std::vector<double> cumulative_turn;

    double path_length() const { return arc_length.empty() ? 0.0 : arc_length.back(); }
    bool in_bounds(Vec2 p) const { return p.x >= 0.0 && p.y >= 0.0 && p.x <= width && p.y <= height; }
    Vec2 clamp(Vec2 p) const;
    /// Point on the centerline at arc length s (clamped to the path).
    Vec2 point_at(double s) const;
    /// Total absolute turning over [s0, s1] of arc length.
    double turn_between(double s0, double s1) const;
    /// Index of the waypoint at arc length s.
    std::size_t waypoint_at(double s) const;
    /// Projection of p onto the centerline, restricted to arc lengths in
    /// [s_lo, s_hi]. Returns the arc length of the closest point.
    double project(Vec2 p, double s_lo, double s_hi) const;
    double project(Vec2 p) const { return project(p, 0.0, path_length()); }
    /// Recomputes arc_length and cumulative_turn from the centerline.
    void finalize();
};

/// Builds the default-layout maze. The seed jitters leg lengths by up to
/// +/-10 px and is otherwise deterministic. Throws SceneError when either
/// corridor is narrower than the cursor diameter or geometry leaves bounds.
Scene build_scene(const SceneSpec& spec = {}, std::uint64_t seed = 0);

/// Places walls on both sides of `centerline`, part-dependent spacing and
/// width, dropping spheres that would intrude into any corridor.
void line_walls(Scene& scene);

json to_json(const Scene& s);
Scene scene_from_json(const json& j);
std::string scene_hash(const Scene& s);

struct WallDistance {
    double distance = 0.0;  // surface-to-surface, includes cursor radius
    std::size_t wall = 0;
    Vec2 surface_point;
};

/// Nearest wall to a cursor centred at p. Throws SimulationError when the
/// scene has no walls.
WallDistance nearest_wall_distance(const Scene& scene, Vec2 p);

/// Repulsive guide: F(d) = k (1/d - 1/d_cut) on (d_min, d_cut], F(d_min)
/// below d_min, zero beyond d_cut.
struct GuideLaw {
    double d_cut = 40.0;
    double d_min = 2.0;
    double k = 360.0;

    double magnitude(double d) const;
    double max_magnitude() const { return magnitude(d_min); }
    void validate() const;
};

json to_json(const GuideLaw& g);
GuideLaw guide_law_from_json(const json& j);

/// Guide velocity contribution (px/s) at p, pointing away from the nearest wall.
Vec2 guide_force(const GuideLaw& law, const Scene& scene, Vec2 p);

struct CollisionEvent {
    double time = 0.0;
    std::size_t wall = 0;
    Vec2 position;
};

/// Per-session contact tracker: one event when clearance drops below zero
/// while armed, re-armed once clearance exceeds `rearm_clearance`.
class CollisionDetector {
public:
    explicit CollisionDetector(double rearm_clearance = 2.0) : rearm_(rearm_clearance) {}

    std::optional<CollisionEvent> update(const Scene& scene, Vec2 p, double time);
    bool armed() const { return armed_; }

private:
    double rearm_;
    bool armed_ = true;
};

/// Batch detection over a trajectory sampled every `dt` seconds. Throws
/// SimulationError if consecutive positions are farther apart than the
/// cursor radius.
std::vector<CollisionEvent> detect_collisions(const Scene& scene, std::span<const Vec2> trajectory, double dt,
                                              double t0 = 0.0);

/// Part of the nearest centerline waypoint; equidistant ties go to the
/// later waypoint.
Part classify_part(const Scene& scene, Vec2 p);

}  // namespace bcih
