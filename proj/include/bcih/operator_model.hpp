#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "bcih/geometry.hpp"
#include "bcih/json_util.hpp"
#include "bcih/maze.hpp"

namespace bcih {

struct OperatorConfig {
    double v_max = 180.0;          // px/s
    double lookahead = 40.0;       // px
    double noise_sigma = 60.0;     // px/s
    double noise_tau = 0.5;        // s
    double w_curv = 0.6;
    double w_prox = 0.4;
    double workload_tau = 2.0;     // s
    double guide_relief = 0.6;
    double curvature_span = 80.0;  // px of upcoming centerline
    double hairpin_turn = 0.6;     // rad over curvature_span that maps to 1
    double proximity_range = 40.0; // px
    std::uint64_t seed = 0;

    void validate() const;
};

json to_json(const OperatorConfig& c);
OperatorConfig operator_config_from_json(const json& j);

struct LatentWorkload {
    double level = 0.0;
    double curvature_norm = 0.0;
    double proximity_norm = 0.0;
};

/// Task-difficulty to latent-workload law, shared by the simulated operator
/// and the interactive (human-driven) session.
class WorkloadTracker {
public:
    explicit WorkloadTracker(const OperatorConfig& config, double initial_level = 0.0);
    /// Tracker already settled on the (unrelieved) context at `position`.
    static WorkloadTracker engaged(const OperatorConfig& config, const Scene& scene, Vec2 position, double progress);

    /// Instantaneous target before guide relief and low-pass filtering.
    LatentWorkload context(const Scene& scene, Vec2 position, double progress) const;
    /// Low-pass update toward the (relieved) target.
    const LatentWorkload& update(const Scene& scene, Vec2 position, double progress, bool guide_active, double dt);
    /// Low-pass update toward an externally forced target.
    const LatentWorkload& update_forced(double target, double dt);

    const LatentWorkload& current() const { return state_; }

private:
    OperatorConfig config_;
    LatentWorkload state_;
};

/// Tracks the cursor's arc-length progress along the centerline using a
/// local search window so adjacent serpentine legs are never confused.
class PathProgress {
public:
    explicit PathProgress(double initial = 0.0) : s_(initial) {}
    double update(const Scene& scene, Vec2 position);
    double value() const { return s_; }

private:
    double s_;
};

struct OperatorState {
    OperatorConfig config;
    std::mt19937_64 rng;
    Vec2 noise;  // unit-variance colored process
    PathProgress progress;
    WorkloadTracker workload;

    OperatorState(const OperatorConfig& cfg, const Scene& scene);
};

struct OperatorCommand {
    Vec2 velocity;
    LatentWorkload workload;
    Vec2 noise;  // the noise component of velocity, px/s
};

/// One control step of the simulated operator: pure-pursuit toward the
/// lookahead point plus colored motor noise whose scale grows with the
/// latent workload. Throws InputError when the cursor is outside the scene
/// or dt is outside (0, 0.05].
OperatorCommand operator_step(OperatorState& state, const Scene& scene, Vec2 cursor, bool guide_active, double dt);

enum class CalibrationTask { Rectangle, Spiral };

struct CalibrationTrace {
    CalibrationTask kind = CalibrationTask::Rectangle;
    double dt = 0.01;
    std::vector<Vec2> cursor;
    std::vector<double> workload;
};

/// Scripted calibration movement: a loop around a rectangle (low workload,
/// level held near 0.1) or an inward spiral (high workload, near 0.9).
CalibrationTrace scripted_calibration_run(CalibrationTask kind, double duration, const OperatorConfig& config,
                                          double dt = 0.01);

}  // namespace bcih
