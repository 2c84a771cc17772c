#include "bcih/operator_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bcih/errors.hpp"

namespace bcih {

namespace {

constexpr double kRectangleLevel = 0.1;
constexpr double kSpiralLevel = 0.9;

double low_pass_alpha(double dt, double tau) { return 1.0 - std::exp(-dt / tau); }

}  // namespace

void OperatorConfig::validate() const {
    for (double v : {v_max, lookahead, noise_sigma, noise_tau, w_curv, w_prox, workload_tau, curvature_span,
                     hairpin_turn, proximity_range})
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("operator parameters must be positive");
    if (!(guide_relief > 0.0 && guide_relief <= 1.0)) throw ConfigError("guide_relief must lie in (0, 1]");
}

json to_json(const OperatorConfig& c) {
    return {{"v_max", c.v_max},
            {"lookahead", c.lookahead},
            {"noise_sigma", c.noise_sigma},
            {"noise_tau", c.noise_tau},
            {"w_curv", c.w_curv},
            {"w_prox", c.w_prox},
            {"workload_tau", c.workload_tau},
            {"guide_relief", c.guide_relief},
            {"curvature_span", c.curvature_span},
            {"hairpin_turn", c.hairpin_turn},
            {"proximity_range", c.proximity_range},
            {"seed", c.seed}};
}

OperatorConfig operator_config_from_json(const json& j) {
    OperatorConfig c;
    c.v_max = j.value("v_max", c.v_max);
    c.lookahead = j.value("lookahead", c.lookahead);
    c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    c.noise_tau = j.value("noise_tau", c.noise_tau);
    c.w_curv = j.value("w_curv", c.w_curv);
    c.w_prox = j.value("w_prox", c.w_prox);
    c.workload_tau = j.value("workload_tau", c.workload_tau);
    c.guide_relief = j.value("guide_relief", c.guide_relief);
    c.curvature_span = j.value("curvature_span", c.curvature_span);
    c.hairpin_turn = j.value("hairpin_turn", c.hairpin_turn);
    c.proximity_range = j.value("proximity_range", c.proximity_range);
    c.seed = j.value("seed", c.seed);
    return c;
}

WorkloadTracker::WorkloadTracker(const OperatorConfig& config, double initial_level) : config_(config) {
    state_.level = initial_level;
}

WorkloadTracker WorkloadTracker::engaged(const OperatorConfig& config, const Scene& scene, Vec2 position,
                                         double progress) {
    WorkloadTracker t(config);
    t.state_ = t.context(scene, position, progress);
    return t;
}

LatentWorkload WorkloadTracker::context(const Scene& scene, Vec2 position, double progress) const {
    LatentWorkload w;
    const double turn = scene.turn_between(progress, progress + config_.curvature_span);
    w.curvature_norm = std::clamp(turn / config_.hairpin_turn, 0.0, 1.0);
    const double d = nearest_wall_distance(scene, position).distance;
    w.proximity_norm = std::clamp(1.0 - d / config_.proximity_range, 0.0, 1.0);
    w.level = std::clamp(config_.w_curv * w.curvature_norm + config_.w_prox * w.proximity_norm, 0.0, 1.0);
    return w;
}

const LatentWorkload& WorkloadTracker::update(const Scene& scene, Vec2 position, double progress, bool guide_active,
                                              double dt) {
    const LatentWorkload ctx = context(scene, position, progress);
    const double target = ctx.level * (guide_active ? config_.guide_relief : 1.0);
    state_.curvature_norm = ctx.curvature_norm;
    state_.proximity_norm = ctx.proximity_norm;
    state_.level += (target - state_.level) * low_pass_alpha(dt, config_.workload_tau);
    return state_;
}

const LatentWorkload& WorkloadTracker::update_forced(double target, double dt) {
    state_.level += (target - state_.level) * low_pass_alpha(dt, config_.workload_tau);
    return state_;
}

double PathProgress::update(const Scene& scene, Vec2 position) {
    // The cursor moves at most a few px per step; a window well beyond that
    // but shorter than the hairpin-to-hairpin distance keeps tracking local.
    s_ = scene.project(position, s_ - 30.0, s_ + 60.0);
    return s_;
}

OperatorState::OperatorState(const OperatorConfig& cfg, const Scene& scene)
    : config(cfg),
      rng(cfg.seed),
      progress(scene.project(scene.start, 0.0, 1.0)),
      workload(WorkloadTracker::engaged(cfg, scene, scene.start, progress.value())) {
    config.validate();
}

OperatorCommand operator_step(OperatorState& state, const Scene& scene, Vec2 cursor, bool guide_active, double dt) {
    if (!(dt > 0.0 && dt <= 0.05)) throw InputError("operator_step: dt must lie in (0, 0.05]");
    if (!scene.in_bounds(cursor)) throw InputError("operator_step: cursor outside the scene");
    const auto& cfg = state.config;

    const double s = state.progress.update(scene, cursor);
    const LatentWorkload& lw = state.workload.update(scene, cursor, s, guide_active, dt);

    const Vec2 target = scene.point_at(s + cfg.lookahead);
    const Vec2 to_target = target - cursor;
    Vec2 drive = to_target.normalized() * cfg.v_max;
    // Near the goal the lookahead point saturates; slow down to stop on it.
    if (to_target.norm() < cfg.v_max * dt) drive = to_target / dt;

    std::normal_distribution<double> gauss(0.0, 1.0);
    const double a = std::exp(-dt / cfg.noise_tau);
    const double b = std::sqrt(1.0 - a * a);
    state.noise = state.noise * a + Vec2{gauss(state.rng), gauss(state.rng)} * b;
    const Vec2 noise = state.noise * (cfg.noise_sigma * (1.0 + lw.level));

    return {drive + noise, lw, noise};
}

CalibrationTrace scripted_calibration_run(CalibrationTask kind, double duration, const OperatorConfig& config,
                                          double dt) {
    if (!(duration > 0.0)) throw InputError("calibration duration must be positive");
    config.validate();
    CalibrationTrace trace;
    trace.kind = kind;
    trace.dt = dt;
    const auto n = static_cast<std::size_t>(std::llround(duration / dt));
    trace.cursor.reserve(n);
    trace.workload.reserve(n);

    // Movement along an ideal path at the operator's nominal speed; the
    // latent level is pinned by the task kind.
    const Vec2 center{512.0, 384.0};
    const double level = kind == CalibrationTask::Rectangle ? kRectangleLevel : kSpiralLevel;
    WorkloadTracker tracker(config, level);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        s += config.v_max * dt;
        Vec2 p;
        if (kind == CalibrationTask::Rectangle) {
            const double w = 600.0, h = 300.0, per = 2.0 * (w + h);
            double u = std::fmod(s, per);
            const Vec2 tl = center - Vec2{w / 2.0, h / 2.0};
            if (u < w) p = tl + Vec2{u, 0.0};
            else if ((u -= w) < h) p = tl + Vec2{w, u};
            else if ((u -= h) < w) p = tl + Vec2{w - u, h};
            else p = tl + Vec2{0.0, h - (u - w)};
        } else {
            // Archimedean spiral r = r_max - c*theta, traversed inward and
            // restarted from the outside when it reaches the core.
            const double r_max = 300.0, r_min = 40.0, pitch = 30.0;
            const double c = pitch / (2.0 * std::numbers::pi);
            // Arc length of an Archimedean spiral is ~ (r_max^2 - r^2)/(2c).
            const double span = (r_max * r_max - r_min * r_min) / (2.0 * c);
            const double u = std::fmod(s, span);
            const double r = std::sqrt(r_max * r_max - 2.0 * c * u);
            const double theta = (r_max - r) / c;
            p = center + Vec2{r * std::cos(theta), r * std::sin(theta)};
        }
        trace.cursor.push_back(p);
        trace.workload.push_back(tracker.update_forced(level, dt).level);
    }
    return trace;
}

}  // namespace bcih
