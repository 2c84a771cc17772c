#include "bcih/session.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>

#include <fmt/format.h>

#include "bcih/errors.hpp"
#include "bcih/experiment.hpp"

namespace bcih {

namespace {

constexpr double kMaxCatchUp = 0.25;  // s of simulation per advance call

json vec_json(Vec2 v) { return {{"x", v.x}, {"y", v.y}}; }

json nullable(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

}  // namespace

void ServerConfig::validate() const {
    if (!(state_rate > 0.0) || !std::isfinite(state_rate)) throw ConfigError("state_rate must be positive");
    if (!(input_timeout > 0.0) || !std::isfinite(input_timeout)) throw ConfigError("input_timeout must be positive");
    if (max_sessions < 1) throw ConfigError("max_sessions must be >= 1");
}

ServerConfig apply_env_overrides(ServerConfig config) {
    if (const char* p = std::getenv("BCIH_PORT"); p && *p) {
        char* end = nullptr;
        const long v = std::strtol(p, &end, 10);
        if (*end != '\0' || v < 0 || v > 65535) throw ConfigError(fmt::format("BCIH_PORT '{}' is not a port number", p));
        config.port = static_cast<unsigned short>(v);
    }
    if (const char* d = std::getenv("BCIH_DATA_DIR"); d && *d) config.data_dir = d;
    return config;
}

std::shared_ptr<const SessionResources> default_resources(std::uint64_t seed) {
    ExperimentConfig cfg;
    cfg.plan = make_plan(1, 1, seed);
    const auto profile = operator_profile(cfg, 0);
    auto res = std::make_shared<SessionResources>();
    res->scene = std::make_shared<const Scene>(build_scene());
    res->model = std::make_shared<const PipelineModel>(
        calibrate_subject(profile.subject, profile.operator_config, cfg.calibration_seconds, cfg.calibration).model);
    res->subject = profile.subject;
    res->operator_config = profile.operator_config;
    res->guide = cfg.guide;
    res->timeout = cfg.timeout;
    return res;
}

InteractiveSession::InteractiveSession(std::shared_ptr<const SessionResources> resources, ServerConfig config,
                                       std::uint64_t session_id)
    : res_(std::move(resources)), config_(std::move(config)), id_(session_id) {
    if (!res_ || !res_->scene || !res_->model) throw UsageError("session requires a scene and a calibrated model");
    config_.validate();
    target_ = res_->scene->start;
}

json InteractiveSession::error_message(std::string_view code, std::string_view text) {
    return {{"type", "error"}, {"code", code}, {"text", text}};
}

std::vector<json> InteractiveSession::handle(std::string_view text, double now) {
    json msg;
    try {
        msg = json::parse(text);
    } catch (const json::parse_error& e) {
        return {error_message("bad_json", e.what())};
    }
    if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string())
        return {error_message("bad_message", "message must be an object with a string 'type'")};
    const std::string type = msg["type"].get<std::string>();
    try {
        if (type == "hello") return {on_hello(msg)};
        if (type == "start") return {on_start(now)};
        if (type == "cursor") {
            json reply = on_cursor(msg, now);
            if (reply.is_null()) return {};
            return {reply};
        }
        if (type == "reset") return {on_reset()};
    } catch (const json::exception& e) {
        return {error_message("bad_message", e.what())};
    } catch (const InputError& e) {
        return {error_message("bad_message", e.what())};
    }
    return {error_message("unknown_type", "unknown message type '" + type + "'")};
}

json InteractiveSession::on_hello(const json& msg) {
    if (phase_ == Phase::Running) return error_message("out_of_order", "hello during a running trial; send reset first");
    condition_ = condition_from_string(msg.value("condition", std::string("BCI_A")));
    const std::string mode = msg.value("mode", std::string("interactive"));
    if (mode == "interactive") mode_ = Mode::Interactive;
    else if (mode == "simulated") mode_ = Mode::Simulated;
    else return error_message("bad_message", "mode must be 'interactive' or 'simulated'");
    phase_ = Phase::Ready;
    return {{"type", "scene"}, {"condition", to_string(condition_)}, {"geometry", to_json(*res_->scene)}};
}

json InteractiveSession::on_start(double now) {
    if (phase_ == Phase::Connected) return error_message("out_of_order", "send hello before start");
    if (phase_ == Phase::Running) return error_message("out_of_order", "trial already running");
    TrialSetup setup;
    setup.scene = res_->scene;
    setup.model = res_->model;
    setup.condition = condition_;
    setup.operator_config = res_->operator_config;
    setup.subject = res_->subject;
    setup.guide = res_->guide;
    setup.seed = derive_seed(config_.seed, id_, static_cast<std::uint64_t>(trials_started_++));
    setup.timeout = res_->timeout;
    setup_ = setup;
    sim_.emplace(setup);
    tracker_.emplace(make_tracker(*sim_));
    if (mode_ == Mode::Simulated) operator_.emplace(make_operator(setup));
    else operator_.reset();
    targets_.clear();
    target_ = sim_->cursor();
    paused_ = false;
    pause_announced_ = false;
    last_now_ = now;
    last_input_ = now;
    accumulator_ = 0.0;
    next_state_ = now + 1.0 / config_.state_rate;
    phase_ = Phase::Running;
    return state_message();
}

json InteractiveSession::on_cursor(const json& msg, double now) {
    if (phase_ == Phase::Connected) return error_message("out_of_order", "send hello before cursor input");
    const double x = msg.at("x").get<double>();
    const double y = msg.at("y").get<double>();
    if (!std::isfinite(x) || !std::isfinite(y)) return error_message("bad_message", "cursor coordinates must be finite");
    target_ = res_->scene->clamp({x, y});
    last_input_ = now;
    if (paused_) {
        paused_ = false;
        pause_announced_ = false;
        last_now_ = now;  // paused time does not count as simulation time
    }
    return nullptr;
}

json InteractiveSession::on_reset() {
    sim_.reset();
    tracker_.reset();
    operator_.reset();
    targets_.clear();
    paused_ = false;
    phase_ = phase_ == Phase::Connected ? Phase::Connected : Phase::Ready;
    if (phase_ == Phase::Connected) return error_message("out_of_order", "send hello before reset");
    return {{"type", "scene"}, {"condition", to_string(condition_)}, {"geometry", to_json(*res_->scene)}};
}

json InteractiveSession::state_message() const {
    const auto& sim = *sim_;
    const auto& rec = sim.record();
    const Vec2 force = sim.guide_active() ? guide_force(res_->guide, *res_->scene, sim.cursor()) : Vec2{};
    return {{"type", "state"},
            {"t", sim.time()},
            {"cursor", vec_json(sim.cursor())},
            {"force", vec_json(force)},
            {"index", sim.index().value_or(0)},
            {"guide_active", sim.guide_active()},
            {"collisions", rec.collisions.size()},
            {"part", to_string(classify_part(*res_->scene, sim.cursor()))},
            {"paused", paused_}};
}

json InteractiveSession::finish_trial() {
    TrialRecord record = sim_->take_record();
    record.header["mode"] = mode_ == Mode::Interactive ? "interactive" : "simulated";
    const auto m = trial_metrics(record, *res_->scene, 0, trials_started_ - 1);
    json end{{"type", "trial_end"},
             {"metrics",
              {{"collisions", m.collisions},
               {"duration", m.duration},
               {"outcome", m.completed ? "completed" : "timeout"},
               {"condition", to_string(condition_)},
               {"activation", nullable(m.activation)},
               {"activation_part1", nullable(m.activation_part1)},
               {"activation_part2", nullable(m.activation_part2)},
               {"mean_index", nullable(m.mean_index)}}}};
    if (!config_.data_dir.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(config_.data_dir, ec);
        const auto path = config_.data_dir / fmt::format("session{}_trial{}.ndjson", id_, trials_started_ - 1);
        std::ofstream f(path, std::ios::binary);
        if (f) {
            f << to_ndjson(record);
            end["record"] = path.string();
        }
    }
    last_record_ = std::move(record);
    sim_.reset();
    phase_ = Phase::Ended;
    return end;
}

std::vector<json> InteractiveSession::advance(double now) {
    std::vector<json> out;
    if (phase_ != Phase::Running) {
        last_now_ = now;
        return out;
    }
    if (mode_ == Mode::Interactive && !paused_ && now - last_input_ > config_.input_timeout) {
        paused_ = true;
    }
    if (paused_) {
        if (!pause_announced_) {
            out.push_back(state_message());
            pause_announced_ = true;
        }
        last_now_ = now;
        return out;
    }
    accumulator_ = std::min(accumulator_ + std::max(0.0, now - last_now_), kMaxCatchUp);
    last_now_ = now;
    while (accumulator_ >= LoopRates::kDt && !sim_->finished()) {
        accumulator_ -= LoopRates::kDt;
        if (operator_) {
            operator_tick(*sim_, *operator_);
        } else {
            targets_.push_back(target_);
            steer_tick(*sim_, *tracker_, target_);
        }
    }
    if (sim_->finished()) {
        out.push_back(state_message());
        out.push_back(finish_trial());
        return out;
    }
    if (now >= next_state_) {
        out.push_back(state_message());
        next_state_ += 1.0 / config_.state_rate;
        if (next_state_ < now) next_state_ = now + 1.0 / config_.state_rate;
    }
    return out;
}

}  // namespace bcih
