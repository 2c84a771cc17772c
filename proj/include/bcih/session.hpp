#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bcih/closed_loop.hpp"

namespace bcih {

struct ServerConfig {
    std::string bind_address = "127.0.0.1";
    unsigned short port = 8765;  // 0 picks a free port
    double state_rate = 30.0;    // Hz
    double input_timeout = 2.0;  // s without cursor input before pausing
    int max_sessions = 8;
    std::filesystem::path data_dir;  // NDJSON dumps go here when non-empty
    std::uint64_t seed = 1;

    void validate() const;
};

/// Applies BCIH_PORT and BCIH_DATA_DIR when set. Throws ConfigError on a
/// malformed port.
ServerConfig apply_env_overrides(ServerConfig config);

/// Shared read-only inputs of every session.
struct SessionResources {
    std::shared_ptr<const Scene> scene;
    std::shared_ptr<const PipelineModel> model;
    SynthConfig subject;
    OperatorConfig operator_config;
    GuideLaw guide;
    double timeout = 120.0;
};

/// Default scene plus a subject calibrated from `seed`.
std::shared_ptr<const SessionResources> default_resources(std::uint64_t seed = 1);

/// One client's protocol state machine and live trial. Not thread-safe;
/// the owner serializes `handle` and `advance`. Times are wall-clock
/// seconds from any fixed origin.
class InteractiveSession {
public:
    enum class Phase { Connected, Ready, Running, Ended };
    enum class Mode { Interactive, Simulated };

    InteractiveSession(std::shared_ptr<const SessionResources> resources, ServerConfig config, std::uint64_t session_id);

    /// Processes one client text frame; returns the replies.
    std::vector<json> handle(std::string_view text, double now);
    /// Runs the simulation up to `now`; returns due state / trial_end messages.
    std::vector<json> advance(double now);

    Phase phase() const { return phase_; }
    bool paused() const { return paused_; }
    Condition condition() const { return condition_; }
    const TrialSimulator* simulator() const { return sim_ ? &*sim_ : nullptr; }
    /// Pointer targets used on each tick so far (interactive mode).
    const std::vector<Vec2>& target_trace() const { return targets_; }
    /// Setup of the current or last trial.
    const std::optional<TrialSetup>& setup() const { return setup_; }
    /// Record of the last finished trial.
    const std::optional<TrialRecord>& last_record() const { return last_record_; }

    static json error_message(std::string_view code, std::string_view text);

private:
    json on_hello(const json& msg);
    json on_start(double now);
    json on_cursor(const json& msg, double now);
    json on_reset();
    json state_message() const;
    json finish_trial();

    std::shared_ptr<const SessionResources> res_;
    ServerConfig config_;
    std::uint64_t id_;
    Phase phase_ = Phase::Connected;
    Mode mode_ = Mode::Interactive;
    Condition condition_ = Condition::NO_A;
    int trials_started_ = 0;

    std::optional<TrialSetup> setup_;
    std::optional<TrialSimulator> sim_;
    std::optional<WorkloadTracker> tracker_;
    std::optional<OperatorState> operator_;
    std::optional<TrialRecord> last_record_;
    std::vector<Vec2> targets_;
    Vec2 target_;
    bool paused_ = false;
    bool pause_announced_ = false;
    double last_now_ = 0.0;
    double last_input_ = 0.0;
    double accumulator_ = 0.0;
    double next_state_ = 0.0;
};

}  // namespace bcih
