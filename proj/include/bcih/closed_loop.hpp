#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bcih/eeg_synth.hpp"
#include "bcih/maze.hpp"
#include "bcih/operator_model.hpp"
#include "bcih/pipeline.hpp"

namespace bcih {

enum class Condition { NO_A, BCI_A, ALL_A };

const char* to_string(Condition c);
/// Throws InputError for anything but "NO_A", "BCI_A", "ALL_A".
Condition condition_from_string(std::string_view s);
inline constexpr Condition kAllConditions[] = {Condition::NO_A, Condition::BCI_A, Condition::ALL_A};

/// Guide state for the next second given the latest index (nullopt before
/// the first index). BCI_A activates strictly above zero.
bool guide_policy(Condition c, std::optional<int> index);

/// Loop clock. Everything runs off the 100 Hz physics tick; EEG arrives in
/// 0.1 s blocks of 51 or 52 samples that sum to 512 per second.
struct LoopRates {
    static constexpr int kPhysicsHz = 100;
    static constexpr int kTicksPerBlock = 10;     // 10 Hz labels and recording
    static constexpr int kTicksPerIndex = 100;    // 1 Hz index / guide toggle
    static constexpr double kDt = 1.0 / kPhysicsHz;
    static constexpr int kEegHz = 512;

    /// Samples in EEG block j (covering (0.1 j, 0.1 (j+1)] seconds).
    static Eigen::Index eeg_block_size(std::int64_t j) {
        return static_cast<Eigen::Index>((kEegHz * (j + 1)) / 10 - (kEegHz * j) / 10);
    }
};

struct TrialSample {
    double t = 0.0;
    Vec2 cursor;
    int index = 0;
    bool guide_active = false;
    double workload = 0.0;
};

enum class Outcome { Completed, Timeout };

struct TrialRecord {
    json header;  // everything needed to re-simulate the trial
    Condition condition = Condition::NO_A;
    std::uint64_t seed = 0;
    std::vector<TrialSample> samples;
    std::vector<CollisionEvent> collisions;
    Outcome outcome = Outcome::Timeout;
    double duration = 0.0;
};

/// Inputs of one trial. The scene and model are shared read-only.
struct TrialSetup {
    std::shared_ptr<const Scene> scene;
    std::shared_ptr<const PipelineModel> model;
    Condition condition = Condition::NO_A;
    OperatorConfig operator_config;
    SynthConfig subject;  // EEG characteristics of the simulated subject
    GuideLaw guide;
    std::uint64_t seed = 0;
    double timeout = 120.0;
};

/// Fixed-timestep world + EEG + pipeline + adaptation policy. The caller
/// supplies the commanded velocity and latent workload each tick, which lets
/// the simulated operator and a human-driven session share this code path.
class TrialSimulator {
public:
    explicit TrialSimulator(TrialSetup setup);

    struct TickInfo {
        Vec2 force;                              // guide contribution this tick
        std::optional<CollisionEvent> collision;
        bool sampled = false;                    // a 10 Hz sample was recorded
        bool index_updated = false;
        bool finished = false;
    };

    /// Advances one physics tick.
    TickInfo tick(Vec2 commanded_velocity, double latent_workload);

    bool finished() const { return finished_; }
    std::int64_t ticks() const { return tick_; }
    double time() const { return static_cast<double>(tick_) / LoopRates::kPhysicsHz; }
    Vec2 cursor() const { return cursor_; }
    bool guide_active() const { return guide_active_; }
    std::optional<int> index() const;
    double progress() const { return progress_.value(); }
    const TrialSetup& setup() const { return setup_; }
    const TrialRecord& record() const { return record_; }
    TrialRecord take_record();

private:
    void finish(Outcome outcome);

    TrialSetup setup_;
    EegSynth synth_;
    WorkloadEstimator estimator_;
    CollisionDetector collisions_;
    PathProgress progress_;
    TrialRecord record_;
    Vec2 cursor_;
    bool guide_active_ = false;
    bool finished_ = false;
    std::int64_t tick_ = 0;
};

/// Seeds of the trial's operator and EEG generator.
std::uint64_t trial_operator_seed(const TrialSetup& s);
std::uint64_t trial_eeg_seed(const TrialSetup& s);

/// Runs one trial with the simulated operator until the goal or timeout.
TrialRecord run_trial(const TrialSetup& setup);

/// Runs one trial where each tick's cursor target comes from `target_at`
/// (an interactive session's mouse trace replayed in batch).
TrialRecord run_trial_with_targets(const TrialSetup& setup, const std::function<Vec2(std::int64_t)>& target_at);

/// Velocity of a cursor chasing a target at bounded speed.
Vec2 approach_velocity(Vec2 cursor, Vec2 target, double v_max, double dt);

/// One tick driven by the simulated operator.
TrialSimulator::TickInfo operator_tick(TrialSimulator& sim, OperatorState& op);
/// One tick steering toward `target` (a human's pointer); the latent level
/// follows the same difficulty law from the cursor's context.
TrialSimulator::TickInfo steer_tick(TrialSimulator& sim, WorkloadTracker& tracker, Vec2 target);
/// Operator state / tracker matching a simulator's setup.
OperatorState make_operator(const TrialSetup& setup);
WorkloadTracker make_tracker(const TrialSimulator& sim);

enum class PartFilter { Whole, Part1, Part2 };

/// Fraction of 10 Hz samples (within the part) with the guide active.
/// Throws InputError when the restriction holds no samples.
double activation_fraction(const TrialRecord& record, const Scene& scene, PartFilter part = PartFilter::Whole);

/// Mean recorded index within the part (NaN when empty).
double mean_index(const TrialRecord& record, const Scene& scene, PartFilter part = PartFilter::Whole);

/// NDJSON: header, samples, collisions, summary.
std::string to_ndjson(const TrialRecord& record);
TrialRecord trial_from_ndjson(std::string_view text);

/// Reconstructs the setup from a record header.
TrialSetup setup_from_header(const json& header);

struct ReplayReport {
    bool identical = false;
    std::size_t first_divergent_line = 0;  // 1-based; 0 when identical
    std::string expected;
    std::string actual;
};

/// Re-simulates a record from its header and compares NDJSON bytes.
ReplayReport replay_check(std::string_view ndjson_text);

}  // namespace bcih
