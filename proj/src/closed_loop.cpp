#include "bcih/closed_loop.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "bcih/errors.hpp"

namespace bcih {

namespace {

constexpr double kGoalTolerance = 10.0;  // px of arc length before the end

// Pushes the cursor out of any wall it overlaps (walls are immovable).
Vec2 resolve_penetration(const Scene& scene, Vec2 p) {
    const double reach = scene.cursor_radius;
    for (int pass = 0; pass < 3; ++pass) {
        bool moved = false;
        for (const auto& w : scene.walls) {
            const Vec2 d = p - w.center;
            const double min_d = w.radius + reach;
            const double n = d.norm();
            if (n < min_d) {
                p = w.center + d.normalized() * min_d;
                moved = true;
            }
        }
        if (!moved) break;
    }
    return scene.clamp(p);
}

json sample_json(const TrialSample& s) {
    return {{"type", "sample"}, {"t", s.t},           {"x", s.cursor.x},      {"y", s.cursor.y},
            {"index", s.index}, {"guide", s.guide_active}, {"workload", s.workload}};
}

const char* to_string(Outcome o) { return o == Outcome::Completed ? "completed" : "timeout"; }

bool in_part(const Scene& scene, Vec2 p, PartFilter part) {
    if (part == PartFilter::Whole) return true;
    const Part actual = classify_part(scene, p);
    return (part == PartFilter::Part1) == (actual == Part::Part1);
}

}  // namespace

const char* to_string(Condition c) {
    switch (c) {
        case Condition::NO_A: return "NO_A";
        case Condition::BCI_A: return "BCI_A";
        case Condition::ALL_A: return "ALL_A";
    }
    return "?";
}

Condition condition_from_string(std::string_view s) {
    if (s == "NO_A") return Condition::NO_A;
    if (s == "BCI_A") return Condition::BCI_A;
    if (s == "ALL_A") return Condition::ALL_A;
    throw InputError("unknown condition '" + std::string(s) + "' (expected NO_A, BCI_A or ALL_A)");
}

bool guide_policy(Condition c, std::optional<int> index) {
    switch (c) {
        case Condition::NO_A: return false;
        case Condition::ALL_A: return true;
        case Condition::BCI_A: return index.has_value() && *index > 0;
    }
    return false;
}

std::uint64_t trial_operator_seed(const TrialSetup& s) { return derive_seed(s.seed, s.operator_config.seed, 1); }
std::uint64_t trial_eeg_seed(const TrialSetup& s) { return derive_seed(s.seed, s.subject.seed, 2); }

namespace {

SynthConfig trial_synth(const TrialSetup& s) {
    SynthConfig c = s.subject;
    c.seed = trial_eeg_seed(s);
    return c;
}

}  // namespace

TrialSimulator::TrialSimulator(TrialSetup setup)
    : setup_(setup.scene ? std::move(setup) : throw UsageError("trial requires a scene")),
      synth_(trial_synth(setup_)),
      estimator_(setup_.model ? setup_.model : throw UsageError("trial requires a calibrated model")),
      progress_(setup_.scene->project(setup_.scene->start, 0.0, 1.0)),
      cursor_(setup_.scene->start) {
    setup_.guide.validate();
    setup_.operator_config.validate();
    if (!(setup_.timeout > 0.0)) throw UsageError("timeout must be positive");
    record_.condition = setup_.condition;
    record_.seed = setup_.seed;
    record_.header = {{"type", "header"},
                      {"format", "bcih-trial"},
                      {"version", 1},
                      {"condition", to_string(setup_.condition)},
                      {"seed", setup_.seed},
                      {"scene_hash", scene_hash(*setup_.scene)},
                      {"model_hash", model_hash(*setup_.model)},
                      {"timeout", setup_.timeout},
                      {"operator", to_json(setup_.operator_config)},
                      {"subject", to_json(setup_.subject)},
                      {"guide", to_json(setup_.guide)},
                      {"scene", {{"spec", to_json(setup_.scene->spec)}, {"seed", setup_.scene->seed}}},
                      {"model", to_json(*setup_.model)}};
    guide_active_ = guide_policy(setup_.condition, std::nullopt);
}

std::optional<int> TrialSimulator::index() const {
    if (const auto& l = estimator_.latest()) return l->value;
    return std::nullopt;
}

TrialSimulator::TickInfo TrialSimulator::tick(Vec2 commanded_velocity, double latent_workload) {
    if (finished_) throw UsageError("trial already finished");
    const Scene& scene = *setup_.scene;
    constexpr double dt = LoopRates::kDt;
    TickInfo info;

    if (guide_active_) info.force = guide_force(setup_.guide, scene, cursor_);
    const Vec2 moved = scene.clamp(cursor_ + (commanded_velocity + info.force) * dt);
    if (distance(moved, cursor_) > scene.cursor_radius)
        throw SimulationError("cursor step exceeds the cursor radius; lower the speed or raise the rate");
    ++tick_;
    const double t = time();
    info.collision = collisions_.update(scene, moved, t);
    if (info.collision) record_.collisions.push_back(*info.collision);
    cursor_ = resolve_penetration(scene, moved);
    progress_.update(scene, cursor_);

    if (tick_ % LoopRates::kTicksPerBlock == 0) {
        const std::int64_t block = tick_ / LoopRates::kTicksPerBlock - 1;
        const double w = std::clamp(latent_workload, 0.0, 1.0);
        const auto update = estimator_.push(synth_.step(w, LoopRates::eeg_block_size(block)));
        info.index_updated = update.index.has_value();
        if (tick_ % LoopRates::kTicksPerIndex == 0) guide_active_ = guide_policy(setup_.condition, index());
        record_.samples.push_back({t, cursor_, index().value_or(0), guide_active_, w});
        info.sampled = true;
    }

    if (progress_.value() >= scene.path_length() - kGoalTolerance) finish(Outcome::Completed);
    else if (t >= setup_.timeout - 1e-9) finish(Outcome::Timeout);
    info.finished = finished_;
    return info;
}

void TrialSimulator::finish(Outcome outcome) {
    finished_ = true;
    record_.outcome = outcome;
    record_.duration = time();
}

TrialRecord TrialSimulator::take_record() { return std::move(record_); }

OperatorState make_operator(const TrialSetup& setup) {
    OperatorConfig oc = setup.operator_config;
    oc.seed = trial_operator_seed(setup);
    return OperatorState(oc, *setup.scene);
}

WorkloadTracker make_tracker(const TrialSimulator& sim) {
    return WorkloadTracker::engaged(sim.setup().operator_config, *sim.setup().scene, sim.cursor(), sim.progress());
}

TrialSimulator::TickInfo operator_tick(TrialSimulator& sim, OperatorState& op) {
    const auto cmd = operator_step(op, *sim.setup().scene, sim.cursor(), sim.guide_active(), LoopRates::kDt);
    return sim.tick(cmd.velocity, cmd.workload.level);
}

TrialSimulator::TickInfo steer_tick(TrialSimulator& sim, WorkloadTracker& tracker, Vec2 target) {
    const auto& setup = sim.setup();
    const auto& lw = tracker.update(*setup.scene, sim.cursor(), sim.progress(), sim.guide_active(), LoopRates::kDt);
    return sim.tick(approach_velocity(sim.cursor(), target, setup.operator_config.v_max, LoopRates::kDt), lw.level);
}

TrialRecord run_trial(const TrialSetup& setup) {
    TrialSimulator sim(setup);
    OperatorState op = make_operator(setup);
    while (!sim.finished()) operator_tick(sim, op);
    return sim.take_record();
}

Vec2 approach_velocity(Vec2 cursor, Vec2 target, double v_max, double dt) {
    const Vec2 d = target - cursor;
    const double n = d.norm();
    if (n <= v_max * dt) return d / dt;
    return d * (v_max / n);
}

TrialRecord run_trial_with_targets(const TrialSetup& setup, const std::function<Vec2(std::int64_t)>& target_at) {
    TrialSimulator sim(setup);
    WorkloadTracker tracker = make_tracker(sim);
    while (!sim.finished()) steer_tick(sim, tracker, target_at(sim.ticks()));
    return sim.take_record();
}

double activation_fraction(const TrialRecord& record, const Scene& scene, PartFilter part) {
    std::size_t n = 0, active = 0;
    for (const auto& s : record.samples) {
        if (!in_part(scene, s.cursor, part)) continue;
        ++n;
        if (s.guide_active) ++active;
    }
    if (n == 0) throw InputError("activation_fraction: no samples in the requested part");
    return static_cast<double>(active) / static_cast<double>(n);
}

double mean_index(const TrialRecord& record, const Scene& scene, PartFilter part) {
    std::size_t n = 0;
    double sum = 0.0;
    for (const auto& s : record.samples) {
        if (!in_part(scene, s.cursor, part)) continue;
        ++n;
        sum += s.index;
    }
    return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(n);
}

std::string to_ndjson(const TrialRecord& r) {
    std::string out;
    out += r.header.dump();
    out += '\n';
    for (const auto& s : r.samples) {
        out += sample_json(s).dump();
        out += '\n';
    }
    for (const auto& c : r.collisions) {
        out += json{{"type", "collision"}, {"t", c.time}, {"wall", c.wall}, {"x", c.position.x}, {"y", c.position.y}}.dump();
        out += '\n';
    }
    out += json{{"type", "summary"},
                {"outcome", to_string(r.outcome)},
                {"duration", r.duration},
                {"collisions", r.collisions.size()},
                {"samples", r.samples.size()}}
               .dump();
    out += '\n';
    return out;
}

TrialRecord trial_from_ndjson(std::string_view text) {
    TrialRecord r;
    std::istringstream in{std::string(text)};
    std::string line;
    bool have_header = false, have_summary = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw InputError("NDJSON line " + std::to_string(line_no) + ": " + e.what());
        }
        const std::string type = j.at("type").get<std::string>();
        if (type == "header") {
            r.header = j;
            r.condition = condition_from_string(j.at("condition").get<std::string>());
            r.seed = j.at("seed").get<std::uint64_t>();
            have_header = true;
        } else if (type == "sample") {
            r.samples.push_back({j.at("t").get<double>(),
                                 {j.at("x").get<double>(), j.at("y").get<double>()},
                                 j.at("index").get<int>(),
                                 j.at("guide").get<bool>(),
                                 j.at("workload").get<double>()});
        } else if (type == "collision") {
            r.collisions.push_back({j.at("t").get<double>(), j.at("wall").get<std::size_t>(),
                                    {j.at("x").get<double>(), j.at("y").get<double>()}});
        } else if (type == "summary") {
            r.outcome = j.at("outcome").get<std::string>() == "completed" ? Outcome::Completed : Outcome::Timeout;
            r.duration = j.at("duration").get<double>();
            have_summary = true;
        } else {
            throw InputError("NDJSON line " + std::to_string(line_no) + ": unknown record type '" + type + "'");
        }
    }
    if (!have_header || !have_summary) throw InputError("NDJSON trial record needs a header and a summary line");
    return r;
}

TrialSetup setup_from_header(const json& h) {
    TrialSetup s;
    const auto& sc = h.at("scene");
    auto scene = std::make_shared<Scene>(build_scene(scene_spec_from_json(sc.at("spec")), sc.at("seed").get<std::uint64_t>()));
    if (scene_hash(*scene) != h.at("scene_hash").get<std::string>())
        throw InputError("record header: rebuilt scene does not match scene_hash");
    auto model = std::make_shared<PipelineModel>(pipeline_model_from_json(h.at("model")));
    if (model_hash(*model) != h.at("model_hash").get<std::string>())
        throw InputError("record header: embedded model does not match model_hash");
    s.scene = std::move(scene);
    s.model = std::move(model);
    s.condition = condition_from_string(h.at("condition").get<std::string>());
    s.operator_config = operator_config_from_json(h.at("operator"));
    s.subject = synth_config_from_json(h.at("subject"));
    s.guide = guide_law_from_json(h.at("guide"));
    s.seed = h.at("seed").get<std::uint64_t>();
    s.timeout = h.at("timeout").get<double>();
    return s;
}

ReplayReport replay_check(std::string_view text) {
    const auto first_nl = text.find('\n');
    const json header = json::parse(text.substr(0, first_nl));
    if (header.value("type", "") != "header") throw InputError("replay: first line is not a header");
    const std::string regenerated = to_ndjson(run_trial(setup_from_header(header)));

    ReplayReport rep;
    std::istringstream a{std::string(text)}, b{regenerated};
    std::string la, lb;
    std::size_t line = 0;
    while (true) {
        const bool ha = static_cast<bool>(std::getline(a, la));
        const bool hb = static_cast<bool>(std::getline(b, lb));
        ++line;
        if (!ha && !hb) break;
        if (ha != hb || la != lb) {
            rep.first_divergent_line = line;
            rep.actual = ha ? la : "<end of file>";
            rep.expected = hb ? lb : "<end of file>";
            return rep;
        }
    }
    rep.identical = true;
    return rep;
}

}  // namespace bcih
