// Calibrated model and default scene shared by loop-level tests.
#pragma once

#include <memory>

#include "bcih/experiment.hpp"

namespace fixture {

struct World {
    bcih::ExperimentConfig config;
    std::shared_ptr<const bcih::Scene> scene;
    bcih::OperatorProfile profile;
    std::shared_ptr<const bcih::PipelineModel> model;

    bcih::TrialSetup setup(bcih::Condition c, std::uint64_t seed, double timeout = 120.0) const {
        bcih::TrialSetup s;
        s.scene = scene;
        s.model = model;
        s.condition = c;
        s.operator_config = profile.operator_config;
        s.subject = profile.subject;
        s.guide = config.guide;
        s.seed = seed;
        s.timeout = timeout;
        return s;
    }
};

inline const World& world() {
    static const World w = [] {
        World x;
        x.scene = std::make_shared<const bcih::Scene>(bcih::build_scene(x.config.scene, x.config.scene_seed));
        x.profile = bcih::operator_profile(x.config, 0);
        x.model = std::make_shared<const bcih::PipelineModel>(
            bcih::calibrate_subject(x.profile.subject, x.profile.operator_config).model);
        return x;
    }();
    return w;
}

}  // namespace fixture
