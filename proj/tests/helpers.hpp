#pragma once

// Shared test fixtures: small synthetic datasets run through the full
// featurize + label + fold pipeline. Cached by config/seed because several
// test cases reuse the same dataset.

#include <map>

#include "eml/eval.hpp"
#include "eml/synth.hpp"

namespace testutil {

struct SmallOpts {
    int users = 4;
    int trials = 12;
    double duration = 65;
    double volatility = 2.0;
    double gyr_variance = 3.0;
    double hf_shift = 1.0;
    double gsr_boost = 0.4;
    double discomfort_rate = 0.15;
    uint64_t seed = 7;

    auto key() const {
        return std::tuple{users, trials, duration, volatility, gyr_variance, hf_shift, gsr_boost,
                          discomfort_rate, seed};
    }
};

inline eml::SynthConfig to_synth_config(const SmallOpts& o) {
    eml::SynthConfig cfg;
    cfg.n_users = o.users;
    cfg.n_trials_per_user = o.trials;
    cfg.trial_duration_s = o.duration;
    cfg.trial_duration_jitter_s = 2.0;
    cfg.baseline_pre_s = 70;
    cfg.baseline_post_s = 40;
    cfg.eml_motion_volatility = o.volatility;
    cfg.discomfort_gyr_variance = o.gyr_variance;
    cfg.hrv_hf_shift = o.hf_shift;
    cfg.gsr_eml_boost = o.gsr_boost;
    cfg.discomfort_rate = o.discomfort_rate;
    cfg.seed = o.seed;
    return cfg;
}

inline const eml::SynthDataset& small_synth(const SmallOpts& o = {}) {
    static std::map<decltype(o.key()), eml::SynthDataset> cache;
    auto [it, inserted] = cache.try_emplace(o.key());
    if (inserted) it->second = eml::generate(to_synth_config(o));
    return it->second;
}

inline const eml::BuiltDataset& small_dataset(const SmallOpts& o = {},
                                              const eml::PipelineConfig& cfg = {}) {
    static std::map<decltype(o.key()), eml::BuiltDataset> cache;
    auto [it, inserted] = cache.try_emplace(o.key());
    if (inserted) {
        const eml::SynthDataset& ds = small_synth(o);
        it->second = eml::build_dataset({ds.sensors, ds.questionnaire}, cfg);
    }
    return it->second;
}

}  // namespace testutil
