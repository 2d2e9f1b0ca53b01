#include "eml/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "eml/labeling.hpp"
#include "eml/numeric.hpp"
#include "eml/windowing.hpp"

namespace eml {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<int> group_filtered_indices(const std::vector<SensorGroup>* groups) {
    const auto& defs = feature_registry();
    std::vector<int> idx;
    for (size_t i = 0; i < defs.size(); ++i) {
        if (!groups ||
            std::find(groups->begin(), groups->end(), defs[i].group) != groups->end())
            idx.push_back(static_cast<int>(i));
    }
    return idx;
}

}  // namespace

FeatureMatrix sensor_matrix(std::span<const LabeledWindow> dataset,
                            const std::vector<SensorGroup>* groups) {
    const auto idx = group_filtered_indices(groups);
    if (idx.empty()) throw std::invalid_argument("sensor subset yields zero features");
    FeatureMatrix m;
    const auto& defs = feature_registry();
    for (int i : idx) m.names.push_back(defs[static_cast<size_t>(i)].name);
    m.rows = dataset.size();
    m.data.resize(m.rows * m.names.size());
    for (size_t r = 0; r < dataset.size(); ++r)
        for (size_t c = 0; c < idx.size(); ++c)
            m.at(r, c) = dataset[r].fv.values[static_cast<size_t>(idx[c])];
    return m;
}

PipelineModel train_two_stage(std::span<const LabeledWindow> dataset, const PipelineConfig& cfg,
                              uint64_t seed, Exec exec, const std::vector<SensorGroup>* groups) {
    if (dataset.size() < 10) throw std::invalid_argument("train_two_stage: need at least 10 windows");
    size_t eml_high = 0, disc_high = 0;
    for (const auto& lw : dataset) {
        eml_high += lw.eml_class == EmlClass::high;
        disc_high += lw.discomfort_class == DiscomfortClass::high;
    }
    if (eml_high == 0 || eml_high == dataset.size())
        throw std::invalid_argument("train_two_stage: single-class EML target");
    const bool disc_degenerate = disc_high == 0 || disc_high == dataset.size();
    if (disc_degenerate && cfg.use_discomfort_stage)
        throw std::invalid_argument("train_two_stage: single-class discomfort target");

    const FeatureMatrix x = sensor_matrix(dataset, groups);
    std::vector<int> y_disc(dataset.size()), y_eml(dataset.size());
    for (size_t r = 0; r < dataset.size(); ++r) {
        y_disc[r] = dataset[r].discomfort_class == DiscomfortClass::high ? 1 : 0;
        y_eml[r] = dataset[r].eml_class == EmlClass::high ? 1 : 0;
    }

    const ModelSpec stage1_spec = ModelSpec::make(cfg.stage1_kind);
    const ModelSpec stage2_spec = ModelSpec::make(cfg.stage2_kind);

    PipelineModel model;
    model.config = cfg;
    model.uses_discomfort = cfg.use_discomfort_stage;
    if (disc_degenerate) {
        // Discomfort never varies and the stage is disabled: keep a constant
        // prior so predict_window still reports a probability.
        TrainedModel prior;
        prior.spec = ModelSpec(ModelKind::decision_tree);
        prior.feature_names = x.names;
        prior.seed = seed;
        prior.n_rows = x.rows;
        prior.split_gain.assign(x.cols(), 0.0);
        Tree leaf;
        leaf.nodes.push_back({});
        leaf.nodes[0].value =
            static_cast<double>(disc_high) / static_cast<double>(dataset.size());
        prior.trees.push_back(leaf);
        model.discomfort_model = std::move(prior);
    } else {
        model.discomfort_model = train(stage1_spec, x, y_disc, derive_seed(seed, {0xA}), exec);
    }

    FeatureMatrix x2 = x;
    if (cfg.use_discomfort_stage) {
        // Out-of-fold stage-1 probabilities, grouped by trial so stage-1
        // overfit cannot leak into stage 2.
        std::vector<TrialKey> keys;
        for (const auto& lw : dataset)
            if (std::find(keys.begin(), keys.end(), lw.key()) == keys.end())
                keys.push_back(lw.key());
        std::vector<double> oof(dataset.size(), kNaN);
        const int oof_k = std::min<int>(cfg.stage1_oof_folds, static_cast<int>(keys.size()));
        if (oof_k >= 2) {
            const FoldAssignment folds = assign_folds(keys, oof_k, derive_seed(seed, {0xB}));
            for (int f = 0; f < oof_k; ++f) {
                std::vector<size_t> train_rows, test_rows;
                for (size_t r = 0; r < dataset.size(); ++r)
                    (folds.at(dataset[r].key()) == f ? test_rows : train_rows).push_back(r);
                if (test_rows.empty()) continue;

                size_t pos = 0;
                for (size_t r : train_rows) pos += static_cast<size_t>(y_disc[r]);
                if (train_rows.size() < 10 || pos == 0 || pos == train_rows.size()) {
                    // Degenerate inner split: fall back to the training rate.
                    const double rate =
                        train_rows.empty()
                            ? 0.5
                            : static_cast<double>(pos) / static_cast<double>(train_rows.size());
                    for (size_t r : test_rows) oof[r] = rate;
                    continue;
                }

                FeatureMatrix xf;
                xf.names = x.names;
                xf.rows = train_rows.size();
                xf.data.resize(xf.rows * xf.cols());
                std::vector<int> yf(train_rows.size());
                for (size_t i = 0; i < train_rows.size(); ++i) {
                    const auto row = x.row(train_rows[i]);
                    std::copy(row.begin(), row.end(), xf.data.begin() + static_cast<ptrdiff_t>(i * xf.cols()));
                    yf[i] = y_disc[train_rows[i]];
                }
                const TrainedModel fold_model =
                    train(stage1_spec, xf, yf, derive_seed(seed, {0xC, static_cast<uint64_t>(f)}),
                          exec);
                for (size_t r : test_rows)
                    oof[r] = predict_row(fold_model, x.row(r)).probability;
            }
        }
        // Any row not covered by the inner split falls back to the full-data
        // model (only happens for degenerate tiny datasets).
        for (size_t r = 0; r < dataset.size(); ++r)
            if (std::isnan(oof[r])) oof[r] = predict_row(model.discomfort_model, x.row(r)).probability;

        x2.names.push_back(kDiscomfortFeature);
        FeatureMatrix aug;
        aug.names = x2.names;
        aug.rows = x.rows;
        aug.data.resize(aug.rows * aug.names.size());
        for (size_t r = 0; r < x.rows; ++r) {
            const auto row = x.row(r);
            std::copy(row.begin(), row.end(), aug.data.begin() + static_cast<ptrdiff_t>(r * aug.cols()));
            aug.at(r, aug.cols() - 1) = oof[r];
        }
        x2 = std::move(aug);
    }

    model.eml_model = train(stage2_spec, x2, y_eml, derive_seed(seed, {0xD}), exec);
    return model;
}

WindowPrediction predict_window(const PipelineModel& model, const FeatureVector& fv) {
    if (!fv.normalized)
        throw std::invalid_argument("predict_window: feature vector is not normalized");

    const auto& s1_names = model.discomfort_model.feature_names;
    std::vector<double> row1(s1_names.size());
    for (size_t f = 0; f < s1_names.size(); ++f) {
        const int idx = feature_index(s1_names[f]);
        row1[f] = idx >= 0 ? fv.values[static_cast<size_t>(idx)] : kNaN;
    }
    const Prediction p1 = predict_row(model.discomfort_model, row1);

    const auto& s2_names = model.eml_model.feature_names;
    std::vector<double> row2(s2_names.size());
    for (size_t f = 0; f < s2_names.size(); ++f) {
        if (s2_names[f] == kDiscomfortFeature) {
            row2[f] = p1.probability;
            continue;
        }
        const int idx = feature_index(s2_names[f]);
        row2[f] = idx >= 0 ? fv.values[static_cast<size_t>(idx)] : kNaN;
    }
    const Prediction p2 = predict_row(model.eml_model, row2);

    WindowPrediction out;
    out.p_disc = p1.probability;
    out.discomfort = p1.label ? DiscomfortClass::high : DiscomfortClass::normal;
    out.p_eml = p2.probability;
    out.eml = p2.label ? EmlClass::high : EmlClass::low;
    return out;
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json config_to_json(const PipelineConfig& c) {
    nlohmann::json j;
    j["window_size_s"] = c.window_size_s;
    j["step_size_s"] = c.step_size_s;
    j["k_folds"] = c.k_folds;
    j["rng_seed"] = c.rng_seed;
    j["split_mode"] = c.split_mode == SplitMode::leave_one_user_out ? "leave_one_user_out"
                                                                    : "grouped_kfold";
    j["vlf_lo_hz"] = c.vlf_lo_hz;
    j["vlf_hi_hz"] = c.vlf_hi_hz;
    j["lf_hi_hz"] = c.lf_hi_hz;
    j["hf_hi_hz"] = c.hf_hi_hz;
    j["tachogram_fs_hz"] = c.tachogram_fs_hz;
    j["welch_segment_s"] = c.welch_segment_s;
    j["sampen_m"] = c.sampen_m;
    j["sampen_r_factor"] = c.sampen_r_factor;
    j["sparc_cutoff_hz"] = c.sparc_cutoff_hz;
    j["sparc_amp_thresh"] = c.sparc_amp_thresh;
    j["gsr_smooth_hz"] = c.gsr_smooth_hz;
    j["gsr_min_prominence_us"] = c.gsr_min_prominence_us;
    j["baseline_epsilon"] = c.baseline_epsilon;
    j["artifact_strict"] = c.artifact_strict;
    j["artifact_alpha"] = c.artifact_alpha;
    j["artifact_grid_hz"] = c.artifact_grid_hz;
    j["per_user_eml_split"] = c.per_user_eml_split;
    j["stage1_kind"] = c.stage1_kind;
    j["stage2_kind"] = c.stage2_kind;
    j["use_discomfort_stage"] = c.use_discomfort_stage;
    j["stage1_oof_folds"] = c.stage1_oof_folds;
    j["bootstrap_b"] = c.bootstrap_b;
    return j;
}

PipelineConfig config_from_json(const nlohmann::json& j) {
    PipelineConfig c;
    c.window_size_s = j.at("window_size_s").get<double>();
    c.step_size_s = j.at("step_size_s").get<double>();
    c.k_folds = j.at("k_folds").get<int>();
    c.rng_seed = j.at("rng_seed").get<uint64_t>();
    c.split_mode = j.at("split_mode").get<std::string>() == "leave_one_user_out"
                       ? SplitMode::leave_one_user_out
                       : SplitMode::grouped_kfold;
    c.vlf_lo_hz = j.at("vlf_lo_hz").get<double>();
    c.vlf_hi_hz = j.at("vlf_hi_hz").get<double>();
    c.lf_hi_hz = j.at("lf_hi_hz").get<double>();
    c.hf_hi_hz = j.at("hf_hi_hz").get<double>();
    c.tachogram_fs_hz = j.at("tachogram_fs_hz").get<double>();
    c.welch_segment_s = j.at("welch_segment_s").get<double>();
    c.sampen_m = j.at("sampen_m").get<int>();
    c.sampen_r_factor = j.at("sampen_r_factor").get<double>();
    c.sparc_cutoff_hz = j.at("sparc_cutoff_hz").get<double>();
    c.sparc_amp_thresh = j.at("sparc_amp_thresh").get<double>();
    c.gsr_smooth_hz = j.at("gsr_smooth_hz").get<double>();
    c.gsr_min_prominence_us = j.at("gsr_min_prominence_us").get<double>();
    c.baseline_epsilon = j.at("baseline_epsilon").get<double>();
    c.artifact_strict = j.at("artifact_strict").get<bool>();
    c.artifact_alpha = j.at("artifact_alpha").get<double>();
    c.artifact_grid_hz = j.at("artifact_grid_hz").get<double>();
    c.per_user_eml_split = j.at("per_user_eml_split").get<bool>();
    c.stage1_kind = j.at("stage1_kind").get<std::string>();
    c.stage2_kind = j.at("stage2_kind").get<std::string>();
    c.use_discomfort_stage = j.at("use_discomfort_stage").get<bool>();
    c.stage1_oof_folds = j.at("stage1_oof_folds").get<int>();
    c.bootstrap_b = j.at("bootstrap_b").get<int>();
    return c;
}

}  // namespace

std::string PipelineModel::serialize() const {
    nlohmann::json j;
    j["version"] = 1;
    j["config"] = config_to_json(config);
    j["uses_discomfort"] = uses_discomfort;
    j["stage1"] = nlohmann::json::parse(discomfort_model.serialize());
    j["stage2"] = nlohmann::json::parse(eml_model.serialize());
    nlohmann::json jb = nlohmann::json::object();
    for (const auto& [user, means] : baseline.means) {
        nlohmann::json arr = nlohmann::json::array();
        for (double m : means) {
            if (std::isnan(m))
                arr.push_back(nullptr);
            else
                arr.push_back(m);
        }
        jb[user] = std::move(arr);
    }
    j["baseline"] = std::move(jb);
    return j.dump();
}

PipelineModel PipelineModel::deserialize(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (!j.contains("version") || j.at("version").get<int>() != 1)
        throw std::runtime_error("unsupported pipeline container version");

    PipelineModel m;
    m.config = config_from_json(j.at("config"));
    m.uses_discomfort = j.at("uses_discomfort").get<bool>();
    m.discomfort_model = TrainedModel::deserialize(j.at("stage1").dump());
    m.eml_model = TrainedModel::deserialize(j.at("stage2").dump());
    for (const auto& [user, arr] : j.at("baseline").items()) {
        std::vector<double> means;
        means.reserve(arr.size());
        for (const auto& v : arr) means.push_back(v.is_null() ? kNaN : v.get<double>());
        m.baseline.means[user] = std::move(means);
    }
    return m;
}

// ---------------------------------------------------------------------------

StreamSession::StreamSession(const PipelineModel& model) : model_(model) {}

std::vector<StreamEmission> StreamSession::push(const SensorRow& row) {
    std::vector<StreamEmission> out;
    if (!have_key_) {
        key_ = row.key;
        have_key_ = true;
        t0_ms_ = row.t_ms;
    } else if (!(row.key == key_)) {
        throw std::runtime_error("stream carries more than one (user, trial) key");
    }
    if (row.t_ms < prev_t_ms_)
        throw std::runtime_error("stream timestamps must be non-decreasing");

    // A silence longer than the window suspends emissions until a full
    // window of fresh data accumulates.
    const double window = model_.config.window_size_s;
    if (max_t_ms_ != std::numeric_limits<int64_t>::min() &&
        static_cast<double>(row.t_ms - max_t_ms_) / 1000.0 > window) {
        resume_after_s_ = static_cast<double>(row.t_ms - t0_ms_) / 1000.0;
        pending_gap_ = true;
        StreamEmission gap;
        gap.t_s = static_cast<double>(row.t_ms - t0_ms_) / 1000.0;
        gap.gap = true;
        out.push_back(gap);
    }

    Stream& stream = buffer_.trials[key_][row.type];
    stream.type = row.type;
    stream.t_ms.push_back(row.t_ms);
    if (is_vector3(row.type)) {
        stream.x.push_back(row.x);
        stream.y.push_back(row.y);
        stream.z.push_back(row.z);
    } else {
        stream.v.push_back(row.v);
    }
    prev_t_ms_ = row.t_ms;
    max_t_ms_ = std::max(max_t_ms_, row.t_ms);

    auto emissions = drain(static_cast<double>(max_t_ms_ - t0_ms_) / 1000.0);
    out.insert(out.end(), emissions.begin(), emissions.end());
    prune();
    return out;
}

void StreamSession::prune() {
    // Motion and GSR buffers only need to reach back to the next window
    // start; the ECG buffer stays whole because the beat series and the
    // so-far HRV spectrum are anchored at the trial start.
    const int64_t cutoff =
        t0_ms_ + static_cast<int64_t>(std::llround(
                     static_cast<double>(next_emission_) * model_.config.step_size_s * 1000.0));
    for (auto& [key, streams] : buffer_.trials) {
        for (auto& [type, stream] : streams) {
            if (type == SensorType::ecg) continue;
            size_t stale = 0;
            while (stale < stream.t_ms.size() && stream.t_ms[stale] < cutoff) ++stale;
            if (stale < 4096) continue;
            stream.t_ms.erase(stream.t_ms.begin(), stream.t_ms.begin() + static_cast<ptrdiff_t>(stale));
            const auto drop = [&](std::vector<double>& v) {
                if (v.size() >= stale) v.erase(v.begin(), v.begin() + static_cast<ptrdiff_t>(stale));
            };
            drop(stream.x);
            drop(stream.y);
            drop(stream.z);
            drop(stream.v);
        }
    }
}

std::vector<StreamEmission> StreamSession::finish() {
    if (!have_key_) return {};
    // Mirror batch windowing: the trial covers its span plus one sample
    // period, so a window ending exactly at the end of data still emits.
    const double duration = buffer_.trial_duration_s(key_);
    return drain(duration + 1e-9 * std::max(1.0, duration));
}

std::vector<StreamEmission> StreamSession::drain(double up_to_s) {
    std::vector<StreamEmission> out;
    const double window = model_.config.window_size_s;
    const double step = model_.config.step_size_s;
    while (true) {
        const double t_emit = window + static_cast<double>(next_emission_) * step;
        if (t_emit > up_to_s) break;
        const double start = t_emit - window;
        if (start < resume_after_s_) {
            ++next_emission_;  // window overlaps the gap; skip this grid point
            continue;
        }
        out.push_back(emit_at(t_emit));
        ++next_emission_;
    }
    return out;
}

StreamEmission StreamSession::emit_at(double t_rel_s) {
    const double window = model_.config.window_size_s;
    Window w;
    w.key = key_;
    w.start_s = t_rel_s - window;
    w.end_s = t_rel_s;
    w.window_index = next_emission_;

    TrialContext ctx = build_trial_context(buffer_, key_, model_.config);
    ctx.t0_ms = t0_ms_;
    const FeatureVector raw = extract_window_features(w, buffer_, ctx, model_.config);
    const FeatureVector fv = normalize(mask_unbaselined(raw, model_.baseline), model_.baseline,
                                       model_.config.baseline_epsilon);

    StreamEmission e;
    e.t_s = t_rel_s;
    e.prediction = predict_window(model_, fv);
    return e;
}

}  // namespace eml
