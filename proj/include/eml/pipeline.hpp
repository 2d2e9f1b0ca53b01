#pragma once

// The two-stage model: a discomfort classifier whose predicted probability
// feeds the engagement classifier, for both batch and streaming prediction.

#include "eml/features.hpp"
#include "eml/ingest.hpp"
#include "eml/learners.hpp"
#include "eml/types.hpp"

namespace eml {

inline const std::string kDiscomfortFeature = "predicted_discomfort";

// Sensor-feature matrix from labeled windows, optionally restricted to a set
// of sensor groups. NaN marks absent features.
FeatureMatrix sensor_matrix(std::span<const LabeledWindow> dataset,
                            const std::vector<SensorGroup>* groups = nullptr);

struct PipelineModel {
    TrainedModel discomfort_model;  // sensor features -> discomfort
    TrainedModel eml_model;         // sensor features (+ predicted_discomfort) -> EML
    PipelineConfig config;
    BaselineProfile baseline;
    bool uses_discomfort = true;

    std::string serialize() const;
    static PipelineModel deserialize(const std::string& text);
};

// Stage 1 trains on sensor features against the discomfort class; its
// out-of-fold predicted probability (grouped by trial, to keep stage-1
// overfit out of stage 2) is appended as a feature for stage 2 against the
// EML class.
PipelineModel train_two_stage(std::span<const LabeledWindow> dataset, const PipelineConfig& cfg,
                              uint64_t seed, Exec exec = Exec::parallel,
                              const std::vector<SensorGroup>* groups = nullptr);

struct WindowPrediction {
    EmlClass eml = EmlClass::low;
    double p_eml = 0;
    DiscomfortClass discomfort = DiscomfortClass::normal;
    double p_disc = 0;
};

// Requires a baseline-normalized feature vector.
WindowPrediction predict_window(const PipelineModel& model, const FeatureVector& fv);

// ---------------------------------------------------------------------------
// Streaming
// ---------------------------------------------------------------------------

struct StreamEmission {
    double t_s = 0;
    bool gap = false;  // gap marker, no prediction attached
    WindowPrediction prediction;
};

// Replays sensors.csv-format rows for a single (user, trial) session and
// emits a prediction once window_size seconds have accumulated, then one
// every step_size seconds. Emissions use only samples with t <= emission
// time. A gap longer than the window suspends emissions until a full window
// re-accumulates and emits a gap marker.
class StreamSession {
public:
    explicit StreamSession(const PipelineModel& model);

    // Feed one sample (timestamps non-decreasing); returns 0+ emissions.
    std::vector<StreamEmission> push(const SensorRow& row);

    // End of stream: emissions whose window completed exactly at the end of
    // the data (mirrors batch windowing of the full trial).
    std::vector<StreamEmission> finish();

private:
    std::vector<StreamEmission> drain(double up_to_s);
    StreamEmission emit_at(double t_rel_s);
    void prune();

    const PipelineModel& model_;
    SensorTable buffer_;
    TrialKey key_;
    bool have_key_ = false;
    int64_t t0_ms_ = 0;
    int64_t max_t_ms_ = std::numeric_limits<int64_t>::min();
    int64_t prev_t_ms_ = std::numeric_limits<int64_t>::min();
    double resume_after_s_ = 0;  // windows must start at or after this point
    bool pending_gap_ = false;
    int next_emission_ = 0;
};

}  // namespace eml
