#pragma once

// Shared domain types: sensor streams keyed by (user, trial), questionnaire
// rows, windows, feature vectors and labeled datasets. Value objects only;
// everything is immutable-by-convention after construction and safe to share
// across threads.

#include <cmath>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace eml {

// Baseline (resting) sessions share the key type with excerpt trials and use
// reserved indices 101..104: 101/102 pre-session (eyes shut / eyes open),
// 103/104 post-session.
constexpr int kBaselineIndexFirst = 101;
constexpr int kBaselineIndexLast = 104;

struct TrialKey {
    std::string user_id;
    int trial_index = 0;

    auto operator<=>(const TrialKey&) const = default;
    bool is_baseline() const {
        return trial_index >= kBaselineIndexFirst && trial_index <= kBaselineIndexLast;
    }
    bool is_excerpt() const { return trial_index >= 1 && trial_index <= 29; }
    std::string str() const { return user_id + "/" + std::to_string(trial_index); }
};

enum class SensorType {
    imu_wrist,
    imu_elbow,
    gyr_wrist,
    gyr_elbow,
    gsr_shoulder,
    gsr_fingertips,
    gsr_axilla,
    ecg,
    resp,
};

constexpr SensorType kAllSensorTypes[] = {
    SensorType::imu_wrist,  SensorType::imu_elbow,     SensorType::gyr_wrist,
    SensorType::gyr_elbow,  SensorType::gsr_shoulder,  SensorType::gsr_fingertips,
    SensorType::gsr_axilla, SensorType::ecg,           SensorType::resp,
};

bool is_vector3(SensorType t);  // IMU_*/GYR_* carry (x,y,z); the rest are scalar
const std::string& to_string(SensorType t);
std::optional<SensorType> sensor_type_from_string(const std::string& s);

// One (key, sensor_type) time series; timestamps in milliseconds since
// session start, non-decreasing. Vector types fill x/y/z; scalar types fill v.
struct Stream {
    SensorType type = SensorType::ecg;
    std::vector<int64_t> t_ms;
    std::vector<double> x, y, z;  // 3-vector payload
    std::vector<double> v;        // scalar payload

    size_t size() const { return t_ms.size(); }
    bool empty() const { return t_ms.empty(); }

    // Index range [lo,hi) with t0_ms <= t < t1_ms.
    std::pair<size_t, size_t> range_ms(int64_t t0_ms, int64_t t1_ms) const;

    // Mean sampling rate inferred from the timestamps.
    double sample_rate_hz() const;

    bool operator==(const Stream&) const = default;
};

struct SensorTable {
    std::map<TrialKey, std::map<SensorType, Stream>> trials;

    std::vector<TrialKey> keys() const;
    const Stream* find(const TrialKey& key, SensorType type) const;
    bool empty() const { return trials.empty(); }

    // Trial duration in seconds: max over streams of span plus one mean
    // sample period, so a stream of n samples at rate fs spans n/fs.
    double trial_duration_s(const TrialKey& key) const;

    // Earliest timestamp across the trial's streams; windows anchor here.
    int64_t trial_start_ms(const TrialKey& key) const;

    bool operator==(const SensorTable&) const = default;
};

struct QuestionnaireRecord {
    TrialKey key;
    int tech_diff = 0;
    int emo_expr = 0;
    int feel_calm = 0;
    int feel_at_ease = 0;
    int feel_nervous = 0;
    int feel_uncomfortable = 0;
    std::optional<double> eml_score;  // filled by the labeling stage

    bool ratings_in_range() const;
    bool operator==(const QuestionnaireRecord&) const = default;
};

struct Window {
    TrialKey key;
    double start_s = 0;
    double end_s = 0;
    int window_index = 0;

    double size_s() const { return end_s - start_s; }
    bool operator==(const Window&) const = default;
};

// Per-window feature values in feature-registry order; NaN marks a feature
// whose source stream was absent in the window.
struct FeatureVector {
    Window window;
    std::vector<double> values;
    bool normalized = false;

    bool has(size_t i) const { return i < values.size() && !std::isnan(values[i]); }
};

enum class EmlClass { high, low };
enum class DiscomfortClass { normal, high };

const std::string& to_string(EmlClass c);
const std::string& to_string(DiscomfortClass c);

struct LabeledWindow {
    FeatureVector fv;
    EmlClass eml_class = EmlClass::low;
    DiscomfortClass discomfort_class = DiscomfortClass::normal;
    int fold = 0;

    const TrialKey& key() const { return fv.window.key; }
};

enum class SplitMode { grouped_kfold, leave_one_user_out };

struct PipelineConfig {
    double window_size_s = 30.0;
    double step_size_s = 15.0;
    int k_folds = 5;
    uint64_t rng_seed = 7;
    SplitMode split_mode = SplitMode::grouped_kfold;

    // HRV analysis
    double vlf_lo_hz = 0.0033, vlf_hi_hz = 0.04;
    double lf_hi_hz = 0.15;
    double hf_hi_hz = 0.4;
    double tachogram_fs_hz = 4.0;
    double welch_segment_s = 64.0;
    int sampen_m = 2;
    double sampen_r_factor = 0.2;

    // Movement smoothness
    double sparc_cutoff_hz = 20.0;
    double sparc_amp_thresh = 0.05;

    // GSR
    double gsr_smooth_hz = 1.0;
    double gsr_min_prominence_us = 0.01;

    // Baseline normalization
    double baseline_epsilon = 1e-8;

    // Movement-artifact screening (report-only unless strict)
    bool artifact_strict = false;
    double artifact_alpha = 0.05;
    double artifact_grid_hz = 4.0;

    // Labeling
    bool per_user_eml_split = false;

    // Two-stage model
    std::string stage1_kind = "max_margin";
    std::string stage2_kind = "gbt";
    bool use_discomfort_stage = true;
    int stage1_oof_folds = 5;

    // Evaluation
    int bootstrap_b = 10000;

    // Throws std::invalid_argument naming the violated constraint.
    void validate() const;
};

// --------------------------------------------------------------------------
// Dataset-level validation (report-only)
// --------------------------------------------------------------------------

struct ValidationIssue {
    TrialKey key;
    std::string what;
};

struct ValidationReport {
    bool ok = true;
    std::vector<ValidationIssue> issues;

    void add(const TrialKey& key, std::string what) {
        issues.push_back({key, std::move(what)});
        ok = false;
    }
};

// Flags trials missing sensors or questionnaire rows, non-monotone
// timestamps and out-of-range ratings. The dataset is usable only if every
// excerpt trial has at least one IMU stream and a questionnaire row.
ValidationReport validate_dataset(const SensorTable& sensors,
                                  std::span<const QuestionnaireRecord> qnr);

struct RawDataset {
    SensorTable sensors;
    std::vector<QuestionnaireRecord> questionnaire;
};

}  // namespace eml
