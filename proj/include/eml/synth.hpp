#pragma once

// Synthetic multi-sensor datasets with planted ground truth: the
// verification oracle for the whole pipeline. High-engagement trials get
// elevated motion volatility, a HF-shifted heart-rate modulation and busier
// electrodermal activity; high-discomfort trials get elevated gyroscope
// variance (spread across axes), an engagement-like motion confound and
// discomfort ratings of 9-10. Questionnaire items follow a single-factor
// model with configurable loadings.

#include "eml/types.hpp"
#include "eml/features.hpp"  // Exec

namespace eml {

struct SynthConfig {
    int n_users = 9;
    int n_trials_per_user = 29;  // excerpt trials use indices 1..29
    double trial_duration_s = 90.0;
    double trial_duration_jitter_s = 8.0;
    double baseline_pre_s = 120.0;   // sessions 101, 102
    double baseline_post_s = 60.0;   // sessions 103, 104

    double imu_hz = 50.0;
    double gyr_hz = 50.0;
    double gsr_hz = 8.0;
    double ecg_hz = 128.0;
    double resp_hz = 8.0;

    // Effect strengths (0 disables the corresponding planted signal).
    double eml_motion_volatility = 1.5;   // IMU noise scale-up on aroused trials
    double discomfort_gyr_variance = 3.0; // mean per-axis tremor variance on discomfort,
                                          // in units of the base GYR noise variance
    double hrv_hf_shift = 1.0;            // HF modulation boost on aroused trials

    double discomfort_rate = 0.12;
    double eml_low_given_discomfort = 1.0;
    double gsr_eml_boost = 0.4;  // SCR event-rate lift on high-EML trials

    double qnr_loading_calm = 0.97;
    double qnr_loading_ease = 0.93;
    double qnr_loading_nervous = 0.78;
    double qnr_scale = 2.0;

    double imu_noise = 0.5;   // m/s^2
    double gyr_noise = 6.0;   // deg/s
    double gyr_jitter = 0.35; // log-sd of per-axis trial-to-trial variance jitter
    double gsr_noise = 0.01;  // uS
    double ecg_noise = 0.04;  // mV
    double base_bpm = 75.0;

    uint64_t seed = 7;

    void validate() const;
};

struct GroundTruth {
    TrialKey key;
    bool eml_high = false;
    bool discomfort_high = false;
};

struct SynthDataset {
    SensorTable sensors;
    std::vector<QuestionnaireRecord> questionnaire;
    std::vector<GroundTruth> ground_truth;
};

// Deterministic in the seed, independent of the execution policy (per-trial
// derived seeds).
SynthDataset generate(const SynthConfig& cfg, Exec exec = Exec::parallel);

std::string write_ground_truth_csv(std::span<const GroundTruth> gt);

// Writes sensors.csv, questionnaire.csv and ground_truth.csv into dir.
void write_dataset(const SynthDataset& ds, const std::string& dir);

}  // namespace eml
