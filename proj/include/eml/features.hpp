#pragma once

// Per-window feature suite: motion statistics over magnitude/jerk series,
// SPARC smoothness, GSR peak statistics, HRV time/frequency/nonlinear
// measures, baseline normalization and movement-artifact screening.
//
// Every feature has a globally unique name and belongs to exactly one sensor
// group; the registry fixes the deterministic feature order used by
// FeatureVector::values.

#include <array>
#include <optional>

#include "eml/ingest.hpp"
#include "eml/types.hpp"

namespace eml {

enum class SensorGroup { imu, gyr, gsr, hrv };
const std::string& to_string(SensorGroup g);
std::optional<SensorGroup> sensor_group_from_string(const std::string& s);

struct FeatureDef {
    std::string name;
    SensorGroup group;
    std::string units;
};

const std::vector<FeatureDef>& feature_registry();
size_t feature_count();
int feature_index(const std::string& name);  // -1 if unknown
std::vector<std::string> feature_names();

// `feature_name,sensor_group,units` in registry order.
std::string registry_csv();

// Execution policy for the data-parallel drivers. Serial is the reference
// path; parallel uses OpenMP and must produce identical results.
enum class Exec { serial, parallel };

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

// First finite difference scaled by the timestamp gap (output in units/s).
std::vector<double> jerk(std::span<const double> values, std::span<const double> t_s);

// Elementwise Euclidean norm of a 3-axis series.
std::vector<double> magnitude(std::span<const double> x, std::span<const double> y,
                              std::span<const double> z);

struct StatFeatures {
    double iqr, kurtosis, mean, median, rmssd, skewness, variance;
};
// Population moments; kurtosis is excess kurtosis; iqr uses
// linear-interpolation quantiles; rmssd is the RMS of successive differences.
StatFeatures stat_features(std::span<const double> values);

// Spectral arc length of the speed profile's magnitude spectrum, normalized
// to its DC value and truncated at an adaptive amplitude cutoff. More
// negative means less smooth.
double sparc(std::span<const double> speed, double fs_hz, double cutoff_hz = 20.0,
             double amp_thresh = 0.05);

struct HrvTime {
    double mean_nni, median_nni, sdnn, rmssd;
    double nni_20, pnni_20, nni_50, pnni_50, nni_range;
};
HrvTime hrv_time(const RRSeries& rr);

// Contiguous spectral bands: VLF [vlf_lo, vlf_hi), LF [vlf_hi, lf_hi),
// HF [lf_hi, hf_hi).
struct HrvBands {
    double vlf_lo = 0.0033;
    double vlf_hi = 0.04;
    double lf_hi = 0.15;
    double hf_hi = 0.4;
};

struct HrvFreq {
    double vlf_power, lf_power, hf_power, lf_hf_ratio;
};
// RR tachogram linearly resampled to a uniform grid, Welch PSD (Hann taper,
// 50% overlap, mean-detrended segments), band powers by trapezoid.
HrvFreq hrv_freq(const RRSeries& rr, const HrvBands& bands = {}, double grid_hz = 4.0,
                 double welch_segment_s = 64.0);

struct HrvNonlinear {
    double sampen, sd1, sd2, sd1_sd2_ratio;
};
// Sample entropy with embedding m and tolerance r_factor * std(rr);
// Poincare widths from successive-difference energy, so sd1 equals
// rmssd/sqrt(2) identically.
HrvNonlinear hrv_nonlinear(const RRSeries& rr, int m = 2, double r_factor = 0.2);

struct GsrStats {
    double num_peaks, amplitude_mean, variance;
};
// Peaks are rises of at least min_prominence_us above their onset after
// low-pass smoothing; variance is over the raw window.
GsrStats gsr_features(std::span<const double> gsr, double fs_hz, double smooth_hz = 1.0,
                      double min_prominence_us = 0.01);

struct ArtifactResult {
    double pearson_r = 0;
    double p_value = 1;
    bool contaminated = false;
};
// Pearson test between a GSR series and an IMU magnitude series after
// resampling both onto a common uniform grid over their time overlap.
ArtifactResult artifact_screen(std::span<const double> gsr_t_s, std::span<const double> gsr_v,
                               std::span<const double> imu_t_s, std::span<const double> imu_mag,
                               double grid_hz = 4.0, double alpha = 0.05);

// ---------------------------------------------------------------------------
// Window extraction
// ---------------------------------------------------------------------------

// Per-trial cache shared by all windows of one trial: the trial start anchor
// (window starts are relative to it) and an optional externally supplied
// beat series that replaces ECG-derived detection.
//
// Everything HRV is causal per window: beats come from the ECG samples up to
// the window end (re-detected per window), and windows too short for a
// spectrum of their own attach the spectrum of the beats accumulated since
// the trial start. Batch extraction therefore never looks past what a live
// stream would have seen at emission time.
struct TrialContext {
    TrialKey key;
    int64_t t0_ms = 0;
    std::optional<RRSeries> external_rr;
    std::array<bool, 3> gsr_blocked = {false, false, false};  // strict-mode artifact drops
};

TrialContext build_trial_context(const SensorTable& sensors, const TrialKey& key,
                                 const PipelineConfig& cfg,
                                 const std::map<TrialKey, RRSeries>* external_rr = nullptr);

FeatureVector extract_window_features(const Window& window, const SensorTable& sensors,
                                      const TrialContext& ctx, const PipelineConfig& cfg);

// Convenience overload that builds the trial context itself.
FeatureVector extract_window_features(const Window& window, const SensorTable& sensors,
                                      const PipelineConfig& cfg);

// ---------------------------------------------------------------------------
// Baseline normalization
// ---------------------------------------------------------------------------

struct BaselineProfile {
    // user_id -> per-feature mean over that user's baseline windows,
    // registry-ordered; NaN where no baseline window provided the feature.
    std::map<std::string, std::vector<double>> means;
    std::vector<std::string> warnings;

    bool covers(const std::string& user_id) const { return means.contains(user_id); }
};

// Mean of every feature over all baseline-session windows, per user.
// Throws if a user present in the table has no baseline session.
BaselineProfile build_baseline(const SensorTable& sensors, const PipelineConfig& cfg,
                               Exec exec = Exec::parallel);

// Divide each present feature by its per-user baseline mean; near-zero means
// are shifted by epsilon so results stay finite.
FeatureVector normalize(const FeatureVector& fv, const BaselineProfile& profile,
                        double epsilon = 1e-8);

// Mark features absent when the user's baseline never provided them (they
// cannot be normalized). Applied by featurize_all and by the streaming
// front end so both paths see identical vectors.
FeatureVector mask_unbaselined(FeatureVector fv, const BaselineProfile& profile);

// ---------------------------------------------------------------------------
// Whole-dataset driver
// ---------------------------------------------------------------------------

struct ArtifactReport {
    TrialKey key;
    SensorType site;
    double pearson_r;
    double p_value;
    bool contaminated;
};

struct FeaturizeResult {
    std::vector<FeatureVector> windows;  // excerpt trials only, normalized
    BaselineProfile baseline;
    std::vector<ArtifactReport> artifacts;
    std::vector<std::string> warnings;
};

// Baseline profile, per-trial artifact screening, window extraction and
// normalization for the whole table. Deterministic: output order and values
// do not depend on the execution policy.
FeaturizeResult featurize_all(const SensorTable& sensors, const PipelineConfig& cfg,
                              Exec exec = Exec::parallel,
                              const std::map<TrialKey, RRSeries>* external_rr = nullptr);

}  // namespace eml
