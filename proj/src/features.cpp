#include "eml/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "eml/numeric.hpp"
#include "eml/windowing.hpp"

namespace eml {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const char* kStatNames[7] = {"iqr", "kurt", "mean", "median", "rmssd", "skew", "var"};

struct Placement {
    SensorType type;
    const char* prefix;
    bool with_sparc;
    SensorGroup group;
    const char* unit;
};

const Placement kPlacements[4] = {
    {SensorType::imu_wrist, "imu_wrist", true, SensorGroup::imu, "m/s^2"},
    {SensorType::imu_elbow, "imu_elbow", true, SensorGroup::imu, "m/s^2"},
    {SensorType::gyr_wrist, "gyr_wrist", false, SensorGroup::gyr, "deg/s"},
    {SensorType::gyr_elbow, "gyr_elbow", false, SensorGroup::gyr, "deg/s"},
};

const char* kMotionSeries[8] = {"x", "y", "z", "mag", "jerk_x", "jerk_y", "jerk_z", "jerk_mag"};

struct GsrSite {
    SensorType type;
    const char* prefix;
};
const GsrSite kGsrSites[3] = {
    {SensorType::gsr_shoulder, "gsr_shoulder"},
    {SensorType::gsr_fingertips, "gsr_fingertips"},
    {SensorType::gsr_axilla, "gsr_axilla"},
};

std::string stat_unit(const std::string& stat, const std::string& base) {
    if (stat == "var") return base.empty() ? "" : base + "^2";
    if (stat == "skew" || stat == "kurt") return "";
    return base;
}

std::vector<FeatureDef> build_registry() {
    std::vector<FeatureDef> defs;
    for (const auto& p : kPlacements) {
        for (const char* series : kMotionSeries) {
            const bool is_jerk = std::string(series).starts_with("jerk");
            const std::string base = is_jerk ? std::string(p.unit) + "/s" : p.unit;
            for (const char* stat : kStatNames)
                defs.push_back({std::string(p.prefix) + "_" + series + "_" + stat, p.group,
                                stat_unit(stat, base)});
        }
        if (p.with_sparc) defs.push_back({std::string(p.prefix) + "_sparc", p.group, ""});
    }
    for (const auto& site : kGsrSites) {
        for (const char* stat : kStatNames)
            defs.push_back({std::string(site.prefix) + "_" + stat, SensorGroup::gsr,
                            stat_unit(stat, "uS")});
        defs.push_back({std::string(site.prefix) + "_num_peaks", SensorGroup::gsr, ""});
        defs.push_back({std::string(site.prefix) + "_amplitude_mean", SensorGroup::gsr, "uS"});
    }
    const char* hrv_ms[] = {"mean_nni", "median_nni", "sdnn", "rmssd", "nni_range", "sd1", "sd2"};
    for (const char* n : hrv_ms) defs.push_back({std::string("hrv_") + n, SensorGroup::hrv, "ms"});
    const char* hrv_unitless[] = {"nni_20", "pnni_20", "nni_50", "pnni_50", "sampen",
                                  "sd1_sd2_ratio", "lf_hf_ratio"};
    for (const char* n : hrv_unitless) defs.push_back({std::string("hrv_") + n, SensorGroup::hrv, ""});
    const char* hrv_power[] = {"vlf_power", "lf_power", "hf_power"};
    for (const char* n : hrv_power) defs.push_back({std::string("hrv_") + n, SensorGroup::hrv, "ms^2"});
    return defs;
}

const std::unordered_map<std::string, int>& index_map() {
    static const std::unordered_map<std::string, int> map = [] {
        std::unordered_map<std::string, int> m;
        const auto& defs = feature_registry();
        for (size_t i = 0; i < defs.size(); ++i) m[defs[i].name] = static_cast<int>(i);
        return m;
    }();
    return map;
}

}  // namespace

const std::string& to_string(SensorGroup g) {
    static const std::array<std::string, 4> names = {"IMU", "GYR", "GSR", "HRV"};
    return names[static_cast<size_t>(g)];
}

std::optional<SensorGroup> sensor_group_from_string(const std::string& s) {
    for (SensorGroup g : {SensorGroup::imu, SensorGroup::gyr, SensorGroup::gsr, SensorGroup::hrv})
        if (to_string(g) == s) return g;
    return std::nullopt;
}

const std::vector<FeatureDef>& feature_registry() {
    static const std::vector<FeatureDef> defs = build_registry();
    return defs;
}

size_t feature_count() { return feature_registry().size(); }

int feature_index(const std::string& name) {
    const auto& m = index_map();
    const auto it = m.find(name);
    return it == m.end() ? -1 : it->second;
}

std::vector<std::string> feature_names() {
    std::vector<std::string> names;
    names.reserve(feature_count());
    for (const auto& d : feature_registry()) names.push_back(d.name);
    return names;
}

std::string registry_csv() {
    std::ostringstream out;
    out << "feature_name,sensor_group,units\n";
    for (const auto& d : feature_registry())
        out << d.name << ',' << to_string(d.group) << ',' << d.units << '\n';
    return out.str();
}

// ---------------------------------------------------------------------------

std::vector<double> jerk(std::span<const double> values, std::span<const double> t_s) {
    if (values.size() != t_s.size()) throw std::invalid_argument("jerk: length mismatch");
    if (values.size() < 2) throw std::invalid_argument("jerk: need at least 2 samples");
    std::vector<double> out(values.size() - 1);
    for (size_t i = 1; i < values.size(); ++i) {
        const double dt = t_s[i] - t_s[i - 1];
        if (dt <= 0) throw std::invalid_argument("jerk: zero dt");
        out[i - 1] = (values[i] - values[i - 1]) / dt;
    }
    return out;
}

std::vector<double> magnitude(std::span<const double> x, std::span<const double> y,
                              std::span<const double> z) {
    if (x.size() != y.size() || x.size() != z.size())
        throw std::invalid_argument("magnitude: length mismatch");
    if (x.empty()) throw std::invalid_argument("magnitude: empty input");
    std::vector<double> out(x.size());
    for (size_t i = 0; i < x.size(); ++i)
        out[i] = std::sqrt(x[i] * x[i] + y[i] * y[i] + z[i] * z[i]);
    return out;
}

StatFeatures stat_features(std::span<const double> values) {
    if (values.size() < 4) throw std::invalid_argument("stat_features: need at least 4 samples");
    const size_t n = values.size();
    StatFeatures f{};
    f.mean = mean(values);
    double m2 = 0, m3 = 0, m4 = 0;
    for (double v : values) {
        const double d = v - f.mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= static_cast<double>(n);
    m3 /= static_cast<double>(n);
    m4 /= static_cast<double>(n);
    f.variance = m2;
    f.skewness = m2 > 0 ? m3 / std::pow(m2, 1.5) : 0.0;
    f.kurtosis = m2 > 0 ? m4 / (m2 * m2) - 3.0 : 0.0;

    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const auto q = [&](double p) {
        const double h = (static_cast<double>(n) - 1.0) * p;
        const size_t lo = static_cast<size_t>(h);
        if (lo + 1 >= n) return sorted.back();
        return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
    };
    f.median = q(0.5);
    f.iqr = q(0.75) - q(0.25);

    double ssd = 0;
    for (size_t i = 1; i < n; ++i) ssd += (values[i] - values[i - 1]) * (values[i] - values[i - 1]);
    f.rmssd = std::sqrt(ssd / static_cast<double>(n - 1));
    return f;
}

double sparc(std::span<const double> speed, double fs_hz, double cutoff_hz, double amp_thresh) {
    if (speed.size() < 16) throw std::invalid_argument("sparc: need at least 16 samples");
    if (!(fs_hz > 2.0 * cutoff_hz))
        throw std::invalid_argument("sparc: sample rate must exceed twice the cutoff");

    double peak = 0;
    for (double v : speed) peak = std::max(peak, std::fabs(v));
    if (peak == 0.0) throw std::runtime_error("degenerate profile");

    const size_t nfft = next_pow2(speed.size()) << 4;
    const auto mag = magnitude_spectrum(speed, nfft);
    if (mag[0] == 0.0) throw std::runtime_error("degenerate profile");

    std::vector<double> freq, amp;
    for (size_t k = 0; k < nfft / 2 + 1; ++k) {
        const double f = fs_hz * static_cast<double>(k) / static_cast<double>(nfft);
        if (f > cutoff_hz) break;
        freq.push_back(f);
        amp.push_back(mag[k] / mag[0]);
    }

    // Adaptive cutoff: last bin still above the amplitude threshold.
    size_t last = 0;
    for (size_t k = 0; k < amp.size(); ++k)
        if (amp[k] >= amp_thresh) last = k;

    const double f_range = freq[last] - freq[0];
    if (f_range <= 0) throw std::runtime_error("degenerate profile");
    double arc = 0;
    for (size_t k = 1; k <= last; ++k) {
        const double df = (freq[k] - freq[k - 1]) / f_range;
        const double da = amp[k] - amp[k - 1];
        arc += std::sqrt(df * df + da * da);
    }
    return -arc;
}

HrvTime hrv_time(const RRSeries& rr) {
    if (rr.n_intervals() < 4) throw std::invalid_argument("hrv_time: need at least 4 intervals");
    const auto& v = rr.rr_ms;
    HrvTime h{};
    h.mean_nni = mean(v);
    h.median_nni = quantile(v, 0.5);
    h.sdnn = stddev_pop(v);

    double ssd = 0;
    int n20 = 0, n50 = 0;
    for (size_t i = 1; i < v.size(); ++i) {
        const double d = v[i] - v[i - 1];
        ssd += d * d;
        if (std::fabs(d) > 20.0) ++n20;
        if (std::fabs(d) > 50.0) ++n50;
    }
    const double nd = static_cast<double>(v.size() - 1);
    h.rmssd = std::sqrt(ssd / nd);
    h.nni_20 = n20;
    h.pnni_20 = static_cast<double>(n20) / nd;
    h.nni_50 = n50;
    h.pnni_50 = static_cast<double>(n50) / nd;
    h.nni_range = *std::max_element(v.begin(), v.end()) - *std::min_element(v.begin(), v.end());
    return h;
}

HrvFreq hrv_freq(const RRSeries& rr, const HrvBands& bands, double grid_hz, double welch_segment_s) {
    if (rr.n_intervals() < 2) throw std::invalid_argument("hrv_freq: too few intervals");
    if (rr.span_s() < 60.0) throw std::invalid_argument("hrv_freq: RR span must cover >= 60 s");

    // Tachogram: interval value at the time of the completing beat.
    std::vector<double> t(rr.rr_ms.size()), y(rr.rr_ms.size());
    for (size_t i = 0; i < rr.rr_ms.size(); ++i) {
        t[i] = rr.t_beats[i + 1];
        y[i] = rr.rr_ms[i];
    }
    const double span = t.back() - t.front();
    const size_t n_grid = static_cast<size_t>(span * grid_hz) + 1;
    const auto grid = interp_linear(t, y, t.front(), 1.0 / grid_hz, n_grid);

    const auto psd = welch_psd(grid, grid_hz, static_cast<size_t>(welch_segment_s * grid_hz));
    HrvFreq out{};
    out.vlf_power = band_power(psd, bands.vlf_lo, bands.vlf_hi);
    out.lf_power = band_power(psd, bands.vlf_hi, bands.lf_hi);
    out.hf_power = band_power(psd, bands.lf_hi, bands.hf_hi);
    out.lf_hf_ratio = out.hf_power > 0 ? out.lf_power / out.hf_power : 0.0;
    return out;
}

HrvNonlinear hrv_nonlinear(const RRSeries& rr, int m, double r_factor) {
    const auto& v = rr.rr_ms;
    if (v.size() < 10) throw std::invalid_argument("hrv_nonlinear: need at least 10 intervals");
    if (m < 1) throw std::invalid_argument("hrv_nonlinear: embedding must be >= 1");

    HrvNonlinear out{};
    double ssd = 0;
    for (size_t i = 1; i < v.size(); ++i) ssd += (v[i] - v[i - 1]) * (v[i] - v[i - 1]);
    const double msd = ssd / static_cast<double>(v.size() - 1);  // rmssd^2
    const double var = variance_pop(v);
    out.sd1 = std::sqrt(msd / 2.0);
    out.sd2 = std::sqrt(std::max(0.0, 2.0 * var - msd / 2.0));
    out.sd1_sd2_ratio = out.sd2 > 0 ? out.sd1 / out.sd2 : 0.0;

    const double r = r_factor * stddev_pop(v);
    const size_t n = v.size();
    const size_t mt = static_cast<size_t>(m);
    if (n < mt + 2) throw std::runtime_error("entropy undefined");
    const size_t n_templates = n - mt;  // same template count at m and m+1
    uint64_t match_m = 0, match_m1 = 0;
    for (size_t i = 0; i < n_templates; ++i) {
        for (size_t j = i + 1; j < n_templates; ++j) {
            double dmax = 0;
            for (size_t k = 0; k < mt; ++k)
                dmax = std::max(dmax, std::fabs(v[i + k] - v[j + k]));
            if (dmax <= r) {
                ++match_m;
                if (std::fabs(v[i + mt] - v[j + mt]) <= r) ++match_m1;
            }
        }
    }
    if (match_m == 0 || match_m1 == 0) throw std::runtime_error("entropy undefined");
    out.sampen = -std::log(static_cast<double>(match_m1) / static_cast<double>(match_m));
    return out;
}

GsrStats gsr_features(std::span<const double> gsr, double fs_hz, double smooth_hz,
                      double min_prominence_us) {
    if (fs_hz <= 0) throw std::invalid_argument("gsr_features: fs must be positive");
    if (static_cast<double>(gsr.size()) < 5.0 * fs_hz)
        throw std::invalid_argument("gsr_features: need at least 5 s of signal");

    // Smooth around the first sample so the filter start-up does not
    // fabricate a rise.
    std::vector<double> smoothed;
    if (smooth_hz > 0 && fs_hz > 2.0 * smooth_hz) {
        std::vector<double> shifted(gsr.begin(), gsr.end());
        for (double& s : shifted) s -= gsr[0];
        smoothed = butterworth_lowpass(smooth_hz, fs_hz).process(shifted);
        for (double& s : smoothed) s += gsr[0];
    } else {
        smoothed.assign(gsr.begin(), gsr.end());
    }

    GsrStats out{};
    double onset = smoothed[0];
    bool rising = false;
    double amp_sum = 0;
    int peaks = 0;
    for (size_t i = 1; i < smoothed.size(); ++i) {
        if (smoothed[i] > smoothed[i - 1]) {
            if (!rising) {
                onset = smoothed[i - 1];
                rising = true;
            }
        } else if (smoothed[i] < smoothed[i - 1] && rising) {
            const double amp = smoothed[i - 1] - onset;
            if (amp >= min_prominence_us) {
                ++peaks;
                amp_sum += amp;
            }
            rising = false;
        }
    }
    out.num_peaks = peaks;
    out.amplitude_mean = peaks > 0 ? amp_sum / peaks : 0.0;
    out.variance = variance_pop(gsr);
    return out;
}

ArtifactResult artifact_screen(std::span<const double> gsr_t_s, std::span<const double> gsr_v,
                               std::span<const double> imu_t_s, std::span<const double> imu_mag,
                               double grid_hz, double alpha) {
    if (gsr_t_s.size() < 2 || imu_t_s.size() < 2)
        throw std::invalid_argument("artifact_screen: series too short");
    const double t0 = std::max(gsr_t_s.front(), imu_t_s.front());
    const double t1 = std::min(gsr_t_s.back(), imu_t_s.back());
    if (t1 <= t0) throw std::invalid_argument("artifact_screen: no time overlap");
    const size_t n = static_cast<size_t>((t1 - t0) * grid_hz) + 1;
    if (n < 30) throw std::invalid_argument("artifact_screen: need >= 30 common grid points");

    const auto g = interp_linear(gsr_t_s, gsr_v, t0, 1.0 / grid_hz, n);
    const auto m = interp_linear(imu_t_s, imu_mag, t0, 1.0 / grid_hz, n);

    ArtifactResult out;
    out.pearson_r = pearson(g, m);  // throws on zero variance
    const double df = static_cast<double>(n - 2);
    const double r2 = out.pearson_r * out.pearson_r;
    out.p_value = r2 >= 1.0 ? 0.0 : t_two_sided_p(out.pearson_r * std::sqrt(df / (1.0 - r2)), df);
    out.contaminated = out.p_value < alpha;
    return out;
}

// ---------------------------------------------------------------------------

namespace {

struct MotionSlice {
    std::vector<double> t_s, x, y, z;
};

// Copy the window's samples, collapsing duplicate timestamps (non-decreasing
// t is valid input; jerk needs strictly increasing).
MotionSlice slice_vec3(const Stream& s, int64_t t0_ms, double start_s, double end_s) {
    MotionSlice out;
    const auto [lo, hi] = s.range_ms(t0_ms + static_cast<int64_t>(std::llround(start_s * 1000.0)),
                                     t0_ms + static_cast<int64_t>(std::llround(end_s * 1000.0)));
    out.t_s.reserve(hi - lo);
    for (size_t i = lo; i < hi; ++i) {
        if (!out.t_s.empty() && static_cast<double>(s.t_ms[i]) / 1000.0 <= out.t_s.back()) continue;
        out.t_s.push_back(static_cast<double>(s.t_ms[i]) / 1000.0);
        out.x.push_back(s.x[i]);
        out.y.push_back(s.y[i]);
        out.z.push_back(s.z[i]);
    }
    return out;
}

std::vector<double> slice_scalar(const Stream& s, int64_t t0_ms, double start_s, double end_s,
                                 double* fs_out = nullptr) {
    const auto [lo, hi] = s.range_ms(t0_ms + static_cast<int64_t>(std::llround(start_s * 1000.0)),
                                     t0_ms + static_cast<int64_t>(std::llround(end_s * 1000.0)));
    std::vector<double> out(s.v.begin() + static_cast<ptrdiff_t>(lo),
                            s.v.begin() + static_cast<ptrdiff_t>(hi));
    if (fs_out) {
        *fs_out = 0;
        if (hi - lo >= 2) {
            const double span = static_cast<double>(s.t_ms[hi - 1] - s.t_ms[lo]) / 1000.0;
            if (span > 0) *fs_out = static_cast<double>(hi - lo - 1) / span;
        }
    }
    return out;
}

RRSeries slice_rr(const RRSeries& rr, double start_s, double end_s) {
    RRSeries out;
    out.key = rr.key;
    size_t lo = 0, hi = rr.t_beats.size();
    while (lo < hi && rr.t_beats[lo] < start_s) ++lo;
    while (hi > lo && rr.t_beats[hi - 1] >= end_s) --hi;
    for (size_t i = lo; i < hi; ++i) out.t_beats.push_back(rr.t_beats[i]);
    for (size_t i = lo; i + 1 < hi; ++i) out.rr_ms.push_back(rr.rr_ms[i]);
    return out;
}

// Beats available at the window end: either the external series cut there,
// or detection over the ECG samples up to that instant.
std::optional<RRSeries> beats_up_to(const SensorTable& sensors, const TrialContext& ctx,
                                    double end_rel_s) {
    const double t0_s = static_cast<double>(ctx.t0_ms) / 1000.0;
    if (ctx.external_rr) return slice_rr(*ctx.external_rr, t0_s, t0_s + end_rel_s);
    const Stream* ecg = sensors.find(ctx.key, SensorType::ecg);
    if (!ecg || ecg->size() < 2) return std::nullopt;
    const auto [lo, hi] = ecg->range_ms(
        ecg->t_ms.front(),
        ctx.t0_ms + static_cast<int64_t>(std::llround(end_rel_s * 1000.0)));
    if (hi - lo < 2) return std::nullopt;
    const double span_s = static_cast<double>(ecg->t_ms[hi - 1] - ecg->t_ms[lo]) / 1000.0;
    if (span_s <= 0) return std::nullopt;
    const double fs = static_cast<double>(hi - lo - 1) / span_s;
    try {
        RRSeries rr = detect_r_peaks(std::span<const double>(ecg->v).subspan(lo, hi - lo), fs);
        const double offset_s = static_cast<double>(ecg->t_ms[lo]) / 1000.0;
        for (double& t : rr.t_beats) t += offset_s;
        rr.key = ctx.key;
        return rr;
    } catch (const std::exception&) {
        return std::nullopt;  // not enough usable beats yet
    }
}

void set_feature(FeatureVector& fv, const std::string& name, double value) {
    const int idx = feature_index(name);
    if (idx < 0) throw std::logic_error("unregistered feature: " + name);
    fv.values[static_cast<size_t>(idx)] = value;
}

void set_stats(FeatureVector& fv, const std::string& prefix, const StatFeatures& s) {
    set_feature(fv, prefix + "_iqr", s.iqr);
    set_feature(fv, prefix + "_kurt", s.kurtosis);
    set_feature(fv, prefix + "_mean", s.mean);
    set_feature(fv, prefix + "_median", s.median);
    set_feature(fv, prefix + "_rmssd", s.rmssd);
    set_feature(fv, prefix + "_skew", s.skewness);
    set_feature(fv, prefix + "_var", s.variance);
}

HrvBands bands_from(const PipelineConfig& cfg) {
    return {cfg.vlf_lo_hz, cfg.vlf_hi_hz, cfg.lf_hi_hz, cfg.hf_hi_hz};
}

}  // namespace

TrialContext build_trial_context(const SensorTable& sensors, const TrialKey& key,
                                 const PipelineConfig& cfg,
                                 const std::map<TrialKey, RRSeries>* external_rr) {
    TrialContext ctx;
    ctx.key = key;

    ctx.t0_ms = sensors.trial_start_ms(key);
    if (external_rr) {
        const auto it = external_rr->find(key);
        if (it != external_rr->end()) ctx.external_rr = it->second;
    }
    return ctx;
}

FeatureVector extract_window_features(const Window& window, const SensorTable& sensors,
                                      const TrialContext& ctx, const PipelineConfig& cfg) {
    FeatureVector fv;
    fv.window = window;
    fv.values.assign(feature_count(), kNaN);
    const TrialKey& key = window.key;

    for (const auto& p : kPlacements) {
        const Stream* stream = sensors.find(key, p.type);
        if (!stream) continue;
        const MotionSlice s = slice_vec3(*stream, ctx.t0_ms, window.start_s, window.end_s);
        if (s.t_s.size() < 5) continue;

        const auto mag = magnitude(s.x, s.y, s.z);
        const auto jx = jerk(s.x, s.t_s);
        const auto jy = jerk(s.y, s.t_s);
        const auto jz = jerk(s.z, s.t_s);
        const auto jmag = magnitude(jx, jy, jz);

        const std::string prefix = p.prefix;
        set_stats(fv, prefix + "_x", stat_features(s.x));
        set_stats(fv, prefix + "_y", stat_features(s.y));
        set_stats(fv, prefix + "_z", stat_features(s.z));
        set_stats(fv, prefix + "_mag", stat_features(mag));
        set_stats(fv, prefix + "_jerk_x", stat_features(jx));
        set_stats(fv, prefix + "_jerk_y", stat_features(jy));
        set_stats(fv, prefix + "_jerk_z", stat_features(jz));
        set_stats(fv, prefix + "_jerk_mag", stat_features(jmag));

        if (p.with_sparc && mag.size() >= 16) {
            const double span = s.t_s.back() - s.t_s.front();
            const double fs = span > 0 ? static_cast<double>(s.t_s.size() - 1) / span : 0.0;
            // Keep the cutoff inside the Nyquist margin for low-rate streams.
            const double cutoff = std::min(cfg.sparc_cutoff_hz, 0.45 * fs);
            if (fs > 2.0 * cutoff && cutoff > 0) {
                try {
                    set_feature(fv, prefix + "_sparc", sparc(mag, fs, cutoff, cfg.sparc_amp_thresh));
                } catch (const std::exception&) {
                    // degenerate profile: leave absent
                }
            }
        }
    }

    for (size_t site = 0; site < 3; ++site) {
        if (cfg.artifact_strict && ctx.gsr_blocked[site]) continue;
        const Stream* stream = sensors.find(key, kGsrSites[site].type);
        if (!stream) continue;
        double fs = 0;
        const auto s = slice_scalar(*stream, ctx.t0_ms, window.start_s, window.end_s, &fs);
        if (s.size() < 4) continue;
        const std::string prefix = kGsrSites[site].prefix;
        set_stats(fv, prefix, stat_features(s));
        if (fs > 0 && static_cast<double>(s.size()) >= 5.0 * fs) {
            const GsrStats g = gsr_features(s, fs, cfg.gsr_smooth_hz, cfg.gsr_min_prominence_us);
            set_feature(fv, prefix + "_num_peaks", g.num_peaks);
            set_feature(fv, prefix + "_amplitude_mean", g.amplitude_mean);
            // variance from gsr_features equals the raw-window variance
            // already set by set_stats
        }
    }

    if (const auto so_far = beats_up_to(sensors, ctx, window.end_s)) {
        const double t0_s = static_cast<double>(ctx.t0_ms) / 1000.0;
        const RRSeries sub = slice_rr(*so_far, t0_s + window.start_s, t0_s + window.end_s);
        if (sub.n_intervals() >= 4) {
            const HrvTime t = hrv_time(sub);
            set_feature(fv, "hrv_mean_nni", t.mean_nni);
            set_feature(fv, "hrv_median_nni", t.median_nni);
            set_feature(fv, "hrv_sdnn", t.sdnn);
            set_feature(fv, "hrv_rmssd", t.rmssd);
            set_feature(fv, "hrv_nni_20", t.nni_20);
            set_feature(fv, "hrv_pnni_20", t.pnni_20);
            set_feature(fv, "hrv_nni_50", t.nni_50);
            set_feature(fv, "hrv_pnni_50", t.pnni_50);
            set_feature(fv, "hrv_nni_range", t.nni_range);
        }
        if (sub.n_intervals() >= 10) {
            try {
                const HrvNonlinear nl = hrv_nonlinear(sub, cfg.sampen_m, cfg.sampen_r_factor);
                set_feature(fv, "hrv_sampen", nl.sampen);
                set_feature(fv, "hrv_sd1", nl.sd1);
                set_feature(fv, "hrv_sd2", nl.sd2);
                set_feature(fv, "hrv_sd1_sd2_ratio", nl.sd1_sd2_ratio);
            } catch (const std::exception&) {
                // entropy undefined for this window
            }
        }
        // Windows are usually shorter than the spectral-resolution floor; in
        // that case attach the spectrum of the beats accumulated since the
        // trial start.
        std::optional<HrvFreq> freq;
        if (sub.span_s() >= 60.0)
            freq = hrv_freq(sub, bands_from(cfg), cfg.tachogram_fs_hz, cfg.welch_segment_s);
        else if (so_far->span_s() >= 60.0)
            freq = hrv_freq(*so_far, bands_from(cfg), cfg.tachogram_fs_hz, cfg.welch_segment_s);
        if (freq) {
            set_feature(fv, "hrv_vlf_power", freq->vlf_power);
            set_feature(fv, "hrv_lf_power", freq->lf_power);
            set_feature(fv, "hrv_hf_power", freq->hf_power);
            set_feature(fv, "hrv_lf_hf_ratio", freq->lf_hf_ratio);
        }
    }
    return fv;
}

FeatureVector extract_window_features(const Window& window, const SensorTable& sensors,
                                      const PipelineConfig& cfg) {
    const TrialContext ctx = build_trial_context(sensors, window.key, cfg);
    return extract_window_features(window, sensors, ctx, cfg);
}

// ---------------------------------------------------------------------------

namespace {

struct TrialOutput {
    std::vector<FeatureVector> windows;
    std::vector<ArtifactReport> artifacts;
    std::string error;
};

TrialOutput process_trial(const SensorTable& sensors, const TrialKey& key,
                          const PipelineConfig& cfg,
                          const std::map<TrialKey, RRSeries>* external_rr) {
    TrialOutput out;
    TrialContext ctx = build_trial_context(sensors, key, cfg, external_rr);

    // Movement-artifact screening: each GSR site against the wrist IMU
    // magnitude across the whole trial. Report-only unless strict mode.
    const Stream* imu = sensors.find(key, SensorType::imu_wrist);
    if (imu && imu->size() >= 2) {
        std::vector<double> imu_t(imu->size());
        for (size_t i = 0; i < imu->size(); ++i)
            imu_t[i] = static_cast<double>(imu->t_ms[i]) / 1000.0;
        const auto imu_mag = magnitude(imu->x, imu->y, imu->z);
        for (size_t site = 0; site < 3; ++site) {
            const Stream* g = sensors.find(key, kGsrSites[site].type);
            if (!g || g->size() < 2) continue;
            std::vector<double> gsr_t(g->size());
            for (size_t i = 0; i < g->size(); ++i)
                gsr_t[i] = static_cast<double>(g->t_ms[i]) / 1000.0;
            try {
                const ArtifactResult r = artifact_screen(gsr_t, g->v, imu_t, imu_mag,
                                                         cfg.artifact_grid_hz, cfg.artifact_alpha);
                out.artifacts.push_back({key, kGsrSites[site].type, r.pearson_r, r.p_value,
                                         r.contaminated});
                if (r.contaminated) ctx.gsr_blocked[site] = true;
            } catch (const std::exception&) {
                // too short or degenerate for the test; nothing to report
            }
        }
    }

    const double duration = sensors.trial_duration_s(key);
    for (const Window& w : partition(key, duration, cfg.window_size_s, cfg.step_size_s))
        out.windows.push_back(extract_window_features(w, sensors, ctx, cfg));
    return out;
}

std::vector<TrialOutput> process_trials(const SensorTable& sensors,
                                        std::span<const TrialKey> keys, const PipelineConfig& cfg,
                                        Exec exec,
                                        const std::map<TrialKey, RRSeries>* external_rr) {
    std::vector<TrialOutput> slots(keys.size());
    const int n = static_cast<int>(keys.size());
    if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
        for (int i = 0; i < n; ++i) {
            try {
                slots[static_cast<size_t>(i)] =
                    process_trial(sensors, keys[static_cast<size_t>(i)], cfg, external_rr);
            } catch (const std::exception& e) {
                slots[static_cast<size_t>(i)].error = e.what();
            }
        }
    } else {
        for (int i = 0; i < n; ++i) {
            try {
                slots[static_cast<size_t>(i)] =
                    process_trial(sensors, keys[static_cast<size_t>(i)], cfg, external_rr);
            } catch (const std::exception& e) {
                slots[static_cast<size_t>(i)].error = e.what();
            }
        }
    }
    for (size_t i = 0; i < slots.size(); ++i)
        if (!slots[i].error.empty())
            throw std::runtime_error("trial " + keys[i].str() + ": " + slots[i].error);
    return slots;
}

}  // namespace

BaselineProfile build_baseline(const SensorTable& sensors, const PipelineConfig& cfg, Exec exec) {
    std::map<std::string, std::vector<TrialKey>> baseline_keys;
    std::map<std::string, bool> seen_user;
    for (const auto& [key, _] : sensors.trials) {
        seen_user[key.user_id] = true;
        if (key.is_baseline()) baseline_keys[key.user_id].push_back(key);
    }
    for (const auto& [user, _] : seen_user)
        if (!baseline_keys.contains(user))
            throw std::runtime_error("user without baseline session: " + user);

    std::vector<TrialKey> keys;
    for (const auto& [_, ks] : baseline_keys) keys.insert(keys.end(), ks.begin(), ks.end());
    const auto slots = process_trials(sensors, keys, cfg, exec, nullptr);

    BaselineProfile profile;
    std::map<std::string, std::vector<double>> sums;
    std::map<std::string, std::vector<size_t>> counts;
    for (const auto& slot : slots) {
        for (const auto& fv : slot.windows) {
            const auto& user = fv.window.key.user_id;
            auto& sum = sums[user];
            auto& cnt = counts[user];
            if (sum.empty()) {
                sum.assign(feature_count(), 0.0);
                cnt.assign(feature_count(), 0);
            }
            for (size_t i = 0; i < fv.values.size(); ++i) {
                if (std::isnan(fv.values[i])) continue;
                sum[i] += fv.values[i];
                ++cnt[i];
            }
        }
    }
    for (const auto& [user, sum] : sums) {
        std::vector<double> means(feature_count(), kNaN);
        const auto& cnt = counts[user];
        for (size_t i = 0; i < means.size(); ++i) {
            if (cnt[i] == 0) continue;
            means[i] = sum[i] / static_cast<double>(cnt[i]);
            if (std::fabs(means[i]) <= cfg.baseline_epsilon)
                profile.warnings.push_back("near-zero baseline mean for " + user + "/" +
                                           feature_registry()[i].name);
        }
        profile.means[user] = std::move(means);
    }
    for (const auto& [user, ks] : baseline_keys) {
        if (!profile.means.contains(user))
            throw std::runtime_error("user without usable baseline windows: " + user);
    }
    return profile;
}

FeatureVector normalize(const FeatureVector& fv, const BaselineProfile& profile, double epsilon) {
    const auto it = profile.means.find(fv.window.key.user_id);
    if (it == profile.means.end())
        throw std::runtime_error("baseline profile does not cover user " + fv.window.key.user_id);
    const auto& means = it->second;

    FeatureVector out = fv;
    for (size_t i = 0; i < out.values.size(); ++i) {
        if (std::isnan(out.values[i])) continue;
        const double m = means[i];
        if (std::isnan(m))
            throw std::runtime_error("missing baseline mean for feature " +
                                     feature_registry()[i].name + " of user " +
                                     fv.window.key.user_id);
        double denom = std::fabs(m) > epsilon ? m : m + epsilon;
        if (denom == 0.0) denom = epsilon;
        out.values[i] /= denom;
        if (!std::isfinite(out.values[i]))
            throw std::runtime_error("normalization produced a non-finite value for " +
                                     feature_registry()[i].name);
    }
    out.normalized = true;
    return out;
}

FeatureVector mask_unbaselined(FeatureVector fv, const BaselineProfile& profile) {
    const auto it = profile.means.find(fv.window.key.user_id);
    if (it == profile.means.end())
        throw std::runtime_error("baseline profile does not cover user " + fv.window.key.user_id);
    for (size_t i = 0; i < fv.values.size() && i < it->second.size(); ++i)
        if (std::isnan(it->second[i])) fv.values[i] = kNaN;
    return fv;
}

FeaturizeResult featurize_all(const SensorTable& sensors, const PipelineConfig& cfg, Exec exec,
                              const std::map<TrialKey, RRSeries>* external_rr) {
    cfg.validate();
    FeaturizeResult result;
    result.baseline = build_baseline(sensors, cfg, exec);

    std::vector<TrialKey> keys;
    for (const auto& [key, _] : sensors.trials)
        if (!key.is_baseline()) keys.push_back(key);

    const auto slots = process_trials(sensors, keys, cfg, exec, external_rr);

    // Features with no baseline coverage cannot be normalized; mask them and
    // note it once per (user, feature).
    std::map<std::pair<std::string, size_t>, bool> noted;
    for (const auto& slot : slots) {
        for (const auto& fv : slot.windows) {
            const auto& means = result.baseline.means.at(fv.window.key.user_id);
            for (size_t i = 0; i < fv.values.size(); ++i) {
                if (std::isnan(fv.values[i]) || !std::isnan(means[i])) continue;
                if (!noted.contains({fv.window.key.user_id, i})) {
                    noted[{fv.window.key.user_id, i}] = true;
                    result.warnings.push_back("feature " + feature_registry()[i].name +
                                              " lacks baseline coverage for user " +
                                              fv.window.key.user_id + "; marked absent");
                }
            }
            result.windows.push_back(normalize(mask_unbaselined(fv, result.baseline),
                                               result.baseline, cfg.baseline_epsilon));
        }
        result.artifacts.insert(result.artifacts.end(), slot.artifacts.begin(),
                                slot.artifacts.end());
    }
    result.warnings.insert(result.warnings.end(), result.baseline.warnings.begin(),
                           result.baseline.warnings.end());
    return result;
}

}  // namespace eml
