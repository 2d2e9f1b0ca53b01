#include "eml/types.hpp"

#include <algorithm>
#include <array>
#include <limits>

namespace eml {

bool is_vector3(SensorType t) {
    switch (t) {
        case SensorType::imu_wrist:
        case SensorType::imu_elbow:
        case SensorType::gyr_wrist:
        case SensorType::gyr_elbow:
            return true;
        default:
            return false;
    }
}

const std::string& to_string(SensorType t) {
    static const std::array<std::string, 9> names = {
        "IMU_wrist", "IMU_elbow",      "GYR_wrist",  "GYR_elbow", "GSR_shoulder",
        "GSR_fingertips", "GSR_axilla", "ECG",        "RESP",
    };
    return names[static_cast<size_t>(t)];
}

std::optional<SensorType> sensor_type_from_string(const std::string& s) {
    for (SensorType t : kAllSensorTypes)
        if (to_string(t) == s) return t;
    return std::nullopt;
}

const std::string& to_string(EmlClass c) {
    static const std::string high = "high", low = "low";
    return c == EmlClass::high ? high : low;
}

const std::string& to_string(DiscomfortClass c) {
    static const std::string normal = "normal", high = "high";
    return c == DiscomfortClass::high ? high : normal;
}

std::pair<size_t, size_t> Stream::range_ms(int64_t t0_ms, int64_t t1_ms) const {
    const auto lo = std::lower_bound(t_ms.begin(), t_ms.end(), t0_ms);
    const auto hi = std::lower_bound(lo, t_ms.end(), t1_ms);
    return {static_cast<size_t>(lo - t_ms.begin()), static_cast<size_t>(hi - t_ms.begin())};
}

double Stream::sample_rate_hz() const {
    if (t_ms.size() < 2) return 0.0;
    const double span_s = static_cast<double>(t_ms.back() - t_ms.front()) / 1000.0;
    if (span_s <= 0) return 0.0;
    return static_cast<double>(t_ms.size() - 1) / span_s;
}

std::vector<TrialKey> SensorTable::keys() const {
    std::vector<TrialKey> out;
    out.reserve(trials.size());
    for (const auto& [k, _] : trials) out.push_back(k);
    return out;
}

const Stream* SensorTable::find(const TrialKey& key, SensorType type) const {
    const auto it = trials.find(key);
    if (it == trials.end()) return nullptr;
    const auto jt = it->second.find(type);
    if (jt == it->second.end()) return nullptr;
    return &jt->second;
}

double SensorTable::trial_duration_s(const TrialKey& key) const {
    const auto it = trials.find(key);
    if (it == trials.end()) return 0.0;
    double best = 0.0;
    for (const auto& [_, stream] : it->second) {
        if (stream.t_ms.size() < 2) continue;
        const double span = static_cast<double>(stream.t_ms.back() - stream.t_ms.front()) / 1000.0;
        const double dt = span / static_cast<double>(stream.t_ms.size() - 1);
        best = std::max(best, span + dt);
    }
    return best;
}

int64_t SensorTable::trial_start_ms(const TrialKey& key) const {
    const auto it = trials.find(key);
    if (it == trials.end()) return 0;
    int64_t t0 = std::numeric_limits<int64_t>::max();
    for (const auto& [_, stream] : it->second)
        if (!stream.t_ms.empty()) t0 = std::min(t0, stream.t_ms.front());
    return t0 == std::numeric_limits<int64_t>::max() ? 0 : t0;
}

bool QuestionnaireRecord::ratings_in_range() const {
    for (int r : {tech_diff, emo_expr, feel_calm, feel_at_ease, feel_nervous, feel_uncomfortable})
        if (r < 1 || r > 10) return false;
    return true;
}

void PipelineConfig::validate() const {
    if (window_size_s <= 0) throw std::invalid_argument("window size must be positive");
    if (step_size_s <= 0) throw std::invalid_argument("step size must be positive");
    if (step_size_s > window_size_s) throw std::invalid_argument("step exceeds window");
    if (k_folds < 2) throw std::invalid_argument("k_folds must be at least 2");
    if (!(vlf_lo_hz < vlf_hi_hz && vlf_hi_hz < lf_hi_hz && lf_hi_hz < hf_hi_hz))
        throw std::invalid_argument("HRV bands must be contiguous and increasing");
    if (sampen_m < 1) throw std::invalid_argument("sample entropy embedding must be >= 1");
    if (stage1_oof_folds < 2) throw std::invalid_argument("stage-1 OOF folds must be >= 2");
}

ValidationReport validate_dataset(const SensorTable& sensors,
                                  std::span<const QuestionnaireRecord> qnr) {
    ValidationReport report;

    std::map<TrialKey, const QuestionnaireRecord*> by_key;
    for (const auto& rec : qnr) {
        if (by_key.contains(rec.key)) report.add(rec.key, "duplicate questionnaire row");
        by_key[rec.key] = &rec;
        if (!rec.ratings_in_range()) report.add(rec.key, "rating out of range");
        if (!rec.key.is_excerpt() && !rec.key.is_baseline())
            report.add(rec.key, "trial index outside excerpt range 1..29");
    }

    for (const auto& [key, streams] : sensors.trials) {
        for (const auto& [type, stream] : streams) {
            for (size_t i = 1; i < stream.t_ms.size(); ++i) {
                if (stream.t_ms[i] < stream.t_ms[i - 1]) {
                    report.add(key, "non-monotone timestamps in " + to_string(type));
                    break;
                }
            }
        }
        if (key.is_excerpt()) {
            const bool has_imu =
                streams.contains(SensorType::imu_wrist) || streams.contains(SensorType::imu_elbow);
            if (!has_imu) report.add(key, "missing IMU stream");
            if (!by_key.contains(key))
                report.add(key, "unlabeled trial " + std::to_string(key.trial_index));
        }
    }

    for (const auto& [key, _] : by_key) {
        if (key.is_excerpt() && !sensors.trials.contains(key))
            report.add(key, "questionnaire row without sensor data");
    }

    return report;
}

}  // namespace eml
