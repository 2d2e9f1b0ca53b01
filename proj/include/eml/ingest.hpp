#pragma once

// File parsing into domain types, plus RR-interval derivation from raw ECG.
//
// Interchange schemas (decimal ASCII, UTF-8, LF):
//   sensors.csv        user_id,trial_index,t_ms,sensor_type,x,y,z,value
//                      3-vector rows fill x,y,z and leave value empty;
//                      scalar rows fill value and leave x,y,z empty.
//   questionnaire.csv  user_id,trial_index,tech_diff,emo_expr,feel_calm,
//                      feel_at_ease,feel_nervous,feel_uncomfortable

#include "eml/types.hpp"

namespace eml {

// Inter-beat intervals derived from one trial's ECG. t_beats are in seconds
// relative to trial start; rr_ms[i] == (t_beats[i+1] - t_beats[i]) * 1000.
struct RRSeries {
    TrialKey key;
    std::vector<double> rr_ms;
    std::vector<double> t_beats;
    std::vector<double> dropped_ms;  // implausible intervals excluded during cleaning

    size_t n_intervals() const { return rr_ms.size(); }
    double span_s() const {
        return t_beats.size() < 2 ? 0.0 : t_beats.back() - t_beats.front();
    }
};

SensorTable parse_sensor_file(const std::string& path);
std::vector<QuestionnaireRecord> parse_questionnaire_file(const std::string& path);

// Optional pre-computed beat times (many HRV devices emit RR directly),
// bypassing ECG detection for the trials present in the file.
//   rr.csv  header `user_id,trial_index,t_beat_ms`, one beat per row
std::map<TrialKey, RRSeries> parse_rr_file(const std::string& path);

// Parse one sensors.csv data row (no header). Used by both the file parser
// and the line-oriented streaming front end.
struct SensorRow {
    TrialKey key;
    int64_t t_ms = 0;
    SensorType type = SensorType::ecg;
    double x = 0, y = 0, z = 0, v = 0;
};
SensorRow parse_sensor_row(const std::string& line, size_t line_no);

std::string write_sensor_csv(const SensorTable& table);
std::string write_questionnaire_csv(std::span<const QuestionnaireRecord> qnr);

// R-peak detection on a uniformly sampled ECG: 5-15 Hz band-pass (two
// Butterworth sections), squaring, and local maxima above an adaptive
// threshold of 0.5x the rolling 2 s maximum. Beats closer than 300 ms to the
// previous accepted beat are suppressed; intervals above 2000 ms split the
// beat sequence and the longest clean run is kept. Everything excluded is
// reported through RRSeries::dropped_ms.
RRSeries detect_r_peaks(std::span<const double> ecg, double fs_hz);

// Convenience: run detect_r_peaks on the trial's ECG stream, with beat times
// shifted by the stream's start offset.
RRSeries rr_from_table(const SensorTable& table, const TrialKey& key);

}  // namespace eml
