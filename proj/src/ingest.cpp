#include "eml/ingest.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "eml/csv.hpp"
#include "eml/numeric.hpp"

namespace eml {

namespace {

constexpr const char* kSensorHeader = "user_id,trial_index,t_ms,sensor_type,x,y,z,value";
constexpr const char* kQnrHeader =
    "user_id,trial_index,tech_diff,emo_expr,feel_calm,feel_at_ease,feel_nervous,feel_uncomfortable";

[[noreturn]] void fail_line(size_t line_no, const std::string& what) {
    throw std::runtime_error("line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

SensorRow parse_sensor_row(const std::string& line, size_t line_no) {
    const auto cols = csv::split(line);
    if (cols.size() != 8) fail_line(line_no, "expected 8 columns, got " + std::to_string(cols.size()));

    SensorRow row;
    row.key.user_id = cols[0];
    if (row.key.user_id.empty()) fail_line(line_no, "empty user_id");

    const auto trial = csv::parse_int(cols[1]);
    if (!trial) fail_line(line_no, "malformed trial_index '" + cols[1] + "'");
    row.key.trial_index = static_cast<int>(*trial);

    const auto t = csv::parse_int(cols[2]);
    if (!t) fail_line(line_no, "malformed t_ms '" + cols[2] + "'");
    row.t_ms = *t;

    const auto type = sensor_type_from_string(cols[3]);
    if (!type) fail_line(line_no, "unknown sensor_type '" + cols[3] + "'");
    row.type = *type;

    if (is_vector3(row.type)) {
        const auto x = csv::parse_double(cols[4]);
        const auto y = csv::parse_double(cols[5]);
        const auto z = csv::parse_double(cols[6]);
        if (!x || !y || !z) fail_line(line_no, "3-vector sensor requires x,y,z");
        if (!cols[7].empty()) fail_line(line_no, "3-vector sensor must leave value empty");
        row.x = *x;
        row.y = *y;
        row.z = *z;
    } else {
        const auto v = csv::parse_double(cols[7]);
        if (!v) fail_line(line_no, "scalar sensor requires value");
        if (!cols[4].empty() || !cols[5].empty() || !cols[6].empty())
            fail_line(line_no, "scalar sensor must leave x,y,z empty");
        row.v = *v;
    }
    return row;
}

SensorTable parse_sensor_file(const std::string& path) {
    const auto lines = csv::read_lines(path);
    if (lines.empty()) throw std::runtime_error(path + ": empty file");
    if (lines[0] != kSensorHeader)
        throw std::runtime_error(path + ": bad header, expected '" + kSensorHeader + "'");

    SensorTable table;
    for (size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const SensorRow row = parse_sensor_row(lines[i], i + 1);
        Stream& stream = table.trials[row.key][row.type];
        stream.type = row.type;
        stream.t_ms.push_back(row.t_ms);
        if (is_vector3(row.type)) {
            stream.x.push_back(row.x);
            stream.y.push_back(row.y);
            stream.z.push_back(row.z);
        } else {
            stream.v.push_back(row.v);
        }
    }

    // Sort each stream by timestamp; parsing is order-insensitive.
    for (auto& [key, streams] : table.trials) {
        for (auto& [type, stream] : streams) {
            const size_t n = stream.size();
            std::vector<size_t> order(n);
            std::iota(order.begin(), order.end(), size_t{0});
            std::stable_sort(order.begin(), order.end(),
                             [&](size_t a, size_t b) { return stream.t_ms[a] < stream.t_ms[b]; });
            Stream sorted;
            sorted.type = stream.type;
            sorted.t_ms.reserve(n);
            for (size_t idx : order) {
                sorted.t_ms.push_back(stream.t_ms[idx]);
                if (is_vector3(type)) {
                    sorted.x.push_back(stream.x[idx]);
                    sorted.y.push_back(stream.y[idx]);
                    sorted.z.push_back(stream.z[idx]);
                } else {
                    sorted.v.push_back(stream.v[idx]);
                }
            }
            stream = std::move(sorted);
        }
    }
    return table;
}

std::vector<QuestionnaireRecord> parse_questionnaire_file(const std::string& path) {
    const auto lines = csv::read_lines(path);
    if (lines.empty()) throw std::runtime_error(path + ": empty file");

    const auto header = csv::split(lines[0]);
    const auto expected = csv::split(kQnrHeader);
    for (const auto& col : expected) {
        if (std::find(header.begin(), header.end(), col) == header.end())
            throw std::runtime_error(path + ": missing column '" + col + "'");
    }
    std::vector<size_t> pos;
    for (const auto& col : expected)
        pos.push_back(static_cast<size_t>(
            std::find(header.begin(), header.end(), col) - header.begin()));

    std::vector<QuestionnaireRecord> out;
    std::map<TrialKey, size_t> seen;
    for (size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto cols = csv::split(lines[i]);
        if (cols.size() < header.size()) fail_line(i + 1, "too few columns");

        QuestionnaireRecord rec;
        rec.key.user_id = cols[pos[0]];
        const auto trial = csv::parse_int(cols[pos[1]]);
        if (!trial) fail_line(i + 1, "malformed trial_index");
        rec.key.trial_index = static_cast<int>(*trial);

        int* fields[6] = {&rec.tech_diff,    &rec.emo_expr,     &rec.feel_calm,
                          &rec.feel_at_ease, &rec.feel_nervous, &rec.feel_uncomfortable};
        for (size_t f = 0; f < 6; ++f) {
            const auto v = csv::parse_int(cols[pos[2 + f]]);
            if (!v) fail_line(i + 1, "malformed rating in column '" + expected[2 + f] + "'");
            *fields[f] = static_cast<int>(*v);
        }
        if (!rec.ratings_in_range()) fail_line(i + 1, "rating out of range 1..10");

        if (const auto it = seen.find(rec.key); it != seen.end())
            fail_line(i + 1, "duplicate key " + rec.key.str() + " (first at line " +
                                  std::to_string(it->second) + ")");
        seen[rec.key] = i + 1;
        out.push_back(std::move(rec));
    }
    return out;
}

std::string write_sensor_csv(const SensorTable& table) {
    std::ostringstream out;
    out << kSensorHeader << '\n';
    for (const auto& [key, streams] : table.trials) {
        for (const auto& [type, stream] : streams) {
            for (size_t i = 0; i < stream.size(); ++i) {
                out << key.user_id << ',' << key.trial_index << ',' << stream.t_ms[i] << ','
                    << to_string(type) << ',';
                if (is_vector3(type)) {
                    out << csv::format_double(stream.x[i]) << ',' << csv::format_double(stream.y[i])
                        << ',' << csv::format_double(stream.z[i]) << ',';
                } else {
                    out << ",,," << csv::format_double(stream.v[i]);
                }
                out << '\n';
            }
        }
    }
    return out.str();
}

std::string write_questionnaire_csv(std::span<const QuestionnaireRecord> qnr) {
    std::ostringstream out;
    out << kQnrHeader << '\n';
    for (const auto& r : qnr) {
        out << r.key.user_id << ',' << r.key.trial_index << ',' << r.tech_diff << ',' << r.emo_expr
            << ',' << r.feel_calm << ',' << r.feel_at_ease << ',' << r.feel_nervous << ','
            << r.feel_uncomfortable << '\n';
    }
    return out.str();
}

std::map<TrialKey, RRSeries> parse_rr_file(const std::string& path) {
    const auto lines = csv::read_lines(path);
    if (lines.empty()) throw std::runtime_error(path + ": empty file");
    if (lines[0] != "user_id,trial_index,t_beat_ms")
        throw std::runtime_error(path + ": bad header, expected 'user_id,trial_index,t_beat_ms'");

    std::map<TrialKey, RRSeries> out;
    for (size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto cols = csv::split(lines[i]);
        if (cols.size() != 3) fail_line(i + 1, "expected 3 columns");
        const auto trial = csv::parse_int(cols[1]);
        const auto t = csv::parse_double(cols[2]);
        if (cols[0].empty() || !trial || !t) fail_line(i + 1, "malformed beat row");
        RRSeries& rr = out[{cols[0], static_cast<int>(*trial)}];
        const double t_s = *t / 1000.0;
        if (!rr.t_beats.empty()) {
            const double dt_ms = (t_s - rr.t_beats.back()) * 1000.0;
            if (dt_ms <= 0) fail_line(i + 1, "beat times must be strictly increasing per trial");
            rr.rr_ms.push_back(dt_ms);
        }
        rr.t_beats.push_back(t_s);
    }
    for (auto& [key, rr] : out) {
        rr.key = key;
        if (rr.t_beats.size() < 3)
            throw std::runtime_error(path + ": fewer than 3 beats for " + key.str());
    }
    return out;
}

// ---------------------------------------------------------------------------

RRSeries detect_r_peaks(std::span<const double> ecg, double fs_hz) {
    if (fs_hz < 100.0) throw std::invalid_argument("detect_r_peaks: fs must be >= 100 Hz");
    if (static_cast<double>(ecg.size()) < 2.0 * fs_hz)
        throw std::invalid_argument("detect_r_peaks: need at least 2 s of signal");

    // QRS emphasis band, then energy.
    const auto hp = butterworth_highpass(5.0, fs_hz).process(ecg);
    const auto bp = butterworth_lowpass(15.0, fs_hz).process(hp);
    std::vector<double> energy(bp.size());
    for (size_t i = 0; i < bp.size(); ++i) energy[i] = bp[i] * bp[i];

    const size_t half = static_cast<size_t>(fs_hz);  // 2 s total window
    const auto rolling = sliding_max(energy, half);

    RRSeries out;
    const double refractory_ms = 300.0, max_interval_ms = 2000.0;
    std::vector<size_t> beats;
    for (size_t i = 1; i + 1 < energy.size(); ++i) {
        if (!(energy[i] > energy[i - 1] && energy[i] >= energy[i + 1])) continue;
        if (energy[i] < 0.5 * rolling[i] || energy[i] <= 0.0) continue;
        if (!beats.empty()) {
            const double gap_ms = static_cast<double>(i - beats.back()) / fs_hz * 1000.0;
            if (gap_ms < refractory_ms) {
                // Keep the stronger of the colliding candidates.
                out.dropped_ms.push_back(gap_ms);
                if (energy[i] > energy[beats.back()]) beats.back() = i;
                continue;
            }
        }
        beats.push_back(i);
    }

    // Intervals above the plausibility ceiling split the sequence; keep the
    // longest clean run and report everything else.
    std::vector<std::pair<size_t, size_t>> runs;  // [first, last] indices into beats
    size_t run_start = 0;
    for (size_t b = 1; b <= beats.size(); ++b) {
        const bool split =
            b == beats.size() ||
            static_cast<double>(beats[b] - beats[b - 1]) / fs_hz * 1000.0 > max_interval_ms;
        if (split) {
            runs.emplace_back(run_start, b - 1);
            if (b < beats.size())
                out.dropped_ms.push_back(static_cast<double>(beats[b] - beats[b - 1]) / fs_hz *
                                         1000.0);
            run_start = b;
        }
    }
    size_t best = 0;
    for (size_t r = 1; r < runs.size(); ++r)
        if (runs[r].second - runs[r].first > runs[best].second - runs[best].first) best = r;

    std::vector<size_t> kept;
    if (!runs.empty())
        kept.assign(beats.begin() + static_cast<ptrdiff_t>(runs[best].first),
                    beats.begin() + static_cast<ptrdiff_t>(runs[best].second) + 1);
    for (size_t r = 0; r < runs.size(); ++r) {
        if (r == best) continue;
        for (size_t b = runs[r].first; b + 1 <= runs[r].second; ++b)
            out.dropped_ms.push_back(static_cast<double>(beats[b + 1] - beats[b]) / fs_hz * 1000.0);
    }

    if (kept.size() < 3) throw std::runtime_error("insufficient beats");

    // Sub-sample refinement: parabola through the energy peak, so interval
    // resolution is not limited to the sampling grid.
    out.t_beats.reserve(kept.size());
    for (size_t idx : kept) {
        double delta = 0.0;
        if (idx > 0 && idx + 1 < energy.size()) {
            const double denom = energy[idx - 1] - 2.0 * energy[idx] + energy[idx + 1];
            if (denom < 0)
                delta = std::clamp(0.5 * (energy[idx - 1] - energy[idx + 1]) / denom, -0.5, 0.5);
        }
        out.t_beats.push_back((static_cast<double>(idx) + delta) / fs_hz);
    }
    out.rr_ms.reserve(kept.size() - 1);
    for (size_t b = 1; b < kept.size(); ++b)
        out.rr_ms.push_back((out.t_beats[b] - out.t_beats[b - 1]) * 1000.0);
    return out;
}

RRSeries rr_from_table(const SensorTable& table, const TrialKey& key) {
    const Stream* ecg = table.find(key, SensorType::ecg);
    if (!ecg || ecg->size() < 2) throw std::runtime_error("no ECG stream for " + key.str());
    const double fs = ecg->sample_rate_hz();
    RRSeries rr = detect_r_peaks(ecg->v, fs);
    rr.key = key;
    const double offset_s = static_cast<double>(ecg->t_ms.front()) / 1000.0;
    for (double& t : rr.t_beats) t += offset_s;
    return rr;
}

}  // namespace eml
