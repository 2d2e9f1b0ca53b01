#include <cmath>
#include <numbers>

#include "doctest.h"

#include "eml/csv.hpp"
#include "eml/ingest.hpp"
#include "eml/numeric.hpp"

using namespace eml;

namespace {

std::string write_tmp(const std::string& name, const std::string& contents) {
    const std::string path = "/tmp/eml_ingest_" + name;
    csv::write_file(path, contents);
    return path;
}

constexpr const char* kSensorHeader = "user_id,trial_index,t_ms,sensor_type,x,y,z,value\n";
constexpr const char* kQnrHeader =
    "user_id,trial_index,tech_diff,emo_expr,feel_calm,feel_at_ease,feel_nervous,"
    "feel_uncomfortable\n";

}  // namespace

TEST_CASE("a small gsr file parses into one stream") {
    const auto path = write_tmp("gsr.csv", std::string(kSensorHeader) +
                                               "u01,1,0,GSR_axilla,,,,2.5\n"
                                               "u01,1,125,GSR_axilla,,,,2.6\n"
                                               "u01,1,250,GSR_axilla,,,,2.4\n");
    const SensorTable table = parse_sensor_file(path);
    REQUIRE(table.trials.size() == 1);
    const Stream* s = table.find({"u01", 1}, SensorType::gsr_axilla);
    REQUIRE(s != nullptr);
    CHECK(s->size() == 3);
    CHECK(s->v[2] == doctest::Approx(2.4));
}

TEST_CASE("malformed value column reports the line number") {
    const auto path = write_tmp("bad.csv", std::string(kSensorHeader) +
                                               "u01,1,0,GSR_axilla,,,,2.5\n"
                                               "u01,1,125,GSR_axilla,,,,oops\n");
    CHECK_THROWS_WITH_AS(parse_sensor_file(path),
                         doctest::Contains("line 3"), std::runtime_error);
}

TEST_CASE("imu rows must carry all three axes") {
    const auto path = write_tmp("imu.csv", std::string(kSensorHeader) +
                                               "u01,1,0,IMU_wrist,0.1,0.2,,\n");
    CHECK_THROWS_WITH_AS(parse_sensor_file(path),
                         doctest::Contains("3-vector sensor requires x,y,z"), std::runtime_error);
}

TEST_CASE("unknown sensor type names the value") {
    const auto path = write_tmp("unk.csv", std::string(kSensorHeader) +
                                               "u01,1,0,EMG_wrist,,,,1.0\n");
    CHECK_THROWS_WITH_AS(parse_sensor_file(path), doctest::Contains("EMG_wrist"),
                         std::runtime_error);
}

TEST_CASE("parsing is insensitive to row order") {
    const std::string rows[] = {"u01,1,250,GSR_axilla,,,,2.4\n", "u01,1,0,GSR_axilla,,,,2.5\n",
                                "u01,1,125,GSR_axilla,,,,2.6\n"};
    const auto p1 = write_tmp("o1.csv", std::string(kSensorHeader) + rows[0] + rows[1] + rows[2]);
    const auto p2 = write_tmp("o2.csv", std::string(kSensorHeader) + rows[1] + rows[2] + rows[0]);
    CHECK(parse_sensor_file(p1) == parse_sensor_file(p2));
}

TEST_CASE("a 261-row questionnaire parses into 261 records") {
    std::string body = kQnrHeader;
    for (int u = 1; u <= 9; ++u)
        for (int t = 1; t <= 29; ++t)
            body += "user" + std::to_string(u) + "," + std::to_string(t) + ",4,5,7,7,3,4\n";
    const auto recs = parse_questionnaire_file(write_tmp("q261.csv", body));
    CHECK(recs.size() == 261);
}

TEST_CASE("single valid questionnaire row maps fields") {
    const auto recs = parse_questionnaire_file(
        write_tmp("q1.csv", std::string(kQnrHeader) + "u01,7,2,9,8,7,3,4\n"));
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].key.user_id == "u01");
    CHECK(recs[0].key.trial_index == 7);
    CHECK(recs[0].tech_diff == 2);
    CHECK(recs[0].emo_expr == 9);
    CHECK(recs[0].feel_calm == 8);
    CHECK(recs[0].feel_at_ease == 7);
    CHECK(recs[0].feel_nervous == 3);
    CHECK(recs[0].feel_uncomfortable == 4);
}

TEST_CASE("rating below the scale floor is rejected") {
    CHECK_THROWS_WITH_AS(
        parse_questionnaire_file(
            write_tmp("q0.csv", std::string(kQnrHeader) + "u01,1,4,5,7,7,0,4\n")),
        doctest::Contains("out of range"), std::runtime_error);
}

TEST_CASE("duplicate questionnaire keys are rejected") {
    CHECK_THROWS_WITH_AS(parse_questionnaire_file(write_tmp(
                             "qd.csv", std::string(kQnrHeader) +
                                           "u01,1,4,5,7,7,3,4\nu01,1,4,5,7,7,3,4\n")),
                         doctest::Contains("duplicate"), std::runtime_error);
}

TEST_CASE("missing questionnaire column is named") {
    CHECK_THROWS_WITH_AS(
        parse_questionnaire_file(write_tmp(
            "qm.csv",
            "user_id,trial_index,tech_diff,emo_expr,feel_calm,feel_at_ease,feel_nervous\n")),
        doctest::Contains("feel_uncomfortable"), std::runtime_error);
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> impulse_train(double fs, double duration_s,
                                  std::span<const double> beat_times) {
    std::vector<double> x(static_cast<size_t>(fs * duration_s), 0.0);
    for (double t : beat_times) {
        const size_t idx = static_cast<size_t>(std::llround(t * fs));
        if (idx < x.size()) x[idx] = 1.0;
    }
    return x;
}

}  // namespace

TEST_CASE("impulse train at 1 Hz yields 1000 ms intervals") {
    std::vector<double> beats;
    for (int i = 0; i < 10; ++i) beats.push_back(0.4 + static_cast<double>(i));
    const auto ecg = impulse_train(250, 10.5, beats);
    const RRSeries rr = detect_r_peaks(ecg, 250);
    REQUIRE(rr.rr_ms.size() == 9);
    for (double v : rr.rr_ms) CHECK(v == doctest::Approx(1000.0).epsilon(1e-12));
}

TEST_CASE("a jittered impulse splits one interval into 1040 and 960") {
    std::vector<double> beats;
    for (int i = 0; i < 10; ++i) beats.push_back(0.4 + static_cast<double>(i));
    beats[5] += 0.040;
    const auto ecg = impulse_train(250, 10.5, beats);
    const RRSeries rr = detect_r_peaks(ecg, 250);
    REQUIRE(rr.rr_ms.size() == 9);
    int saw_1040 = 0, saw_960 = 0;
    for (double v : rr.rr_ms) {
        if (v == doctest::Approx(1040.0)) ++saw_1040;
        if (v == doctest::Approx(960.0)) ++saw_960;
    }
    CHECK(saw_1040 == 1);
    CHECK(saw_960 == 1);
}

TEST_CASE("noisy synthetic ecg at 72 bpm recovers the mean interval") {
    // Ground truth from the generator: beats every 60/72 s with small jitter.
    Rng rng(99);
    const double fs = 250, dur = 60;
    std::vector<double> beats;
    double t = 0.5;
    while (t < dur - 0.5) {
        beats.push_back(t);
        t += 60.0 / 72.0 + rng.normal(0, 0.01);
    }
    std::vector<double> ecg(static_cast<size_t>(fs * dur), 0.0);
    for (size_t i = 0; i < ecg.size(); ++i) {
        const double ts = static_cast<double>(i) / fs;
        double v = 0.1 * std::sin(2 * std::numbers::pi * 0.3 * ts) + rng.normal(0, 0.03);
        for (double b : beats) {
            const double d = ts - b;
            if (std::fabs(d) < 0.5) v += std::exp(-d * d / (2 * 0.012 * 0.012));
        }
        ecg[i] = v;
    }
    const RRSeries rr = detect_r_peaks(ecg, fs);
    const double m = mean(rr.rr_ms);
    CHECK(m > 833.0 * 0.98);
    CHECK(m < 833.0 * 1.02);
    // And the detected count matches the planted count.
    CHECK(std::llabs(static_cast<long long>(rr.t_beats.size()) -
                     static_cast<long long>(beats.size())) <= 1);
}

TEST_CASE("beat times are strictly increasing") {
    Rng rng(7);
    std::vector<double> beats;
    double t = 0.4;
    while (t < 20) {
        beats.push_back(t);
        t += rng.uniform(0.7, 1.3);
    }
    const auto ecg = impulse_train(200, 21, beats);
    const RRSeries rr = detect_r_peaks(ecg, 200);
    for (size_t i = 1; i < rr.t_beats.size(); ++i) CHECK(rr.t_beats[i] > rr.t_beats[i - 1]);
    CHECK(rr.t_beats.size() == rr.rr_ms.size() + 1);
}

TEST_CASE("too few beats is an error") {
    std::vector<double> flat(1000, 0.0);
    CHECK_THROWS_WITH_AS(detect_r_peaks(flat, 250), "insufficient beats", std::runtime_error);
    CHECK_THROWS_AS(detect_r_peaks(flat, 50), std::invalid_argument);  // fs too low
}

TEST_CASE("pre-computed beat files parse into rr series") {
    const auto path = write_tmp("rr.csv",
                                "user_id,trial_index,t_beat_ms\n"
                                "u01,1,500\n"
                                "u01,1,1500\n"
                                "u01,1,2400\n"
                                "u01,2,100\n"
                                "u01,2,900\n"
                                "u01,2,1800\n");
    const auto rr = parse_rr_file(path);
    REQUIRE(rr.size() == 2);
    const RRSeries& first = rr.at({"u01", 1});
    REQUIRE(first.rr_ms.size() == 2);
    CHECK(first.rr_ms[0] == doctest::Approx(1000));
    CHECK(first.rr_ms[1] == doctest::Approx(900));
    CHECK(first.t_beats.size() == first.rr_ms.size() + 1);

    CHECK_THROWS_WITH_AS(parse_rr_file(write_tmp("rr_bad.csv",
                                                 "user_id,trial_index,t_beat_ms\n"
                                                 "u01,1,500\nu01,1,400\nu01,1,600\n")),
                         doctest::Contains("strictly increasing"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_rr_file(write_tmp("rr_short.csv",
                                                 "user_id,trial_index,t_beat_ms\nu01,1,500\n")),
                         doctest::Contains("fewer than 3"), std::runtime_error);
}

TEST_CASE("implausible intervals are dropped and reported") {
    // Two clusters separated by 5 s of silence: the longest run wins.
    std::vector<double> beats;
    for (int i = 0; i < 4; ++i) beats.push_back(0.4 + static_cast<double>(i));
    for (int i = 0; i < 8; ++i) beats.push_back(9.0 + static_cast<double>(i));
    const auto ecg = impulse_train(250, 18, beats);
    const RRSeries rr = detect_r_peaks(ecg, 250);
    CHECK(rr.rr_ms.size() == 7);  // the 8-beat run
    CHECK_FALSE(rr.dropped_ms.empty());
    for (double v : rr.rr_ms) CHECK(v <= 2000.0);
}
