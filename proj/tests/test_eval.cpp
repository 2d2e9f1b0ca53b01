#include <cmath>
#include <cstdio>
#include <set>

#include "doctest.h"
#include "helpers.hpp"

#include "eml/eval.hpp"

using namespace eml;

TEST_CASE("metrics reproduce the reference confusion matrix") {
    // observed high: 41 correct, 8 missed; observed low: 62 correct, 7 missed
    Confusion c;
    c.tp = 41;
    c.fn = 8;
    c.fp = 7;
    c.tn = 62;
    const MetricSet m = metrics(c);
    CHECK(m.accuracy == doctest::Approx(103.0 / 118.0).epsilon(1e-12));
    CHECK(m.correct_high == doctest::Approx(41.0 / 49.0).epsilon(1e-12));
    CHECK(m.correct_low == doctest::Approx(62.0 / 69.0).epsilon(1e-12));

    const double precision = 41.0 / 48.0, recall = 41.0 / 49.0;
    CHECK(m.f1 ==
          doctest::Approx(2 * precision * recall / (precision + recall)).epsilon(1e-12));

    // printed percentages match the published rounding
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * m.accuracy);
    CHECK(std::string(buf) == "87.3%");
    std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * m.correct_high);
    CHECK(std::string(buf) == "83.7%");
    std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * m.correct_low);
    CHECK(std::string(buf) == "89.9%");
}

TEST_CASE("metrics edge cases") {
    Confusion perfect;
    perfect.tp = 10;
    perfect.tn = 15;
    const MetricSet m = metrics(perfect);
    CHECK(m.f1 == 1.0);
    CHECK(m.accuracy == 1.0);
    CHECK_THROWS_AS(metrics(Confusion{}), std::invalid_argument);
}

TEST_CASE("swapping classes transposes the confusion and keeps accuracy") {
    Confusion c;
    c.tp = 41;
    c.fn = 8;
    c.fp = 7;
    c.tn = 62;
    Confusion swapped;
    swapped.tp = c.tn;
    swapped.fn = c.fp;
    swapped.fp = c.fn;
    swapped.tn = c.tp;
    CHECK(metrics(c).accuracy == metrics(swapped).accuracy);
    CHECK(metrics(c).macro_f1 == doctest::Approx(metrics(swapped).macro_f1).epsilon(1e-12));
    CHECK(metrics(swapped).f1 == doctest::Approx(0.5 * 2 * (62.0 / 70.0) * (62.0 / 69.0) /
                                                 (0.5 * (62.0 / 70.0 + 62.0 / 69.0))));
}

TEST_CASE("cross validation produces one confusion per fold and no leakage") {
    const auto& ds = testutil::small_dataset();
    PipelineConfig cfg;
    const CvReport report = cross_validate(ds.windows, cfg, 7);
    CHECK(report.folds.size() == 5);
    int evaluated = 0;
    for (const auto& f : report.folds) {
        if (f.skipped) continue;
        ++evaluated;
        CHECK(f.confusion.total() > 0);
    }
    CHECK(evaluated + report.skipped_folds == 5);
    CHECK(evaluated >= 4);

    // every window appears in exactly one test fold
    size_t tested = 0;
    for (const auto& f : report.folds) tested += static_cast<size_t>(f.confusion.total());
    size_t in_evaluated_folds = 0;
    for (const auto& lw : ds.windows) {
        const auto& fr = report.folds[static_cast<size_t>(lw.fold)];
        if (!fr.skipped) ++in_evaluated_folds;
    }
    CHECK(tested == in_evaluated_folds);
}

TEST_CASE("planted signal is recovered by the full pipeline") {
    // Clean-signal configuration: no discomfort confound.
    testutil::SmallOpts o;
    o.users = 4;
    o.trials = 12;
    o.volatility = 2.0;
    o.discomfort_rate = 0.0;
    PipelineConfig cfg;
    cfg.use_discomfort_stage = false;
    const auto& synth = testutil::small_synth(o);
    const BuiltDataset ds = build_dataset({synth.sensors, synth.questionnaire}, cfg);
    const CvReport report = cross_validate(ds.windows, cfg, 7);
    CHECK(report.f1_mean >= 0.85);  // strong planted effect on a small set
}

TEST_CASE("fold leakage is detected and refused") {
    auto windows = testutil::small_dataset().windows;
    // corrupt one window's fold so its trial spans two folds
    for (size_t i = 1; i < windows.size(); ++i) {
        if (windows[i].key() == windows[0].key()) {
            windows[i].fold = (windows[0].fold + 1) % 5;
            break;
        }
    }
    PipelineConfig cfg;
    CHECK_THROWS_WITH_AS(cross_validate(windows, cfg, 7), doctest::Contains("leakage"),
                         std::logic_error);
}

TEST_CASE("bootstrap sanity") {
    Rng rng(61);
    std::vector<int> truth(500), perfect(500), random(500);
    for (size_t i = 0; i < truth.size(); ++i) {
        truth[i] = static_cast<int>(rng.uniform_int(2));
        perfect[i] = truth[i];
        random[i] = static_cast<int>(rng.uniform_int(2));
    }
    SUBCASE("identical prediction vectors tie") {
        const double p = bootstrap_compare(random, random, truth, 2000, 5);
        CHECK(p >= 0.95);
    }
    SUBCASE("perfect beats random decisively") {
        const double p = bootstrap_compare(perfect, random, truth, 2000, 5);
        CHECK(p < 0.001);
    }
    SUBCASE("fixed seed reproduces the p-value") {
        const double a = bootstrap_compare(perfect, random, truth, 1000, 9);
        const double b = bootstrap_compare(perfect, random, truth, 1000, 9);
        CHECK(a == b);
    }
    SUBCASE("length mismatch and tiny B are rejected") {
        std::vector<int> short_vec(10, 0);
        CHECK_THROWS_AS(bootstrap_compare(short_vec, random, truth, 2000, 1), std::invalid_argument);
        CHECK_THROWS_AS(bootstrap_compare(perfect, random, truth, 10, 1), std::invalid_argument);
    }
}

TEST_CASE("bootstrap p decreases as the planted gap grows") {
    Rng rng(63);
    std::vector<int> truth(400);
    for (auto& t : truth) t = static_cast<int>(rng.uniform_int(2));
    auto degraded = [&](double flip_rate, uint64_t seed) {
        Rng r(seed);
        std::vector<int> p = truth;
        for (auto& v : p)
            if (r.uniform01() < flip_rate) v ^= 1;
        return p;
    };
    const auto baseline = degraded(0.35, 1);
    double prev = 1.1;
    for (double flip : {0.30, 0.15, 0.02}) {
        const double p = bootstrap_compare(degraded(flip, 2), baseline, truth, 4000, 11);
        CHECK(p <= prev + 0.05);
        prev = p;
    }
    CHECK(prev < 0.05);
}

TEST_CASE("step-size sweep re-runs the pipeline per step") {
    testutil::SmallOpts o;
    o.users = 3;
    o.trials = 8;
    o.duration = 62;
    const auto& synth = testutil::small_synth(o);
    PipelineConfig cfg;
    const std::vector<double> steps = {15, 30};
    const auto rows = sweep_step_size({synth.sensors, synth.questionnaire}, steps, cfg);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].step_s == 15);
    CHECK(rows[1].step_s == 30);  // step == window still yields a row
    for (const auto& r : rows) {
        CHECK(r.f1_mean >= 0.0);
        CHECK(r.f1_mean <= 1.0);
    }
    CHECK_THROWS_AS(
        sweep_step_size({synth.sensors, synth.questionnaire}, std::vector<double>{45.0}, cfg),
        std::invalid_argument);
}

TEST_CASE("ablation filters features by sensor group") {
    // Clean-signal configuration so the IMU subset can match ALL.
    testutil::SmallOpts o;
    o.users = 4;
    o.trials = 12;
    o.volatility = 2.0;
    o.discomfort_rate = 0.0;
    PipelineConfig cfg;
    cfg.use_discomfort_stage = false;
    const auto& synth = testutil::small_synth(o);
    const BuiltDataset ds = build_dataset({synth.sensors, synth.questionnaire}, cfg);

    const std::vector<ModelSpec> algos = {ModelSpec::make("gbt"),
                                          ModelSpec::make("decision_tree")};
    const auto subsets = default_ablation_subsets();
    REQUIRE(subsets.size() == 7);
    CHECK(subset_name(subsets.back()) == "ALL");
    CHECK(subset_name(subsets[4]) == "IMU+GYR");

    const std::vector<std::vector<SensorGroup>> two = {{SensorGroup::imu},
                                                       subsets.back()};
    const auto cells = ablation(ds.windows, two, algos, cfg, 7);
    REQUIRE(cells.size() == 4);
    std::set<std::string> seen;
    for (const auto& c : cells) seen.insert(c.algorithm + "/" + c.subset);
    CHECK(seen.contains("gbt/ALL"));
    CHECK(seen.contains("gbt/IMU"));
    CHECK(seen.contains("decision_tree/ALL"));
    // IMU carries the dominant planted signal; HRV/GSR add a little on top
    double imu_f1 = 0, all_f1 = 0;
    for (const auto& c : cells)
        if (c.algorithm == "gbt") (c.subset == "IMU" ? imu_f1 : all_f1) = c.f1_mean;
    CHECK(imu_f1 > 0.7);
    CHECK(imu_f1 >= 0.8 * all_f1);
}

TEST_CASE("signal-free sensor groups score near chance") {
    // EML effects off except IMU volatility; GSR and HRV carry no signal.
    testutil::SmallOpts o;
    o.users = 3;
    o.trials = 10;
    o.duration = 62;
    o.volatility = 2.0;
    o.hf_shift = 0.0;
    o.gsr_boost = 0.0;
    o.discomfort_rate = 0.18;
    o.seed = 15;
    const auto& ds = testutil::small_dataset(o);
    PipelineConfig cfg;
    const std::vector<ModelSpec> algos = {ModelSpec::make("gbt")};
    const std::vector<std::vector<SensorGroup>> subsets = {
        {SensorGroup::imu},
        {SensorGroup::gsr},
        {SensorGroup::imu, SensorGroup::gyr, SensorGroup::gsr, SensorGroup::hrv}};
    const auto cells = ablation(ds.windows, subsets, algos, cfg, 7);
    double imu = 0, gsr = 0, all = 0;
    for (const auto& c : cells) {
        if (c.subset == "IMU") imu = c.f1_mean;
        if (c.subset == "GSR") gsr = c.f1_mean;
        if (c.subset == "ALL") all = c.f1_mean;
    }
    CHECK(imu >= 0.85 * all);
    CHECK(gsr < 0.72);
    CHECK(gsr < imu);
}

TEST_CASE("algorithm comparison reports one p-value per rival") {
    const auto& ds = testutil::small_dataset();
    PipelineConfig cfg;
    cfg.bootstrap_b = 2000;
    const std::vector<ModelSpec> algos = {ModelSpec::make("gbt"),
                                          ModelSpec::make("logistic_regression")};
    const auto sig = compare_algorithms(ds.windows, algos, cfg, 7);
    REQUIRE(sig.size() == 1);
    CHECK(sig[0].pair == "gbt vs logistic_regression");
    CHECK(sig[0].p_value >= 0.0);
    CHECK(sig[0].p_value <= 1.0);
    const auto again = compare_algorithms(ds.windows, algos, cfg, 7);
    CHECK(again[0].p_value == sig[0].p_value);
}

TEST_CASE("empty subset is rejected") {
    const auto& ds = testutil::small_dataset();
    PipelineConfig cfg;
    const std::vector<ModelSpec> algos = {ModelSpec::make("gbt")};
    const std::vector<std::vector<SensorGroup>> subsets = {{}};
    CHECK_THROWS_AS(ablation(ds.windows, subsets, algos, cfg, 7), std::invalid_argument);
}
