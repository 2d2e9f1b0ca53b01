#include <cmath>
#include <numbers>
#include <set>

#include "doctest.h"
#include "oracles.hpp"

#include "eml/features.hpp"
#include "eml/numeric.hpp"
#include "eml/synth.hpp"
#include "eml/windowing.hpp"

using namespace eml;

namespace {

RRSeries make_rr(std::span<const double> rr_ms) {
    RRSeries rr;
    rr.t_beats.push_back(0.0);
    for (double v : rr_ms) {
        rr.rr_ms.push_back(v);
        rr.t_beats.push_back(rr.t_beats.back() + v / 1000.0);
    }
    return rr;
}

std::vector<double> random_rr(size_t n, uint64_t seed) {
    Rng rng(seed);
    std::vector<double> rr(n);
    for (double& v : rr) v = rng.uniform(700, 1000);
    return rr;
}

}  // namespace

TEST_CASE("jerk examples") {
    const std::vector<double> t = {0, 1, 2};
    CHECK(jerk(std::vector<double>{0, 1, 3}, t) == std::vector<double>{1, 2});
    const auto z = jerk(std::vector<double>{5, 5, 5}, t);
    for (double v : z) CHECK(v == 0.0);
    CHECK_THROWS_AS(jerk(std::vector<double>{5}, std::vector<double>{0}), std::invalid_argument);
    CHECK_THROWS_WITH_AS(jerk(std::vector<double>{1, 2}, std::vector<double>{1, 1}),
                         doctest::Contains("zero dt"), std::invalid_argument);
}

TEST_CASE("magnitude examples and oracle") {
    CHECK(magnitude(std::vector<double>{3}, std::vector<double>{4}, std::vector<double>{0})[0] ==
          doctest::Approx(5));
    CHECK(magnitude(std::vector<double>{0}, std::vector<double>{0}, std::vector<double>{0})[0] ==
          0);
    Rng rng(1);
    std::vector<double> x(100), y(100), z(100);
    for (size_t i = 0; i < 100; ++i) {
        x[i] = rng.normal();
        y[i] = rng.normal();
        z[i] = rng.normal();
    }
    const auto m = magnitude(x, y, z);
    for (size_t i = 0; i < 100; ++i)
        CHECK(m[i] == doctest::Approx(std::sqrt(x[i] * x[i] + y[i] * y[i] + z[i] * z[i]))
                          .epsilon(1e-12));
}

TEST_CASE("scale covariance of the motion kernels") {
    Rng rng(2);
    std::vector<double> x(50), y(50), z(50), t(50);
    for (size_t i = 0; i < 50; ++i) {
        x[i] = rng.normal();
        y[i] = rng.normal();
        z[i] = rng.normal();
        t[i] = static_cast<double>(i) * 0.02;
    }
    const double c = 3.7;
    auto xs = x;
    for (double& v : xs) v *= c;
    auto ys = y;
    for (double& v : ys) v *= c;
    auto zs = z;
    for (double& v : zs) v *= c;

    const auto m1 = magnitude(x, y, z);
    const auto m2 = magnitude(xs, ys, zs);
    for (size_t i = 0; i < 50; ++i) CHECK(m2[i] == doctest::Approx(c * m1[i]).epsilon(1e-12));

    const auto j1 = jerk(x, t);
    const auto j2 = jerk(xs, t);
    for (size_t i = 0; i < j1.size(); ++i)
        CHECK(j2[i] == doctest::Approx(c * j1[i]).epsilon(1e-12));

    CHECK(stat_features(xs).variance ==
          doctest::Approx(c * c * stat_features(x).variance).epsilon(1e-9));
}

TEST_CASE("stat_features on 1,2,3,4") {
    const StatFeatures f = stat_features(std::vector<double>{1, 2, 3, 4});
    CHECK(f.mean == doctest::Approx(2.5));
    CHECK(f.median == doctest::Approx(2.5));
    CHECK(f.variance == doctest::Approx(1.25));
    CHECK(f.rmssd == doctest::Approx(1.0));
    CHECK(f.iqr == doctest::Approx(1.5));
}

TEST_CASE("stat_features on a constant series") {
    const StatFeatures f = stat_features(std::vector<double>{2, 2, 2, 2, 2});
    CHECK(f.variance == 0);
    CHECK(f.rmssd == 0);
    CHECK(f.iqr == 0);
    CHECK_THROWS_AS(stat_features(std::vector<double>{1, 2, 3}), std::invalid_argument);
}

TEST_CASE("stat_features matches the naive oracle on gaussian draws") {
    Rng rng(3);
    std::vector<double> v(1000);
    for (double& x : v) x = rng.normal();
    const StatFeatures f = stat_features(v);
    CHECK(f.mean == doctest::Approx(oracle::mean(v)).epsilon(1e-9));
    CHECK(f.variance == doctest::Approx(oracle::variance_pop(v)).epsilon(1e-9));
    CHECK(f.median == doctest::Approx(oracle::median(v)).epsilon(1e-9));
    CHECK(f.iqr == doctest::Approx(oracle::iqr(v)).epsilon(1e-9));
    CHECK(f.skewness == doctest::Approx(oracle::skewness(v)).epsilon(1e-9));
    CHECK(f.kurtosis == doctest::Approx(oracle::kurtosis_excess(v)).epsilon(1e-9));
    CHECK(f.rmssd == doctest::Approx(oracle::rmssd(v)).epsilon(1e-9));
    CHECK(std::fabs(f.skewness) < 0.3);
    CHECK(std::fabs(f.kurtosis) < 0.3);
}

TEST_CASE("sparc matches the dft oracle on a bell profile") {
    const double fs = 100;
    std::vector<double> speed(200);
    for (size_t i = 0; i < speed.size(); ++i) {
        const double t = static_cast<double>(i) / fs - 1.0;
        speed[i] = std::exp(-t * t / (2 * 0.15 * 0.15));
    }
    const double got = sparc(speed, fs);
    const double want = oracle::sparc(speed, fs, 20.0, 0.05);
    CHECK(got == doctest::Approx(want).epsilon(1e-6));
}

TEST_CASE("two separated bells are less smooth than one") {
    const double fs = 100;
    std::vector<double> one(300, 0.0), two(300, 0.0);
    for (size_t i = 0; i < 300; ++i) {
        const double t = static_cast<double>(i) / fs;
        one[i] = std::exp(-(t - 1.5) * (t - 1.5) / (2 * 0.15 * 0.15));
        two[i] = std::exp(-(t - 0.8) * (t - 0.8) / (2 * 0.1 * 0.1)) +
                 std::exp(-(t - 2.2) * (t - 2.2) / (2 * 0.1 * 0.1));
    }
    CHECK(sparc(two, fs) < sparc(one, fs));
    CHECK(sparc(two, fs) == doctest::Approx(oracle::sparc(two, fs, 20.0, 0.05)).epsilon(1e-6));
}

TEST_CASE("sparc rejects degenerate input") {
    std::vector<double> zeros(100, 0.0);
    CHECK_THROWS_WITH_AS(sparc(zeros, 100), "degenerate profile", std::runtime_error);
    std::vector<double> ok(100, 1.0);
    CHECK_THROWS_AS(sparc(ok, 30), std::invalid_argument);  // fs <= 2*cutoff
    CHECK_THROWS_AS(sparc(std::vector<double>(8, 1.0), 100), std::invalid_argument);
}

TEST_CASE("hrv_time on the worked example") {
    const HrvTime h = hrv_time(make_rr(std::vector<double>{800, 850, 870, 1000}));
    CHECK(h.nni_50 == 1);  // diffs 50, 20, 130; only 130 exceeds 50
    CHECK(h.pnni_50 == doctest::Approx(1.0 / 3.0));
    CHECK(h.nni_20 == 2);
    CHECK(h.nni_range == doctest::Approx(200));
    CHECK(h.mean_nni == doctest::Approx(880));
}

TEST_CASE("hrv_time on constant intervals") {
    const HrvTime h = hrv_time(make_rr(std::vector<double>{800, 800, 800, 800}));
    CHECK(h.sdnn == 0);
    CHECK(h.rmssd == 0);
    CHECK(h.nni_20 == 0);
    CHECK_THROWS_AS(hrv_time(make_rr(std::vector<double>{800, 850})), std::invalid_argument);
}

TEST_CASE("hrv_time matches the naive oracle on random intervals") {
    const auto rr = random_rr(300, 8);
    const HrvTime h = hrv_time(make_rr(rr));
    CHECK(h.mean_nni == doctest::Approx(oracle::mean(rr)).epsilon(1e-9));
    CHECK(h.median_nni == doctest::Approx(oracle::median(rr)).epsilon(1e-9));
    CHECK(h.sdnn == doctest::Approx(std::sqrt(oracle::variance_pop(rr))).epsilon(1e-9));
    CHECK(h.rmssd == doctest::Approx(oracle::rmssd(rr)).epsilon(1e-9));
    int n20 = 0, n50 = 0;
    for (size_t i = 1; i < rr.size(); ++i) {
        if (std::fabs(rr[i] - rr[i - 1]) > 20) ++n20;
        if (std::fabs(rr[i] - rr[i - 1]) > 50) ++n50;
    }
    CHECK(h.nni_20 == n20);
    CHECK(h.nni_50 == n50);
    CHECK(h.pnni_20 == doctest::Approx(static_cast<double>(n20) / 299.0).epsilon(1e-12));
}

// ---------------------------------------------------------------------------

namespace {

RRSeries modulated_rr(double mod_hz, double duration_s, double base_ms = 800,
                      double depth_ms = 50) {
    RRSeries rr;
    double t = 0;
    rr.t_beats.push_back(0);
    while (t < duration_s) {
        const double interval =
            (base_ms + depth_ms * std::sin(2 * std::numbers::pi * mod_hz * t)) / 1000.0;
        t += interval;
        rr.t_beats.push_back(t);
        rr.rr_ms.push_back(interval * 1000.0);
    }
    return rr;
}

}  // namespace

TEST_CASE("hf modulation lands in the hf band") {
    const RRSeries rr = modulated_rr(0.25, 300);
    const HrvFreq f = hrv_freq(rr);
    const double total = f.vlf_power + f.lf_power + f.hf_power;
    CHECK(f.hf_power / total >= 0.9);

    // Independent check on the same tachogram via the naive DFT.
    std::vector<double> t(rr.rr_ms.size()), y(rr.rr_ms.size());
    for (size_t i = 0; i < rr.rr_ms.size(); ++i) {
        t[i] = rr.t_beats[i + 1];
        y[i] = rr.rr_ms[i];
    }
    const size_t n = static_cast<size_t>((t.back() - t.front()) * 4.0) + 1;
    const auto grid = interp_linear(t, y, t.front(), 0.25, n);
    CHECK(oracle::band_fraction(grid, 4.0, 0.15, 0.4, 0.0033, 0.4) >= 0.9);
}

TEST_CASE("lf modulation dominates hf") {
    const RRSeries rr = modulated_rr(0.1, 300);
    const HrvFreq f = hrv_freq(rr);
    CHECK(f.lf_power > f.hf_power);
    std::vector<double> t(rr.rr_ms.size()), y(rr.rr_ms.size());
    for (size_t i = 0; i < rr.rr_ms.size(); ++i) {
        t[i] = rr.t_beats[i + 1];
        y[i] = rr.rr_ms[i];
    }
    const size_t n = static_cast<size_t>((t.back() - t.front()) * 4.0) + 1;
    const auto grid = interp_linear(t, y, t.front(), 0.25, n);
    CHECK(oracle::band_fraction(grid, 4.0, 0.04, 0.15, 0.0033, 0.4) >
          oracle::band_fraction(grid, 4.0, 0.15, 0.4, 0.0033, 0.4));
}

TEST_CASE("constant rr has no spectral power") {
    const RRSeries rr = make_rr(std::vector<double>(120, 800.0));
    const HrvFreq f = hrv_freq(rr);
    CHECK(f.vlf_power < 1e-10);
    CHECK(f.lf_power < 1e-10);
    CHECK(f.hf_power < 1e-10);
}

TEST_CASE("hrv_freq requires a 60 s span") {
    CHECK_THROWS_AS(hrv_freq(make_rr(std::vector<double>(30, 800.0))), std::invalid_argument);
}

TEST_CASE("poincare identity sd1 == rmssd / sqrt(2)") {
    for (uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
        const auto rr = random_rr(150, seed);
        const HrvNonlinear nl = hrv_nonlinear(make_rr(rr));
        const double rmssd = oracle::rmssd(rr);
        CHECK(nl.sd1 == doctest::Approx(rmssd / std::numbers::sqrt2).epsilon(1e-12));
    }
}

TEST_CASE("sampen of a perfectly periodic series is zero") {
    std::vector<double> rr;
    for (int i = 0; i < 50; ++i) {
        rr.push_back(800);
        rr.push_back(900);
    }
    const HrvNonlinear nl = hrv_nonlinear(make_rr(rr));
    // Every matching template extends, so the count ratio is exactly 1.
    CHECK(nl.sampen == doctest::Approx(oracle::sampen(rr, 2, 0.2 * stddev_pop(rr))).epsilon(1e-12));
    CHECK(nl.sampen < 0.05);
}

TEST_CASE("sampen matches brute-force counting on random intervals") {
    const auto rr = random_rr(200, 21);
    const double r = 0.2 * stddev_pop(rr);
    const HrvNonlinear nl = hrv_nonlinear(make_rr(rr));
    CHECK(nl.sampen == doctest::Approx(oracle::sampen(rr, 2, r)).epsilon(1e-12));
}

TEST_CASE("undefined entropy is an error") {
    // Arithmetic progression: every pairwise gap exceeds 0.2 sd, so no
    // length-m templates match.
    std::vector<double> rr;
    for (int i = 0; i < 12; ++i) rr.push_back(500.0 + 1000.0 * static_cast<double>(i));
    CHECK_THROWS_WITH_AS(hrv_nonlinear(make_rr(rr)), "entropy undefined", std::runtime_error);
    CHECK_THROWS_AS(hrv_nonlinear(make_rr(std::vector<double>(5, 800.0))), std::invalid_argument);
}

// ---------------------------------------------------------------------------

TEST_CASE("gsr features on a flat series") {
    const GsrStats g = gsr_features(std::vector<double>(80, 2.0), 8.0);
    CHECK(g.num_peaks == 0);
    CHECK(g.amplitude_mean == 0);
    CHECK(g.variance == 0);
}

TEST_CASE("two injected bumps are counted with their amplitude") {
    const double fs = 8.0;
    std::vector<double> v(static_cast<size_t>(fs * 40), 2.0);
    for (size_t i = 0; i < v.size(); ++i) {
        const double t = static_cast<double>(i) / fs;
        for (double onset : {8.0, 24.0}) {
            const double d = t - onset;
            if (d > 0) v[i] += 0.5 * (1 - std::exp(-d / 0.8)) * std::exp(-d / 4.0);
        }
    }
    const GsrStats g = gsr_features(v, fs);
    CHECK(g.num_peaks == 2);
    CHECK(g.amplitude_mean > 0.5 * 0.62 * 0.9);  // peak of the double-exponential shape
    CHECK(g.amplitude_mean < 0.5 * 0.62 * 1.1);
}

TEST_CASE("noise below the prominence threshold yields no peaks") {
    Rng rng(5);
    std::vector<double> v(320);
    for (double& x : v) x = 2.0 + 0.001 * rng.normal();
    const GsrStats g = gsr_features(v, 8.0);
    CHECK(g.num_peaks == 0);
}

TEST_CASE("artifact screen flags an affine copy") {
    std::vector<double> t(200), gsr(200), imu(200);
    Rng rng(6);
    for (size_t i = 0; i < 200; ++i) {
        t[i] = static_cast<double>(i) * 0.25;
        imu[i] = rng.normal();
        gsr[i] = 3.0 + 0.5 * imu[i];
    }
    const ArtifactResult r = artifact_screen(t, gsr, t, imu);
    CHECK(r.pearson_r == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.contaminated);
}

TEST_CASE("independent series are not flagged") {
    std::vector<double> t(1000), gsr(1000), imu(1000);
    Rng rng(7);
    for (size_t i = 0; i < 1000; ++i) {
        t[i] = static_cast<double>(i) * 0.25;
        gsr[i] = rng.normal();
        imu[i] = rng.normal();
    }
    const ArtifactResult r = artifact_screen(t, gsr, t, imu);
    CHECK(std::fabs(r.pearson_r) < 0.1);
    CHECK_FALSE(r.contaminated);
    // direct-formula oracle on the same (gridded) draw
    const size_t n_grid = static_cast<size_t>((t.back() - t.front()) * 4.0) + 1;
    const auto g = interp_linear(t, gsr, t.front(), 0.25, n_grid);
    const auto m = interp_linear(t, imu, t.front(), 0.25, n_grid);
    double sxy = 0, sxx = 0, syy = 0;
    const double mg = oracle::mean(g), mm = oracle::mean(m);
    for (size_t i = 0; i < g.size(); ++i) {
        sxy += (g[i] - mg) * (m[i] - mm);
        sxx += (g[i] - mg) * (g[i] - mg);
        syy += (m[i] - mm) * (m[i] - mm);
    }
    CHECK(r.pearson_r == doctest::Approx(sxy / std::sqrt(sxx * syy)).epsilon(1e-9));
}

TEST_CASE("constant gsr has undefined correlation") {
    std::vector<double> t(200), gsr(200, 2.0), imu(200);
    Rng rng(8);
    for (size_t i = 0; i < 200; ++i) {
        t[i] = static_cast<double>(i) * 0.25;
        imu[i] = rng.normal();
    }
    CHECK_THROWS_WITH_AS(artifact_screen(t, gsr, t, imu), doctest::Contains("undefined correlation"),
                         std::runtime_error);
}

// ---------------------------------------------------------------------------

TEST_CASE("feature registry is consistent") {
    const auto& defs = feature_registry();
    CHECK(defs.size() == feature_count());
    std::set<std::string> names;
    for (const auto& d : defs) names.insert(d.name);
    CHECK(names.size() == defs.size());  // globally unique
    // every feature belongs to exactly one of the four groups by type
    for (const auto& d : defs)
        CHECK((d.group == SensorGroup::imu || d.group == SensorGroup::gyr ||
               d.group == SensorGroup::gsr || d.group == SensorGroup::hrv));
    const std::string csv = registry_csv();
    CHECK(csv.starts_with("feature_name,sensor_group,units\n"));
    size_t lines = 0;
    for (char c : csv)
        if (c == '\n') ++lines;
    CHECK(lines == defs.size() + 1);
}

TEST_CASE("window extraction over synthetic data") {
    SynthConfig scfg;
    scfg.n_users = 1;
    scfg.n_trials_per_user = 2;
    scfg.trial_duration_s = 90;
    scfg.trial_duration_jitter_s = 0;
    scfg.seed = 31;
    const SynthDataset ds = generate(scfg);
    PipelineConfig cfg;

    const TrialKey key{"u01", 1};
    const Window w = partition(key, 90, 30, 15)[3];  // [45, 75): so-far spectrum available
    const FeatureVector fv = extract_window_features(w, ds.sensors, cfg);

    SUBCASE("full-sensor window fills the whole registry") {
        size_t present = 0;
        for (size_t i = 0; i < fv.values.size(); ++i) present += fv.has(i);
        CHECK(present == feature_count());
    }
    SUBCASE("determinism") {
        const FeatureVector again = extract_window_features(w, ds.sensors, cfg);
        REQUIRE(again.values.size() == fv.values.size());
        for (size_t i = 0; i < fv.values.size(); ++i) {
            const double a = fv.values[i], b = again.values[i];
            CHECK(((std::isnan(a) && std::isnan(b)) || a == b));
        }
    }
    SUBCASE("masking a missing sensor group") {
        SensorTable no_gsr = ds.sensors;
        for (auto& [k, streams] : no_gsr.trials) {
            streams.erase(SensorType::gsr_shoulder);
            streams.erase(SensorType::gsr_fingertips);
            streams.erase(SensorType::gsr_axilla);
        }
        const FeatureVector masked = extract_window_features(w, no_gsr, cfg);
        for (size_t i = 0; i < masked.values.size(); ++i) {
            if (feature_registry()[i].group == SensorGroup::gsr)
                CHECK_FALSE(masked.has(i));
            else
                CHECK(masked.has(i) == fv.has(i));
        }
    }
}

TEST_CASE("normalization examples") {
    BaselineProfile profile;
    profile.means["u01"].assign(feature_count(), 5.0);
    FeatureVector fv;
    fv.window.key = {"u01", 1};
    fv.values.assign(feature_count(), 10.0);

    SUBCASE("divide by the baseline mean") {
        const FeatureVector out = normalize(fv, profile);
        CHECK(out.normalized);
        for (double v : out.values) CHECK(v == doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("self-division gives ones") {
        FeatureVector base = fv;
        base.values.assign(feature_count(), 5.0);
        const FeatureVector out = normalize(base, profile);
        for (double v : out.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("zero baseline mean stays finite under the epsilon policy") {
        profile.means["u01"].assign(feature_count(), 0.0);
        const FeatureVector out = normalize(fv, profile);
        for (double v : out.values) {
            CHECK(std::isfinite(v));
            CHECK(v == doctest::Approx(10.0 / 1e-8));
        }
    }
    SUBCASE("uncovered user is an error") {
        fv.window.key.user_id = "nobody";
        CHECK_THROWS_WITH_AS(normalize(fv, profile), doctest::Contains("nobody"),
                             std::runtime_error);
    }
    SUBCASE("missing baseline mean is an error") {
        profile.means["u01"][3] = std::numeric_limits<double>::quiet_NaN();
        CHECK_THROWS_WITH_AS(normalize(fv, profile), doctest::Contains("missing baseline mean"),
                             std::runtime_error);
    }
}

TEST_CASE("baseline profile equals the arithmetic mean oracle") {
    SynthConfig scfg;
    scfg.n_users = 1;
    scfg.n_trials_per_user = 1;
    scfg.seed = 77;
    const SynthDataset ds = generate(scfg);
    PipelineConfig cfg;
    const BaselineProfile profile = build_baseline(ds.sensors, cfg, Exec::serial);
    REQUIRE(profile.covers("u01"));

    // Recompute per-feature means over baseline windows directly.
    std::vector<double> sum(feature_count(), 0.0);
    std::vector<size_t> cnt(feature_count(), 0);
    for (const auto& [key, _] : ds.sensors.trials) {
        if (!key.is_baseline()) continue;
        for (const Window& w :
             partition(key, ds.sensors.trial_duration_s(key), cfg.window_size_s, cfg.step_size_s)) {
            const FeatureVector fv = extract_window_features(w, ds.sensors, cfg);
            for (size_t i = 0; i < fv.values.size(); ++i) {
                if (!fv.has(i)) continue;
                sum[i] += fv.values[i];
                ++cnt[i];
            }
        }
    }
    const auto& means = profile.means.at("u01");
    for (size_t i = 0; i < feature_count(); ++i) {
        if (cnt[i] == 0) {
            CHECK(std::isnan(means[i]));
        } else {
            CHECK(means[i] == doctest::Approx(sum[i] / static_cast<double>(cnt[i])).epsilon(1e-12));
        }
    }
}

TEST_CASE("user without a baseline session is an error") {
    SynthConfig scfg;
    scfg.n_users = 1;
    scfg.n_trials_per_user = 1;
    scfg.seed = 5;
    SynthDataset ds = generate(scfg);
    for (int b = kBaselineIndexFirst; b <= kBaselineIndexLast; ++b)
        ds.sensors.trials.erase({"u01", b});
    PipelineConfig cfg;
    CHECK_THROWS_WITH_AS(build_baseline(ds.sensors, cfg), doctest::Contains("u01"),
                         std::runtime_error);
}

TEST_CASE("an external beat series replaces ecg detection") {
    SynthConfig scfg;
    scfg.n_users = 1;
    scfg.n_trials_per_user = 1;
    scfg.trial_duration_s = 90;
    scfg.trial_duration_jitter_s = 0;
    scfg.seed = 55;
    const SynthDataset ds = generate(scfg);
    PipelineConfig cfg;
    const TrialKey key{"u01", 1};

    // Constant 750 ms beats supplied externally.
    RRSeries rr;
    rr.key = key;
    rr.t_beats.push_back(0.25);
    while (rr.t_beats.back() < 89.0) {
        rr.rr_ms.push_back(750.0);
        rr.t_beats.push_back(rr.t_beats.back() + 0.75);
    }
    std::map<TrialKey, RRSeries> ext{{key, rr}};

    const Window w = partition(key, 90, 30, 15)[3];
    TrialContext ctx = build_trial_context(ds.sensors, key, cfg, &ext);
    const FeatureVector fv = extract_window_features(w, ds.sensors, ctx, cfg);
    const int idx = feature_index("hrv_mean_nni");
    REQUIRE(fv.has(static_cast<size_t>(idx)));
    CHECK(fv.values[static_cast<size_t>(idx)] == doctest::Approx(750.0));
    CHECK(fv.values[static_cast<size_t>(feature_index("hrv_sdnn"))] == doctest::Approx(0.0));
}

TEST_CASE("serial and parallel featurization agree bit for bit") {
    SynthConfig scfg;
    scfg.n_users = 2;
    scfg.n_trials_per_user = 3;
    scfg.trial_duration_s = 60;
    scfg.trial_duration_jitter_s = 2;
    scfg.seed = 12;
    const SynthDataset ds = generate(scfg);
    PipelineConfig cfg;
    const FeaturizeResult a = featurize_all(ds.sensors, cfg, Exec::serial);
    const FeaturizeResult b = featurize_all(ds.sensors, cfg, Exec::parallel);
    REQUIRE(a.windows.size() == b.windows.size());
    for (size_t i = 0; i < a.windows.size(); ++i) {
        CHECK(a.windows[i].window == b.windows[i].window);
        REQUIRE(a.windows[i].values.size() == b.windows[i].values.size());
        for (size_t j = 0; j < a.windows[i].values.size(); ++j) {
            const double x = a.windows[i].values[j], y = b.windows[i].values[j];
            CHECK(((std::isnan(x) && std::isnan(y)) || x == y));
        }
    }
}
