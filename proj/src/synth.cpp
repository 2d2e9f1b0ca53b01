#include "eml/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <sstream>

#include "eml/csv.hpp"
#include "eml/ingest.hpp"
#include "eml/numeric.hpp"

namespace eml {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct UserProfile {
    double imu_bias[2][3];   // placement x axis, m/s^2 (z carries gravity)
    double gyr_bias[2][3];   // deg/s
    double gsr_tonic[3];     // uS per site
    double bpm_offset;
};

struct TrialPlan {
    TrialKey key;
    int user_idx = 0;
    double duration_s = 0;
    bool is_baseline = false;
    bool eml_high = false;
    bool discomfort = false;
    double vol_imu = 1.0;         // noise scale for IMU axes
    double vol_gyr[2][3];         // per placement x axis noise scale
    double stroke_hz = 2.0;       // bowing oscillation
    double stroke_amp = 1.0;
    double hf_amp_bpm = 2.0;      // 0.3 Hz heart-rate modulation depth
    double lf_amp_bpm = 3.0;
    double gsr_event_rate = 0.05; // SCR onsets per second
    uint64_t stream_seed = 0;
};

UserProfile make_user_profile(const SynthConfig& cfg, uint64_t seed) {
    Rng rng(seed);
    UserProfile u{};
    for (int p = 0; p < 2; ++p) {
        for (int a = 0; a < 3; ++a) {
            const double sign = rng.uniform01() < 0.5 ? -1.0 : 1.0;
            u.imu_bias[p][a] = sign * (1.0 + 2.0 * rng.uniform01());
            u.gyr_bias[p][a] = (rng.uniform01() < 0.5 ? -1.0 : 1.0) * (0.5 + 1.5 * rng.uniform01());
        }
        u.imu_bias[p][2] += 9.81;  // gravity on z
    }
    for (int s = 0; s < 3; ++s) u.gsr_tonic[s] = 2.0 + 6.0 * rng.uniform01();
    u.bpm_offset = rng.normal(0.0, 4.0);
    (void)cfg;
    return u;
}

void add_sample(Stream& s, int64_t t_ms, double x, double y, double z) {
    s.t_ms.push_back(t_ms);
    s.x.push_back(x);
    s.y.push_back(y);
    s.z.push_back(z);
}

void add_sample(Stream& s, int64_t t_ms, double v) {
    s.t_ms.push_back(t_ms);
    s.v.push_back(v);
}

// One (user, trial) session: all nine streams.
std::map<SensorType, Stream> synth_session(const SynthConfig& cfg, const UserProfile& user,
                                           const TrialPlan& plan) {
    Rng rng(plan.stream_seed);
    std::map<SensorType, Stream> out;
    const double dur = plan.duration_s;

    // Motion: bias + bowing oscillation + scaled noise.
    const SensorType imu_types[2] = {SensorType::imu_wrist, SensorType::imu_elbow};
    const SensorType gyr_types[2] = {SensorType::gyr_wrist, SensorType::gyr_elbow};
    for (int p = 0; p < 2; ++p) {
        const double amp = plan.stroke_amp * (p == 0 ? 1.0 : 0.55);
        double phase[3] = {rng.uniform(0, kTwoPi), rng.uniform(0, kTwoPi), rng.uniform(0, kTwoPi)};
        Stream& imu = out[imu_types[p]];
        imu.type = imu_types[p];
        const size_t n_imu = static_cast<size_t>(dur * cfg.imu_hz);
        for (size_t i = 0; i < n_imu; ++i) {
            const double t = static_cast<double>(i) / cfg.imu_hz;
            double v[3];
            for (int a = 0; a < 3; ++a)
                v[a] = user.imu_bias[p][a] +
                       amp * std::sin(kTwoPi * plan.stroke_hz * t + phase[a]) +
                       cfg.imu_noise * plan.vol_imu * rng.normal();
            add_sample(imu, static_cast<int64_t>(std::llround(t * 1000.0)), v[0], v[1], v[2]);
        }

        double gphase[3] = {rng.uniform(0, kTwoPi), rng.uniform(0, kTwoPi), rng.uniform(0, kTwoPi)};
        Stream& gyr = out[gyr_types[p]];
        gyr.type = gyr_types[p];
        const size_t n_gyr = static_cast<size_t>(dur * cfg.gyr_hz);
        for (size_t i = 0; i < n_gyr; ++i) {
            const double t = static_cast<double>(i) / cfg.gyr_hz;
            double v[3];
            for (int a = 0; a < 3; ++a)
                v[a] = user.gyr_bias[p][a] +
                       12.0 * amp * std::sin(kTwoPi * plan.stroke_hz * t + gphase[a]) +
                       cfg.gyr_noise * plan.vol_gyr[p][a] * rng.normal();
            add_sample(gyr, static_cast<int64_t>(std::llround(t * 1000.0)), v[0], v[1], v[2]);
        }
    }

    // Heartbeats: integrate-and-fire over a modulated rate, then a synthetic
    // ECG with R bumps, a small T wave, wander and noise.
    std::vector<double> beats;
    {
        const double bpm0 = cfg.base_bpm + user.bpm_offset + (plan.is_baseline ? -5.0 : 0.0);
        const double phi_lf = rng.uniform(0, kTwoPi), phi_hf = rng.uniform(0, kTwoPi);
        const double dt = 1.0 / cfg.ecg_hz;
        double phase = rng.uniform(0.0, 0.9);
        for (double t = 0; t < dur; t += dt) {
            const double rate = bpm0 + plan.lf_amp_bpm * std::sin(kTwoPi * 0.1 * t + phi_lf) +
                                plan.hf_amp_bpm * std::sin(kTwoPi * 0.3 * t + phi_hf);
            phase += rate / 60.0 * dt;
            if (phase >= 1.0) {
                phase -= 1.0;
                const double jitter = 0.002 * rng.normal();
                beats.push_back(std::clamp(t + jitter, 0.0, dur - dt));
            }
        }
        std::sort(beats.begin(), beats.end());

        Stream& ecg = out[SensorType::ecg];
        ecg.type = SensorType::ecg;
        const size_t n_ecg = static_cast<size_t>(dur * cfg.ecg_hz);
        size_t lo = 0;
        const double wander_phi = rng.uniform(0, kTwoPi);
        for (size_t i = 0; i < n_ecg; ++i) {
            const double t = static_cast<double>(i) / cfg.ecg_hz;
            while (lo < beats.size() && beats[lo] < t - 0.5) ++lo;
            double v = 0.05 * std::sin(kTwoPi * 0.3 * t + wander_phi) + cfg.ecg_noise * rng.normal();
            for (size_t b = lo; b < beats.size() && beats[b] < t + 0.5; ++b) {
                const double d = t - beats[b];
                v += std::exp(-d * d / (2 * 0.012 * 0.012));                  // R
                const double dt_t = d - 0.25;
                v += 0.2 * std::exp(-dt_t * dt_t / (2 * 0.04 * 0.04));        // T
            }
            add_sample(ecg, static_cast<int64_t>(std::llround(t * 1000.0)), v);
        }
    }

    // Electrodermal activity: tonic level, slow drift, SCR events, noise.
    const SensorType gsr_types[3] = {SensorType::gsr_shoulder, SensorType::gsr_fingertips,
                                     SensorType::gsr_axilla};
    for (int s = 0; s < 3; ++s) {
        std::vector<std::pair<double, double>> events;  // (onset, amplitude)
        double t_event = 1.0;
        while (t_event < dur) {
            t_event += -std::log(std::max(1e-12, rng.uniform01())) /
                       std::max(1e-6, plan.gsr_event_rate);
            if (t_event < dur)
                events.emplace_back(t_event, (0.1 + 0.4 * rng.uniform01()) * (s == 2 ? 1.4 : 1.0));
        }
        const double drift_phi = rng.uniform(0, kTwoPi);
        Stream& gsr = out[gsr_types[s]];
        gsr.type = gsr_types[s];
        const size_t n = static_cast<size_t>(dur * cfg.gsr_hz);
        for (size_t i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) / cfg.gsr_hz;
            double v = user.gsr_tonic[s] + 0.2 * std::sin(kTwoPi * 0.005 * t + drift_phi) +
                       cfg.gsr_noise * rng.normal();
            for (const auto& [onset, amp] : events) {
                const double d = t - onset;
                if (d <= 0 || d > 15) continue;
                v += amp * (1.0 - std::exp(-d / 0.7)) * std::exp(-d / 3.0);
            }
            add_sample(gsr, static_cast<int64_t>(std::llround(t * 1000.0)), v);
        }
    }

    // Respiration: plain slow oscillation.
    {
        Stream& resp = out[SensorType::resp];
        resp.type = SensorType::resp;
        const double phi = rng.uniform(0, kTwoPi);
        const size_t n = static_cast<size_t>(dur * cfg.resp_hz);
        for (size_t i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) / cfg.resp_hz;
            add_sample(resp, static_cast<int64_t>(std::llround(t * 1000.0)),
                       std::sin(kTwoPi * 0.25 * t + phi) + 0.05 * rng.normal());
        }
    }
    return out;
}

std::string user_name(int u) {
    std::ostringstream os;
    os << "u" << (u + 1 < 10 ? "0" : "") << (u + 1);
    return os.str();
}

}  // namespace

void SynthConfig::validate() const {
    if (n_users < 1) throw std::invalid_argument("synth: need at least 1 user");
    if (n_trials_per_user < 1 || n_trials_per_user > 29)
        throw std::invalid_argument("synth: trials per user must be in 1..29");
    if (trial_duration_s <= 0 || baseline_pre_s <= 0 || baseline_post_s <= 0)
        throw std::invalid_argument("synth: durations must be positive");
    for (double r : {imu_hz, gyr_hz, gsr_hz, ecg_hz, resp_hz})
        if (r <= 0) throw std::invalid_argument("synth: sampling rates must be positive");
    if (ecg_hz < 100) throw std::invalid_argument("synth: ECG rate must be >= 100 Hz");
    for (double e : {eml_motion_volatility, discomfort_gyr_variance, hrv_hf_shift})
        if (e < 0) throw std::invalid_argument("synth: effect strengths must be >= 0");
    if (discomfort_rate < 0 || discomfort_rate > 1)
        throw std::invalid_argument("synth: discomfort rate must be in [0,1]");
}

SynthDataset generate(const SynthConfig& cfg, Exec exec) {
    cfg.validate();

    std::vector<UserProfile> users;
    for (int u = 0; u < cfg.n_users; ++u)
        users.push_back(make_user_profile(cfg, derive_seed(cfg.seed, {1, static_cast<uint64_t>(u)})));

    // Latent states and trial plans first (serial, cheap, deterministic).
    std::vector<TrialPlan> plans;
    std::vector<double> eta;  // engagement latent per excerpt trial, plan order
    std::vector<size_t> excerpt_plan;
    for (int u = 0; u < cfg.n_users; ++u) {
        for (int t = 1; t <= cfg.n_trials_per_user; ++t) {
            Rng rng(derive_seed(cfg.seed, {2, static_cast<uint64_t>(u), static_cast<uint64_t>(t)}));
            TrialPlan p;
            p.key = {user_name(u), t};
            p.user_idx = u;
            p.duration_s = cfg.trial_duration_s +
                           cfg.trial_duration_jitter_s * (2.0 * rng.uniform01() - 1.0);
            p.discomfort = rng.uniform01() < cfg.discomfort_rate;
            p.eml_high = p.discomfort ? rng.uniform01() >= cfg.eml_low_given_discomfort
                                      : rng.uniform01() < 0.5;

            // Discomfort masquerades as engagement on every channel except
            // the gyroscope: arousal lifts motion volatility, HF modulation
            // and electrodermal activity alike. What separates the two
            // states is a tremor-like excess in total GYR variance whose
            // distribution across the six axes is random per trial, so the
            // sum is cleanly separable while any single axis stays
            // ambiguous.
            const bool aroused = p.eml_high || p.discomfort;
            p.vol_imu = (1.0 + cfg.eml_motion_volatility * (aroused ? 1.0 : 0.0)) *
                        std::exp(0.08 * rng.normal());
            double tremor_share[2][3] = {};
            if (p.discomfort && cfg.discomfort_gyr_variance > 0) {
                // Heavy-tailed weights concentrate the tremor on one or two
                // axes that vary from trial to trial.
                double w[6], wsum = 0;
                for (double& x : w) {
                    x = std::exp(2.5 * rng.normal());
                    wsum += x;
                }
                const double total =
                    6.0 * cfg.discomfort_gyr_variance * (0.7 + 0.6 * rng.uniform01());
                for (int k = 0; k < 6; ++k) tremor_share[k / 3][k % 3] = total * w[k] / wsum;
            }
            for (int pl = 0; pl < 2; ++pl)
                for (int a = 0; a < 3; ++a) {
                    const double base = std::exp(2.0 * cfg.gyr_jitter * rng.normal());
                    p.vol_gyr[pl][a] = std::sqrt(base + tremor_share[pl][a]);
                }
            p.stroke_hz = 1.5 + rng.uniform01();
            p.stroke_amp = 0.8 + 0.4 * rng.uniform01();
            p.hf_amp_bpm = 2.0 * (1.0 + cfg.hrv_hf_shift * (aroused ? 1.0 : 0.0));
            p.gsr_event_rate = 0.05 * (1.0 + cfg.gsr_eml_boost * (aroused ? 1.0 : 0.0));
            p.stream_seed = derive_seed(cfg.seed, {3, static_cast<uint64_t>(u), static_cast<uint64_t>(t)});

            eta.push_back((p.eml_high ? 1.0 : -1.0) + (p.discomfort ? -0.8 : 0.0) +
                          0.35 * rng.normal());
            excerpt_plan.push_back(plans.size());
            plans.push_back(p);
        }
        // Baseline sessions: stationary standing, calm physiology.
        for (int b = 0; b < 4; ++b) {
            Rng rng(derive_seed(cfg.seed, {4, static_cast<uint64_t>(u), static_cast<uint64_t>(b)}));
            TrialPlan p;
            p.key = {user_name(u), kBaselineIndexFirst + b};
            p.user_idx = u;
            p.is_baseline = true;
            p.duration_s = b < 2 ? cfg.baseline_pre_s : cfg.baseline_post_s;
            p.vol_imu = 0.25;
            for (int pl = 0; pl < 2; ++pl)
                for (int a = 0; a < 3; ++a) p.vol_gyr[pl][a] = 0.25;
            p.stroke_amp = 0.04;  // postural sway only
            p.stroke_hz = 0.3;
            p.hf_amp_bpm = 2.5;
            p.gsr_event_rate = 0.02;
            p.stream_seed = derive_seed(cfg.seed, {5, static_cast<uint64_t>(u), static_cast<uint64_t>(b)});
            plans.push_back(p);
        }
    }

    // Questionnaire from a single-factor model over the standardized latent.
    SynthDataset out;
    {
        const double mu = mean(eta);
        const double sd = std::max(1e-9, stddev_pop(eta));
        const double loadings[3] = {cfg.qnr_loading_calm, cfg.qnr_loading_ease,
                                    cfg.qnr_loading_nervous};
        for (size_t i = 0; i < excerpt_plan.size(); ++i) {
            const TrialPlan& p = plans[excerpt_plan[i]];
            Rng rng(derive_seed(cfg.seed, {6, static_cast<uint64_t>(excerpt_plan[i])}));
            const double z = (eta[i] - mu) / sd;
            int item[3];
            for (int q = 0; q < 3; ++q) {
                const double noisy = loadings[q] * z +
                                     std::sqrt(std::max(0.0, 1.0 - loadings[q] * loadings[q])) *
                                         rng.normal();
                item[q] = std::clamp(static_cast<int>(std::lround(5.5 + cfg.qnr_scale * noisy)), 1, 10);
            }
            QuestionnaireRecord rec;
            rec.key = p.key;
            rec.feel_calm = item[0];
            rec.feel_at_ease = item[1];
            rec.feel_nervous = 11 - item[2];
            rec.tech_diff = std::clamp(
                static_cast<int>(std::lround(5.5 + 1.8 * rng.normal() - 0.5 * z)), 1, 10);
            rec.emo_expr = std::clamp(
                static_cast<int>(std::lround(5.5 + 1.8 * rng.normal() + 0.3 * z)), 1, 10);
            rec.feel_uncomfortable =
                p.discomfort ? 9 + static_cast<int>(rng.uniform_int(2))
                             : 1 + static_cast<int>(rng.uniform_int(8));
            out.questionnaire.push_back(rec);
            out.ground_truth.push_back({p.key, p.eml_high, p.discomfort});
        }
    }

    // Streams, parallel per session under per-trial derived seeds.
    std::vector<std::map<SensorType, Stream>> sessions(plans.size());
    const int n_plans = static_cast<int>(plans.size());
    if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
        for (int i = 0; i < n_plans; ++i) {
            const TrialPlan& p = plans[static_cast<size_t>(i)];
            sessions[static_cast<size_t>(i)] =
                synth_session(cfg, users[static_cast<size_t>(p.user_idx)], p);
        }
    } else {
        for (int i = 0; i < n_plans; ++i) {
            const TrialPlan& p = plans[static_cast<size_t>(i)];
            sessions[static_cast<size_t>(i)] =
                synth_session(cfg, users[static_cast<size_t>(p.user_idx)], p);
        }
    }

    for (size_t i = 0; i < plans.size(); ++i)
        out.sensors.trials[plans[i].key] = std::move(sessions[i]);
    return out;
}

std::string write_ground_truth_csv(std::span<const GroundTruth> gt) {
    std::ostringstream os;
    os << "user_id,trial_index,latent_eml,latent_discomfort\n";
    for (const auto& g : gt)
        os << g.key.user_id << ',' << g.key.trial_index << ',' << (g.eml_high ? "high" : "low")
           << ',' << (g.discomfort_high ? "high" : "normal") << '\n';
    return os.str();
}

void write_dataset(const SynthDataset& ds, const std::string& dir) {
    std::filesystem::create_directories(dir);
    csv::write_file(dir + "/sensors.csv", write_sensor_csv(ds.sensors));
    csv::write_file(dir + "/questionnaire.csv", write_questionnaire_csv(ds.questionnaire));
    csv::write_file(dir + "/ground_truth.csv", write_ground_truth_csv(ds.ground_truth));
}

}  // namespace eml
