// Benchmark of the data-parallel kernels: per-window feature extraction and
// gradient-boosted training, serial reference versus the OpenMP path.
// Outputs one line per kernel with both timings; the result checksums must
// match (the parallel path is bit-identical by construction).

#include <chrono>
#include <cmath>
#include <cstdio>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "eml/eval.hpp"
#include "eml/features.hpp"
#include "eml/pipeline.hpp"
#include "eml/synth.hpp"

using Clock = std::chrono::steady_clock;

static double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

static double checksum(const std::vector<eml::FeatureVector>& windows) {
    double s = 0;
    for (const auto& fv : windows)
        for (double v : fv.values)
            if (!std::isnan(v)) s += v;
    return s;
}

int main(int argc, char** argv) {
    int users = 4;
    if (argc > 1) users = std::atoi(argv[1]);

#ifdef _OPENMP
    std::printf("openmp: %d threads\n", omp_get_max_threads());
#else
    std::printf("openmp: not compiled in\n");
#endif

    eml::SynthConfig scfg;
    scfg.n_users = users;
    scfg.seed = 42;
    std::printf("generating %d users x %d trials...\n", scfg.n_users, scfg.n_trials_per_user);
    const eml::SynthDataset ds = eml::generate(scfg);

    eml::PipelineConfig cfg;

    auto t0 = Clock::now();
    const auto serial = eml::featurize_all(ds.sensors, cfg, eml::Exec::serial);
    const double t_serial = seconds_since(t0);

    t0 = Clock::now();
    const auto parallel = eml::featurize_all(ds.sensors, cfg, eml::Exec::parallel);
    const double t_parallel = seconds_since(t0);

    const double cs = checksum(serial.windows), cp = checksum(parallel.windows);
    std::printf("featurize   serial %7.3fs   openmp %7.3fs   speedup %.2fx   checksums %s\n",
                t_serial, t_parallel, t_serial / t_parallel,
                cs == cp ? "match" : "MISMATCH");

    // Training benchmark on the extracted windows.
    auto qnr = ds.questionnaire;
    const auto labels = eml::label_trials(qnr, false);
    std::vector<eml::TrialKey> keys;
    for (const auto& fv : serial.windows)
        if (std::find(keys.begin(), keys.end(), fv.window.key) == keys.end())
            keys.push_back(fv.window.key);
    const auto folds = eml::assign_folds(keys, cfg.k_folds, cfg.rng_seed);
    const auto dataset = eml::interpolate_labels(labels, serial.windows, &folds);

    t0 = Clock::now();
    const auto model_serial = eml::train_two_stage(dataset, cfg, 7, eml::Exec::serial);
    const double g_serial = seconds_since(t0);

    t0 = Clock::now();
    const auto model_parallel = eml::train_two_stage(dataset, cfg, 7, eml::Exec::parallel);
    const double g_parallel = seconds_since(t0);

    const bool same = model_serial.eml_model.serialize() == model_parallel.eml_model.serialize();
    std::printf("gbt train   serial %7.3fs   openmp %7.3fs   speedup %.2fx   models %s\n",
                g_serial, g_parallel, g_serial / g_parallel, same ? "identical" : "DIFFER");
    return same && cs == cp ? 0 : 1;
}
