#include "eml/eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "eml/numeric.hpp"

namespace eml {

namespace {

double f1_binary(long tp, long fp, long fn) {
    const double denom = static_cast<double>(2 * tp + fp + fn);
    return denom > 0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
}

double f1_of_preds(std::span<const int> preds, std::span<const int> truth,
                   std::span<const size_t> idx) {
    long tp = 0, fp = 0, fn = 0;
    for (size_t i : idx) {
        if (truth[i] && preds[i]) ++tp;
        else if (!truth[i] && preds[i]) ++fp;
        else if (truth[i] && !preds[i]) ++fn;
    }
    return f1_binary(tp, fp, fn);
}

std::pair<double, double> mean_sd(std::span<const double> v) {
    if (v.empty()) return {0.0, 0.0};
    const double mu = mean(v);
    return {mu, std::sqrt(variance_pop(v, mu))};
}

}  // namespace

MetricSet metrics(const Confusion& c) {
    if (c.total() <= 0) throw std::invalid_argument("metrics: empty confusion matrix");
    MetricSet m;
    m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
    m.f1 = f1_binary(c.tp, c.fp, c.fn);
    const double f1_low = f1_binary(c.tn, c.fn, c.fp);
    m.macro_f1 = 0.5 * (m.f1 + f1_low);
    m.correct_high = c.tp + c.fn > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
    m.correct_low = c.tn + c.fp > 0 ? static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp) : 0.0;
    return m;
}

CvReport cross_validate(std::span<const LabeledWindow> dataset, const PipelineConfig& cfg,
                        uint64_t seed, Exec exec, const CvOptions& opts) {
    if (dataset.empty()) throw std::invalid_argument("cross_validate: empty dataset");
    int k = 0;
    for (const auto& lw : dataset) k = std::max(k, lw.fold + 1);
    if (k < 2) throw std::invalid_argument("cross_validate: need at least 2 folds assigned");

    PipelineConfig fold_cfg = cfg;
    if (opts.stage2_override) fold_cfg.stage2_kind = to_string(opts.stage2_override->kind);

    CvReport report;
    std::vector<double> f1s, accs, s1accs;
    for (int f = 0; f < k; ++f) {
        FoldResult fr;
        fr.fold = f;

        std::vector<LabeledWindow> train_set;
        std::vector<const LabeledWindow*> test_set;
        for (const auto& lw : dataset)
            if (lw.fold == f)
                test_set.push_back(&lw);
            else
                train_set.push_back(lw);

        if (test_set.empty()) {
            fr.skipped = true;
            fr.note = "empty test fold";
            report.folds.push_back(std::move(fr));
            ++report.skipped_folds;
            continue;
        }

        // Leakage audit: train and test must not share a trial.
        std::set<TrialKey> train_keys, test_keys;
        for (const auto& lw : train_set) train_keys.insert(lw.key());
        for (const auto* lw : test_set) test_keys.insert(lw->key());
        for (const auto& key : test_keys)
            if (train_keys.contains(key))
                throw std::logic_error("fold leakage: " + key.str() +
                                       " appears in both train and test");

        size_t eml_high = 0, disc_high = 0;
        for (const auto& lw : train_set) {
            eml_high += lw.eml_class == EmlClass::high;
            disc_high += lw.discomfort_class == DiscomfortClass::high;
        }
        const bool disc_degenerate = disc_high == 0 || disc_high == train_set.size();
        if (eml_high == 0 || eml_high == train_set.size() ||
            (disc_degenerate && fold_cfg.use_discomfort_stage)) {
            fr.skipped = true;
            fr.note = "training fold lacks a class";
            report.folds.push_back(std::move(fr));
            ++report.skipped_folds;
            continue;
        }

        const PipelineModel model = train_two_stage(
            train_set, fold_cfg, derive_seed(seed, {0xCF, static_cast<uint64_t>(f)}), exec,
            opts.groups);

        long s1_correct = 0;
        for (const auto* lw : test_set) {
            const WindowPrediction wp = predict_window(model, lw->fv);
            const bool truth_high = lw->eml_class == EmlClass::high;
            const bool pred_high = wp.eml == EmlClass::high;
            fr.confusion.add(truth_high, pred_high);
            fr.truth.push_back(truth_high ? 1 : 0);
            fr.predicted.push_back(pred_high ? 1 : 0);
            const bool disc_truth = lw->discomfort_class == DiscomfortClass::high;
            if ((wp.discomfort == DiscomfortClass::high) == disc_truth) ++s1_correct;
        }
        const MetricSet m = metrics(fr.confusion);
        fr.f1 = m.f1;
        fr.accuracy = m.accuracy;
        fr.stage1_accuracy = static_cast<double>(s1_correct) / static_cast<double>(test_set.size());
        f1s.push_back(fr.f1);
        accs.push_back(fr.accuracy);
        s1accs.push_back(fr.stage1_accuracy);
        report.folds.push_back(std::move(fr));
    }

    std::tie(report.f1_mean, report.f1_sd) = mean_sd(f1s);
    std::tie(report.accuracy_mean, report.accuracy_sd) = mean_sd(accs);
    report.stage1_accuracy_mean = s1accs.empty() ? 0.0 : mean(s1accs);
    return report;
}

BuiltDataset build_dataset(const RawDataset& raw, const PipelineConfig& cfg, Exec exec) {
    BuiltDataset out;
    FeaturizeResult feats = featurize_all(raw.sensors, cfg, exec);
    out.baseline = std::move(feats.baseline);
    out.warnings = std::move(feats.warnings);

    std::vector<QuestionnaireRecord> qnr = raw.questionnaire;
    const auto labels = label_trials(qnr, cfg.per_user_eml_split);

    std::vector<TrialKey> keys;
    for (const auto& fv : feats.windows) {
        if (!labels.contains(fv.window.key))
            throw std::runtime_error("no questionnaire labels for trial " + fv.window.key.str());
        if (std::find(keys.begin(), keys.end(), fv.window.key) == keys.end())
            keys.push_back(fv.window.key);
    }
    out.folds = cfg.split_mode == SplitMode::leave_one_user_out
                    ? assign_folds_leave_one_user_out(keys)
                    : assign_folds(keys, cfg.k_folds, cfg.rng_seed);
    out.windows = interpolate_labels(labels, feats.windows, &out.folds);
    return out;
}

std::vector<SweepRow> sweep_step_size(const RawDataset& raw, std::span<const double> steps,
                                      const PipelineConfig& cfg, Exec exec) {
    for (double s : steps)
        if (!(s > 0) || s > cfg.window_size_s)
            throw std::invalid_argument("sweep: step must lie in (0, window]");

    std::vector<SweepRow> out;
    for (double s : steps) {
        PipelineConfig c = cfg;
        c.step_size_s = s;
        const BuiltDataset ds = build_dataset(raw, c, exec);
        const CvReport cv = cross_validate(ds.windows, c, c.rng_seed, exec);
        out.push_back({s, cv.f1_mean, cv.accuracy_mean});
    }
    return out;
}

double bootstrap_compare(std::span<const int> preds_a, std::span<const int> preds_b,
                         std::span<const int> truth, int b, uint64_t seed) {
    if (preds_a.size() != preds_b.size() || preds_a.size() != truth.size())
        throw std::invalid_argument("bootstrap_compare: length mismatch");
    if (preds_a.empty()) throw std::invalid_argument("bootstrap_compare: empty inputs");
    if (b < 1000) throw std::invalid_argument("bootstrap_compare: need at least 1000 resamples");

    Rng rng(derive_seed(seed, {0xB007}));
    const size_t n = truth.size();
    std::vector<size_t> idx(n);
    long count = 0;
    for (int rep = 0; rep < b; ++rep) {
        for (size_t i = 0; i < n; ++i) idx[i] = static_cast<size_t>(rng.uniform_int(n));
        if (f1_of_preds(preds_a, truth, idx) <= f1_of_preds(preds_b, truth, idx)) ++count;
    }
    return static_cast<double>(count) / static_cast<double>(b);
}

std::vector<std::vector<SensorGroup>> default_ablation_subsets() {
    using G = SensorGroup;
    return {{G::imu},         {G::gyr},          {G::gsr},
            {G::hrv},         {G::imu, G::gyr},  {G::gsr, G::hrv},
            {G::imu, G::gyr, G::gsr, G::hrv}};
}

std::string subset_name(const std::vector<SensorGroup>& subset) {
    if (subset.size() == 4) return "ALL";
    std::string name;
    for (const auto& g : subset) {
        if (!name.empty()) name += "+";
        name += to_string(g);
    }
    return name;
}

std::vector<SignificanceResult> compare_algorithms(std::span<const LabeledWindow> dataset,
                                                   std::span<const ModelSpec> algorithms,
                                                   const PipelineConfig& cfg, uint64_t seed,
                                                   Exec exec) {
    if (algorithms.size() < 2)
        throw std::invalid_argument("compare_algorithms: need at least 2 algorithms");

    // Pooled out-of-fold predictions per algorithm, window order fixed by
    // (fold, position) so vectors align across algorithms.
    std::vector<std::vector<int>> preds;
    std::vector<int> truth;
    for (size_t a = 0; a < algorithms.size(); ++a) {
        CvOptions opts;
        opts.stage2_override = &algorithms[a];
        const CvReport cv = cross_validate(dataset, cfg, seed, exec, opts);
        std::vector<int> p;
        std::vector<int> t;
        for (const auto& fold : cv.folds) {
            if (fold.skipped) continue;
            p.insert(p.end(), fold.predicted.begin(), fold.predicted.end());
            t.insert(t.end(), fold.truth.begin(), fold.truth.end());
        }
        if (a == 0) truth = std::move(t);
        else if (t.size() != truth.size())
            throw std::runtime_error("compare_algorithms: fold structure differs between runs");
        preds.push_back(std::move(p));
    }

    std::vector<SignificanceResult> out;
    for (size_t a = 1; a < algorithms.size(); ++a) {
        SignificanceResult r;
        r.pair = to_string(algorithms[0].kind) + " vs " + to_string(algorithms[a].kind);
        r.p_value = bootstrap_compare(preds[0], preds[a], truth, cfg.bootstrap_b,
                                      derive_seed(seed, {0x51, a}));
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<AblationCell> ablation(std::span<const LabeledWindow> dataset,
                                   std::span<const std::vector<SensorGroup>> subsets,
                                   std::span<const ModelSpec> algorithms,
                                   const PipelineConfig& cfg, uint64_t seed, Exec exec) {
    if (subsets.empty()) throw std::invalid_argument("ablation: no subsets");
    if (algorithms.empty()) throw std::invalid_argument("ablation: no algorithms");

    std::vector<AblationCell> out;
    for (const auto& spec : algorithms) {
        for (const auto& subset : subsets) {
            if (subset.empty()) throw std::invalid_argument("ablation: empty sensor subset");
            CvOptions opts;
            opts.stage2_override = &spec;
            opts.groups = &subset;
            const CvReport cv = cross_validate(dataset, cfg, seed, exec, opts);
            out.push_back({to_string(spec.kind), subset_name(subset), cv.f1_mean,
                           cv.accuracy_mean});
        }
    }
    return out;
}

}  // namespace eml
