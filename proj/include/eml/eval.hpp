#pragma once

// Evaluation harness: grouped k-fold cross-validation with a leakage audit,
// confusion-matrix metrics, step-size sweeps, bootstrap significance and
// sensor-subset ablation.

#include "eml/labeling.hpp"
#include "eml/pipeline.hpp"

namespace eml {

// Binary confusion with `high` as the positive class.
struct Confusion {
    long tp = 0, fn = 0, fp = 0, tn = 0;

    long total() const { return tp + fn + fp + tn; }
    void add(bool truth_high, bool pred_high) {
        if (truth_high)
            (pred_high ? tp : fn) += 1;
        else
            (pred_high ? fp : tn) += 1;
    }
};

struct MetricSet {
    double f1 = 0;        // positive class `high`
    double macro_f1 = 0;  // mean of per-class F1
    double accuracy = 0;
    double correct_high = 0;  // row-wise percent correct per class
    double correct_low = 0;
};

MetricSet metrics(const Confusion& confusion);

struct FoldResult {
    int fold = 0;
    bool skipped = false;
    std::string note;
    Confusion confusion;
    double f1 = 0, accuracy = 0;
    double stage1_accuracy = 0;  // discomfort stage, against discomfort labels
    std::vector<int> truth, predicted;  // 1 = high, window order within the fold
};

struct CvReport {
    std::vector<FoldResult> folds;
    double f1_mean = 0, f1_sd = 0;
    double accuracy_mean = 0, accuracy_sd = 0;
    double stage1_accuracy_mean = 0;
    int skipped_folds = 0;
};

struct CvOptions {
    const ModelSpec* stage2_override = nullptr;
    const std::vector<SensorGroup>* groups = nullptr;
};

// Each fold is the test set exactly once; training uses train_two_stage.
// The TrialKey disjointness of train and test is re-asserted per fold; a
// fold whose training set lacks a class is skipped and reported.
CvReport cross_validate(std::span<const LabeledWindow> dataset, const PipelineConfig& cfg,
                        uint64_t seed, Exec exec = Exec::parallel, const CvOptions& opts = {});

// Featurize + label + assign folds from raw streams. The building block for
// eval/sweep/ablate runs.
struct BuiltDataset {
    std::vector<LabeledWindow> windows;
    BaselineProfile baseline;
    FoldAssignment folds;
    std::vector<std::string> warnings;
};
BuiltDataset build_dataset(const RawDataset& raw, const PipelineConfig& cfg,
                           Exec exec = Exec::parallel);

struct SweepRow {
    double step_s = 0;
    double f1_mean = 0;
    double accuracy_mean = 0;
};

// Full re-windowing, re-featurization, re-labeling and re-CV per step size.
std::vector<SweepRow> sweep_step_size(const RawDataset& raw, std::span<const double> steps,
                                      const PipelineConfig& cfg, Exec exec = Exec::parallel);

// One-sided non-parametric bootstrap of the F1 difference: resamples indices
// with replacement and returns the fraction of resamples where F1(a) <=
// F1(b), testing whether a beats b.
double bootstrap_compare(std::span<const int> preds_a, std::span<const int> preds_b,
                         std::span<const int> truth, int b, uint64_t seed);

struct AblationCell {
    std::string algorithm;
    std::string subset;
    double f1_mean = 0;
    double accuracy_mean = 0;
};

struct SignificanceResult {
    std::string pair;  // "a vs b"
    double p_value = 1;
};

// Bootstrap comparison of the first algorithm against each of the others on
// pooled out-of-fold predictions (all sensors). Small p: the first wins.
std::vector<SignificanceResult> compare_algorithms(std::span<const LabeledWindow> dataset,
                                                   std::span<const ModelSpec> algorithms,
                                                   const PipelineConfig& cfg, uint64_t seed,
                                                   Exec exec = Exec::parallel);

std::vector<std::vector<SensorGroup>> default_ablation_subsets();
std::string subset_name(const std::vector<SensorGroup>& subset);

// Cross-validated F1 per (algorithm, sensor subset), features filtered by
// group before training.
std::vector<AblationCell> ablation(std::span<const LabeledWindow> dataset,
                                   std::span<const std::vector<SensorGroup>> subsets,
                                   std::span<const ModelSpec> algorithms,
                                   const PipelineConfig& cfg, uint64_t seed,
                                   Exec exec = Exec::parallel);

}  // namespace eml
