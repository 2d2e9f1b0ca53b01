#pragma once

// Self-contained tabular binary classifiers: CART decision tree, second-order
// gradient-boosted trees with logistic loss, L2 logistic regression (IRLS)
// and a linear max-margin model (Pegasos-style subgradient descent), plus
// split-gain feature importance with a bagged-forest surrogate for the
// linear models.
//
// Missing values (NaN) are first-class: tree models learn a default routing
// direction per split, linear models impute the training mean.

#include <cstdint>
#include <map>

#include "eml/features.hpp"  // Exec
#include "eml/types.hpp"

namespace eml {

enum class ModelKind { decision_tree, gbt, logistic_regression, max_margin };

const std::string& to_string(ModelKind k);
std::optional<ModelKind> model_kind_from_string(const std::string& s);

struct ModelSpec {
    ModelKind kind = ModelKind::gbt;
    std::map<std::string, double> params;

    static ModelSpec make(const std::string& kind_name);
    explicit ModelSpec(ModelKind k = ModelKind::gbt) : kind(k) {}

    // Unknown hyperparameter names are rejected.
    void set(const std::string& name, double value);
    double get(const std::string& name) const;  // falls back to the kind's default

    bool operator==(const ModelSpec&) const = default;
};

// Row-major feature table; NaN marks an absent value.
struct FeatureMatrix {
    std::vector<std::string> names;
    size_t rows = 0;
    std::vector<double> data;

    size_t cols() const { return names.size(); }
    double at(size_t r, size_t c) const { return data[r * names.size() + c]; }
    double& at(size_t r, size_t c) { return data[r * names.size() + c]; }
    std::span<const double> row(size_t r) const {
        return {data.data() + r * names.size(), names.size()};
    }
};

struct TreeNode {
    int feature = -1;  // -1: leaf
    double threshold = 0;
    bool missing_left = true;
    int left = -1, right = -1;
    double value = 0;  // leaf payload: probability (CART) or raw weight (GBT)
};

struct Tree {
    std::vector<TreeNode> nodes;
};

struct TrainedModel {
    ModelSpec spec;
    std::vector<std::string> feature_names;
    uint64_t seed = 0;
    size_t n_rows = 0;

    // tree models
    std::vector<Tree> trees;
    double learning_rate = 0;
    std::vector<double> split_gain;  // per feature, accumulated during training

    // linear models
    std::vector<double> weights;  // on standardized inputs
    double bias = 0;
    std::vector<double> impute_mean, scale_mean, scale_std;

    std::string serialize() const;  // versioned JSON, deterministic bytes
    static TrainedModel deserialize(const std::string& text);
};

struct Prediction {
    int label = 0;  // 1 = positive class
    double probability = 0;
};

// Deterministic for a fixed (spec, X, y, seed), independent of Exec.
TrainedModel train(const ModelSpec& spec, const FeatureMatrix& x, std::span<const int> y,
                   uint64_t seed, Exec exec = Exec::parallel);

// Columns are matched by name; x must cover the model's feature list
// (values may be NaN).
std::vector<Prediction> predict(const TrainedModel& model, const FeatureMatrix& x);

// Row already aligned to model.feature_names.
Prediction predict_row(const TrainedModel& model, std::span<const double> row);

// Tree models report their accumulated split gain; linear models report the
// gain of a bagged-tree surrogate trained on (x, y). Scores are normalized
// to sum to 1 and sorted descending.
std::vector<std::pair<std::string, double>> feature_importance(const TrainedModel& model,
                                                               const FeatureMatrix& x,
                                                               std::span<const int> y);

}  // namespace eml
