#pragma once

// Statistics that produce the training labels: scale reliability, principal
// factor extraction with per-observation scores, engagement binarization,
// discomfort binning, label interpolation across windows, and the Type-III
// ANOVA/ANCOVA validation suite.

#include <map>

#include "eml/numeric.hpp"
#include "eml/types.hpp"
#include "eml/windowing.hpp"

namespace eml {

// Cronbach's alpha with population variances:
//   alpha = k/(k-1) * (1 - sum(var_i) / var_total)
double cronbach_alpha(const Matrix& items);

struct FactorResult {
    std::vector<double> eigenvalues;    // of the item correlation matrix, descending
    int retained = 0;                   // eigenvalues > 1
    Matrix loadings;                    // item x retained factor
    std::vector<double> communalities;  // per item, over retained factors
    std::vector<double> scores;         // per observation, unit variance
};

// Principal component extraction on the item correlation matrix. Loadings
// are eigenvector * sqrt(eigenvalue) with sign chosen so each factor loads
// positively on balance; scores project standardized items on the first
// retained component, rescaled to unit variance.
FactorResult extract_factor(const Matrix& items);

// Factor scores of (feel_calm, feel_at_ease, 11 - feel_nervous); fills
// eml_score on each record and returns the scores in record order.
std::vector<double> eml_scores(std::vector<QuestionnaireRecord>& qnr);

// Above the mean -> high; ties and below -> low.
std::vector<EmlClass> binarize_eml(std::span<const double> scores);

// Ratings 1..8 -> normal, 9..10 -> high.
DiscomfortClass bin_discomfort(int rating);

struct TrialLabels {
    double eml_score = 0;
    EmlClass eml = EmlClass::low;
    DiscomfortClass discomfort = DiscomfortClass::normal;
};

// Full labeling pass over the questionnaire: factor scores, the EML mean
// split (global by default, per-user when requested) and discomfort bins.
std::map<TrialKey, TrialLabels> label_trials(std::vector<QuestionnaireRecord>& qnr,
                                             bool per_user_split = false);

// Each window inherits its trial's labels unchanged; fold comes from the
// assignment when given. Throws on any window whose key is unlabeled.
std::vector<LabeledWindow> interpolate_labels(const std::map<TrialKey, TrialLabels>& labels,
                                              std::span<const FeatureVector> windows,
                                              const FoldAssignment* folds = nullptr);

// ---------------------------------------------------------------------------
// Type-III ANOVA / ANCOVA via effect coding and full-vs-reduced comparison
// ---------------------------------------------------------------------------

struct AnovaRow {
    std::string source;
    double type3_ss = 0;
    double df = 0;
    double mean_square = 0;
    double f = 0;
    double p = 1;
};

struct AnovaTable {
    std::vector<AnovaRow> rows;  // corrected_model, effects..., error, corrected_total
    double r_squared = 0;
    std::map<std::string, double> eta_squared;  // classical: SS / corrected total SS
    double sse = 0;
    double df_error = 0;
    double ss_corrected_total = 0;

    const AnovaRow& row(const std::string& source) const;
};

struct AnovaNames {
    std::string factor_a = "factor_a";
    std::string factor_b = "factor_b";
    std::string covariate = "covariate";
};

AnovaTable two_way_anova(std::span<const double> y, std::span<const std::string> factor_a,
                         std::span<const std::string> factor_b, const AnovaNames& names = {});

AnovaTable ancova(std::span<const double> y, std::span<const std::string> factor_a,
                  std::span<const std::string> factor_b, std::span<const double> covariate,
                  const AnovaNames& names = {});

}  // namespace eml
