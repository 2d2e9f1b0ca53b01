#include "eml/labeling.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace eml {

namespace {

// Standardize columns with population moments; throws on a constant item.
Matrix standardized(const Matrix& items) {
    const size_t n = items.rows, k = items.cols;
    if (n < 2) throw std::invalid_argument("need at least 2 observations");
    Matrix z(n, k);
    for (size_t j = 0; j < k; ++j) {
        double mu = 0;
        for (size_t i = 0; i < n; ++i) mu += items(i, j);
        mu /= static_cast<double>(n);
        double var = 0;
        for (size_t i = 0; i < n; ++i) var += (items(i, j) - mu) * (items(i, j) - mu);
        var /= static_cast<double>(n);
        if (var <= 0) throw std::runtime_error("zero-variance item " + std::to_string(j));
        const double sd = std::sqrt(var);
        for (size_t i = 0; i < n; ++i) z(i, j) = (items(i, j) - mu) / sd;
    }
    return z;
}

}  // namespace

double cronbach_alpha(const Matrix& items) {
    const size_t n = items.rows, k = items.cols;
    if (k < 2) throw std::invalid_argument("cronbach_alpha: need at least 2 items");
    if (n < 2) throw std::invalid_argument("cronbach_alpha: need at least 2 observations");

    double sum_item_var = 0;
    for (size_t j = 0; j < k; ++j) {
        std::vector<double> col(n);
        for (size_t i = 0; i < n; ++i) col[i] = items(i, j);
        const double v = variance_pop(col);
        if (v <= 0) throw std::runtime_error("zero-variance item " + std::to_string(j));
        sum_item_var += v;
    }
    std::vector<double> totals(n, 0.0);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < k; ++j) totals[i] += items(i, j);
    const double total_var = variance_pop(totals);
    return static_cast<double>(k) / static_cast<double>(k - 1) * (1.0 - sum_item_var / total_var);
}

FactorResult extract_factor(const Matrix& items) {
    const size_t n = items.rows, k = items.cols;
    if (k < 2) throw std::invalid_argument("extract_factor: need at least 2 items");
    const Matrix z = standardized(items);

    Matrix corr(k, k);
    for (size_t a = 0; a < k; ++a)
        for (size_t b = a; b < k; ++b) {
            double s = 0;
            for (size_t i = 0; i < n; ++i) s += z(i, a) * z(i, b);
            corr(a, b) = corr(b, a) = s / static_cast<double>(n);
        }

    const EigenSym eig = eigen_symmetric(corr);

    FactorResult out;
    out.eigenvalues = eig.values;
    // Kaiser criterion, strictly greater than one; the guard keeps exact-unit
    // eigenvalues (independent items) from slipping through on rounding.
    for (double v : eig.values)
        if (v > 1.0 + 1e-9) ++out.retained;
    if (out.retained == 0) throw std::runtime_error("no factor retained");

    const size_t r = static_cast<size_t>(out.retained);
    out.loadings = Matrix(k, r);
    for (size_t j = 0; j < r; ++j) {
        double colsum = 0;
        for (size_t i = 0; i < k; ++i) colsum += eig.vectors(i, j);
        const double sign = colsum < 0 ? -1.0 : 1.0;
        const double root = std::sqrt(std::max(0.0, eig.values[j]));
        for (size_t i = 0; i < k; ++i) out.loadings(i, j) = sign * eig.vectors(i, j) * root;
    }
    out.communalities.assign(k, 0.0);
    for (size_t i = 0; i < k; ++i)
        for (size_t j = 0; j < r; ++j) out.communalities[i] += out.loadings(i, j) * out.loadings(i, j);

    // Scores: standardized items projected on the first retained component.
    double colsum = 0;
    for (size_t i = 0; i < k; ++i) colsum += eig.vectors(i, 0);
    const double sign = colsum < 0 ? -1.0 : 1.0;
    out.scores.assign(n, 0.0);
    for (size_t i = 0; i < n; ++i) {
        double s = 0;
        for (size_t j = 0; j < k; ++j) s += z(i, j) * eig.vectors(j, 0);
        out.scores[i] = sign * s;
    }
    const double sd = stddev_pop(out.scores);
    if (sd > 0)
        for (double& s : out.scores) s /= sd;
    return out;
}

std::vector<double> eml_scores(std::vector<QuestionnaireRecord>& qnr) {
    if (qnr.empty()) throw std::invalid_argument("eml_scores: no records");
    Matrix items(qnr.size(), 3);
    for (size_t i = 0; i < qnr.size(); ++i) {
        items(i, 0) = qnr[i].feel_calm;
        items(i, 1) = qnr[i].feel_at_ease;
        items(i, 2) = 11 - qnr[i].feel_nervous;  // inverted nervousness on the 1..10 scale
    }
    FactorResult fr = extract_factor(items);
    for (size_t i = 0; i < qnr.size(); ++i) qnr[i].eml_score = fr.scores[i];
    return std::move(fr.scores);
}

std::vector<EmlClass> binarize_eml(std::span<const double> scores) {
    if (scores.size() < 2) throw std::invalid_argument("binarize_eml: need at least 2 scores");
    const double mu = mean(scores);
    std::vector<EmlClass> out(scores.size());
    for (size_t i = 0; i < scores.size(); ++i)
        out[i] = scores[i] > mu ? EmlClass::high : EmlClass::low;
    return out;
}

DiscomfortClass bin_discomfort(int rating) {
    if (rating < 1 || rating > 10) throw std::invalid_argument("bin_discomfort: rating outside 1..10");
    return rating >= 9 ? DiscomfortClass::high : DiscomfortClass::normal;
}

std::map<TrialKey, TrialLabels> label_trials(std::vector<QuestionnaireRecord>& qnr,
                                             bool per_user_split) {
    const std::vector<double> scores = eml_scores(qnr);

    std::vector<EmlClass> classes;
    if (!per_user_split) {
        classes = binarize_eml(scores);
    } else {
        classes.assign(scores.size(), EmlClass::low);
        std::map<std::string, std::vector<size_t>> by_user;
        for (size_t i = 0; i < qnr.size(); ++i) by_user[qnr[i].key.user_id].push_back(i);
        for (const auto& [_, idx] : by_user) {
            std::vector<double> user_scores;
            for (size_t i : idx) user_scores.push_back(scores[i]);
            const auto user_classes = binarize_eml(user_scores);
            for (size_t j = 0; j < idx.size(); ++j) classes[idx[j]] = user_classes[j];
        }
    }

    std::map<TrialKey, TrialLabels> out;
    for (size_t i = 0; i < qnr.size(); ++i) {
        TrialLabels l;
        l.eml_score = scores[i];
        l.eml = classes[i];
        l.discomfort = bin_discomfort(qnr[i].feel_uncomfortable);
        out[qnr[i].key] = l;
    }
    return out;
}

std::vector<LabeledWindow> interpolate_labels(const std::map<TrialKey, TrialLabels>& labels,
                                              std::span<const FeatureVector> windows,
                                              const FoldAssignment* folds) {
    std::vector<LabeledWindow> out;
    out.reserve(windows.size());
    for (const auto& fv : windows) {
        const auto it = labels.find(fv.window.key);
        if (it == labels.end())
            throw std::runtime_error("unlabeled key " + fv.window.key.str());
        LabeledWindow lw;
        lw.fv = fv;
        lw.eml_class = it->second.eml;
        lw.discomfort_class = it->second.discomfort;
        lw.fold = folds ? folds->at(fv.window.key) : 0;
        out.push_back(std::move(lw));
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

struct CodedFactor {
    std::vector<std::string> levels;
    std::vector<std::vector<double>> cols;  // levels-1 effect-coded columns
};

CodedFactor effect_code(std::span<const std::string> factor) {
    CodedFactor out;
    std::set<std::string> uniq(factor.begin(), factor.end());
    out.levels.assign(uniq.begin(), uniq.end());
    const size_t l = out.levels.size();
    if (l < 2) throw std::invalid_argument("factor needs at least 2 levels");
    out.cols.assign(l - 1, std::vector<double>(factor.size(), 0.0));
    for (size_t i = 0; i < factor.size(); ++i) {
        const size_t level = static_cast<size_t>(
            std::find(out.levels.begin(), out.levels.end(), factor[i]) - out.levels.begin());
        if (level + 1 == l) {
            for (size_t j = 0; j + 1 < l; ++j) out.cols[j][i] = -1.0;
        } else {
            out.cols[level][i] = 1.0;
        }
    }
    return out;
}

struct TermBlock {
    std::string name;
    std::vector<std::vector<double>> cols;
};

Matrix assemble(size_t n, const std::vector<const std::vector<double>*>& cols) {
    Matrix x(n, cols.size() + 1);
    for (size_t i = 0; i < n; ++i) x(i, 0) = 1.0;  // intercept
    for (size_t j = 0; j < cols.size(); ++j)
        for (size_t i = 0; i < n; ++i) x(i, j + 1) = (*cols[j])[i];
    return x;
}

AnovaTable fit_type3(std::span<const double> y, const std::vector<TermBlock>& terms) {
    const size_t n = y.size();

    std::vector<const std::vector<double>*> all_cols;
    for (const auto& t : terms)
        for (const auto& c : t.cols) all_cols.push_back(&c);

    const Matrix x_full = assemble(n, all_cols);
    if (n <= x_full.cols) throw std::runtime_error("inestimable effect: not enough observations");
    const LstSq full = least_squares(x_full, y);
    if (!full.full_rank) throw std::runtime_error("inestimable effect: singular design");

    const double ybar = mean(y);
    double ss_ct = 0;
    for (double v : y) ss_ct += (v - ybar) * (v - ybar);

    AnovaTable out;
    out.sse = full.sse;
    out.df_error = static_cast<double>(n - x_full.cols);
    out.ss_corrected_total = ss_ct;
    out.r_squared = ss_ct > 0 ? 1.0 - full.sse / ss_ct : 0.0;
    const double ms_error = out.df_error > 0 ? full.sse / out.df_error : 0.0;

    const auto f_and_p = [&](double ss, double df) {
        double f = 0.0, p = 1.0;
        if (df > 0) {
            const double ms = ss / df;
            if (ms_error > 0) {
                f = ms / ms_error;
                p = f_sf(f, df, out.df_error);
            } else if (ms > 0) {
                f = std::numeric_limits<double>::infinity();
                p = 0.0;
            }
        }
        return std::pair{f, p};
    };

    {
        AnovaRow model;
        model.source = "corrected_model";
        model.type3_ss = std::max(0.0, ss_ct - full.sse);
        model.df = static_cast<double>(x_full.cols - 1);
        model.mean_square = model.df > 0 ? model.type3_ss / model.df : 0.0;
        std::tie(model.f, model.p) = f_and_p(model.type3_ss, model.df);
        out.rows.push_back(model);
    }

    for (size_t t = 0; t < terms.size(); ++t) {
        std::vector<const std::vector<double>*> reduced_cols;
        for (size_t u = 0; u < terms.size(); ++u) {
            if (u == t) continue;
            for (const auto& c : terms[u].cols) reduced_cols.push_back(&c);
        }
        const LstSq reduced = least_squares(assemble(n, reduced_cols), y);

        AnovaRow row;
        row.source = terms[t].name;
        row.type3_ss = std::max(0.0, reduced.sse - full.sse);
        row.df = static_cast<double>(terms[t].cols.size());
        row.mean_square = row.df > 0 ? row.type3_ss / row.df : 0.0;
        std::tie(row.f, row.p) = f_and_p(row.type3_ss, row.df);
        out.rows.push_back(row);
        out.eta_squared[row.source] = ss_ct > 0 ? row.type3_ss / ss_ct : 0.0;
    }

    {
        AnovaRow err;
        err.source = "error";
        err.type3_ss = full.sse;
        err.df = out.df_error;
        err.mean_square = ms_error;
        err.f = std::numeric_limits<double>::quiet_NaN();
        err.p = std::numeric_limits<double>::quiet_NaN();
        out.rows.push_back(err);
        out.eta_squared["error"] = ss_ct > 0 ? full.sse / ss_ct : 0.0;
    }
    {
        AnovaRow total;
        total.source = "corrected_total";
        total.type3_ss = ss_ct;
        total.df = static_cast<double>(n - 1);
        total.mean_square = std::numeric_limits<double>::quiet_NaN();
        total.f = std::numeric_limits<double>::quiet_NaN();
        total.p = std::numeric_limits<double>::quiet_NaN();
        out.rows.push_back(total);
    }
    return out;
}

std::vector<TermBlock> factorial_terms(std::span<const std::string> factor_a,
                                       std::span<const std::string> factor_b,
                                       const AnovaNames& names) {
    if (factor_a.size() != factor_b.size())
        throw std::invalid_argument("factor lengths differ");
    const CodedFactor a = effect_code(factor_a);
    const CodedFactor b = effect_code(factor_b);

    // Every cell must be populated for the factorial design to be estimable.
    std::set<std::pair<std::string, std::string>> cells;
    for (size_t i = 0; i < factor_a.size(); ++i) cells.insert({factor_a[i], factor_b[i]});
    if (cells.size() != a.levels.size() * b.levels.size())
        throw std::runtime_error("inestimable effect: empty cell in the factorial design");

    TermBlock ta{names.factor_a, a.cols};
    TermBlock tb{names.factor_b, b.cols};
    TermBlock tab{names.factor_a + "*" + names.factor_b, {}};
    for (const auto& ca : a.cols) {
        for (const auto& cb : b.cols) {
            std::vector<double> prod(factor_a.size());
            for (size_t i = 0; i < prod.size(); ++i) prod[i] = ca[i] * cb[i];
            tab.cols.push_back(std::move(prod));
        }
    }
    return {ta, tb, tab};
}

}  // namespace

const AnovaRow& AnovaTable::row(const std::string& source) const {
    for (const auto& r : rows)
        if (r.source == source) return r;
    throw std::invalid_argument("no such ANOVA source: " + source);
}

AnovaTable two_way_anova(std::span<const double> y, std::span<const std::string> factor_a,
                         std::span<const std::string> factor_b, const AnovaNames& names) {
    if (y.size() != factor_a.size()) throw std::invalid_argument("y and factors differ in length");
    return fit_type3(y, factorial_terms(factor_a, factor_b, names));
}

AnovaTable ancova(std::span<const double> y, std::span<const std::string> factor_a,
                  std::span<const std::string> factor_b, std::span<const double> covariate,
                  const AnovaNames& names) {
    if (y.size() != factor_a.size() || y.size() != covariate.size())
        throw std::invalid_argument("y, factors and covariate differ in length");
    for (double c : covariate)
        if (!std::isfinite(c)) throw std::invalid_argument("covariate must be finite");

    auto terms = factorial_terms(factor_a, factor_b, names);
    TermBlock cov{names.covariate, {std::vector<double>(covariate.begin(), covariate.end())}};
    terms.insert(terms.begin(), cov);
    try {
        return fit_type3(y, terms);
    } catch (const std::runtime_error& e) {
        if (std::string(e.what()).find("singular") != std::string::npos)
            throw std::runtime_error("covariate collinear with design");
        throw;
    }
}

}  // namespace eml
