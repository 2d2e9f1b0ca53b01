#include "eml/learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "json.hpp"

#include "eml/numeric.hpp"

namespace eml {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kMinGain = 1e-12;

const std::map<std::string, double>& defaults_for(ModelKind kind) {
    static const std::map<std::string, double> gbt = {
        {"rounds", 100}, {"max_depth", 6}, {"learning_rate", 0.3},
        {"l2_lambda", 1.0}, {"min_child_hessian", 1.0},
    };
    static const std::map<std::string, double> tree = {
        {"max_depth", 6},
        {"min_samples_split", 2},
    };
    static const std::map<std::string, double> logreg = {
        {"l2", 1.0},
        {"tol", 1e-8},
        {"max_iter", 100},
    };
    static const std::map<std::string, double> svm = {
        {"c", 1.0},
        {"epochs", 30},
    };
    switch (kind) {
        case ModelKind::gbt: return gbt;
        case ModelKind::decision_tree: return tree;
        case ModelKind::logistic_regression: return logreg;
        case ModelKind::max_margin: return svm;
    }
    throw std::logic_error("unknown model kind");
}

}  // namespace

const std::string& to_string(ModelKind k) {
    static const std::array<std::string, 4> names = {"decision_tree", "gbt",
                                                     "logistic_regression", "max_margin"};
    return names[static_cast<size_t>(k)];
}

std::optional<ModelKind> model_kind_from_string(const std::string& s) {
    for (ModelKind k : {ModelKind::decision_tree, ModelKind::gbt, ModelKind::logistic_regression,
                        ModelKind::max_margin})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

ModelSpec ModelSpec::make(const std::string& kind_name) {
    const auto k = model_kind_from_string(kind_name);
    if (!k) throw std::invalid_argument("unknown model kind '" + kind_name + "'");
    return ModelSpec(*k);
}

void ModelSpec::set(const std::string& name, double value) {
    if (!defaults_for(kind).contains(name))
        throw std::invalid_argument("unknown hyperparameter '" + name + "' for " + to_string(kind));
    params[name] = value;
}

double ModelSpec::get(const std::string& name) const {
    if (const auto it = params.find(name); it != params.end()) return it->second;
    const auto& d = defaults_for(kind);
    const auto it = d.find(name);
    if (it == d.end())
        throw std::invalid_argument("unknown hyperparameter '" + name + "' for " + to_string(kind));
    return it->second;
}

// ---------------------------------------------------------------------------
// CART (Gini), recursive; also the building block of the importance forest.
// ---------------------------------------------------------------------------

namespace {

double gini(double c1, double c0) {
    const double n = c1 + c0;
    if (n <= 0) return 0;
    const double p1 = c1 / n, p0 = c0 / n;
    return 1.0 - p1 * p1 - p0 * p0;
}

struct CartCtx {
    const FeatureMatrix& x;
    std::span<const int> y;
    int max_depth;
    int min_samples_split;
    std::vector<double>* split_gain;  // accumulated impurity decrease, row-weighted
    Rng* rng = nullptr;               // feature subsampling when set
    size_t mtry = 0;
};

struct CartSplit {
    double decrease = 0;
    int feature = -1;
    double threshold = 0;
    bool missing_left = false;
};

int grow_cart(CartCtx& ctx, Tree& tree, std::vector<int>& rows, int depth) {
    const size_t n = rows.size();
    double n1 = 0;
    for (int r : rows) n1 += ctx.y[static_cast<size_t>(r)];
    const double n0 = static_cast<double>(n) - n1;

    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    tree.nodes[static_cast<size_t>(node_id)].value = n1 / static_cast<double>(n);

    if (depth >= ctx.max_depth || n < static_cast<size_t>(ctx.min_samples_split) || n1 == 0 ||
        n0 == 0)
        return node_id;

    const size_t p = ctx.x.cols();
    std::vector<size_t> candidates;
    if (ctx.rng && ctx.mtry > 0 && ctx.mtry < p) {
        std::vector<size_t> all(p);
        std::iota(all.begin(), all.end(), size_t{0});
        for (size_t i = 0; i < ctx.mtry; ++i)
            std::swap(all[i], all[i + ctx.rng->uniform_int(p - i)]);
        candidates.assign(all.begin(), all.begin() + static_cast<ptrdiff_t>(ctx.mtry));
        std::sort(candidates.begin(), candidates.end());
    } else {
        candidates.resize(p);
        std::iota(candidates.begin(), candidates.end(), size_t{0});
    }

    const double parent = gini(n1, n0) * static_cast<double>(n);
    CartSplit best;
    std::vector<std::pair<double, int>> present;  // (value, y)
    for (size_t f : candidates) {
        present.clear();
        double m1 = 0, m0 = 0;
        for (int r : rows) {
            const double v = ctx.x.at(static_cast<size_t>(r), f);
            if (std::isnan(v))
                (ctx.y[static_cast<size_t>(r)] ? m1 : m0) += 1;
            else
                present.emplace_back(v, ctx.y[static_cast<size_t>(r)]);
        }
        if (present.size() < 2) continue;
        std::sort(present.begin(), present.end());

        double l1 = 0, l0 = 0;
        const double p1 = n1 - m1, p0 = n0 - m0;  // present totals
        for (size_t i = 0; i + 1 < present.size(); ++i) {
            (present[i].second ? l1 : l0) += 1;
            const double vl = present[i].first, vr = present[i + 1].first;
            if (vl == vr) continue;
            const double mid = 0.5 * (vl + vr);
            if (!(mid > vl && mid < vr)) continue;
            const double r1 = p1 - l1, r0 = p0 - l0;
            // missing right
            {
                const double dec = parent - gini(l1, l0) * (l1 + l0) -
                                   gini(r1 + m1, r0 + m0) * (r1 + r0 + m1 + m0);
                if (dec > best.decrease + kMinGain)
                    best = {dec, static_cast<int>(f), mid, false};
            }
            // missing left
            if (m1 + m0 > 0) {
                const double dec = parent - gini(l1 + m1, l0 + m0) * (l1 + l0 + m1 + m0) -
                                   gini(r1, r0) * (r1 + r0);
                if (dec > best.decrease + kMinGain)
                    best = {dec, static_cast<int>(f), mid, true};
            }
        }
    }

    if (best.feature < 0) return node_id;
    if (ctx.split_gain)
        (*ctx.split_gain)[static_cast<size_t>(best.feature)] += best.decrease;

    std::vector<int> left_rows, right_rows;
    for (int r : rows) {
        const double v = ctx.x.at(static_cast<size_t>(r), static_cast<size_t>(best.feature));
        const bool go_left = std::isnan(v) ? best.missing_left : v < best.threshold;
        (go_left ? left_rows : right_rows).push_back(r);
    }

    const int left = grow_cart(ctx, tree, left_rows, depth + 1);
    const int right = grow_cart(ctx, tree, right_rows, depth + 1);
    TreeNode& node = tree.nodes[static_cast<size_t>(node_id)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.missing_left = best.missing_left;
    node.left = left;
    node.right = right;
    return node_id;
}

// ---------------------------------------------------------------------------
// Gradient boosting: level-wise growth with per-feature parallel split scan.
// ---------------------------------------------------------------------------

struct GbtCand {
    double gain = 0;
    double threshold = 0;
    bool missing_left = false;
    bool valid = false;
};

struct GbtTrainer {
    const FeatureMatrix& x;
    std::span<const int> y;
    double lambda;
    double min_child_h;
    int max_depth;
    double lr;
    std::vector<std::vector<int>> sorted_idx;  // per feature, rows with present values

    GbtTrainer(const FeatureMatrix& xm, std::span<const int> ym, double lam, double mch,
               int depth, double rate)
        : x(xm), y(ym), lambda(lam), min_child_h(mch), max_depth(depth), lr(rate) {
        const size_t p = x.cols();
        sorted_idx.resize(p);
        for (size_t f = 0; f < p; ++f) {
            auto& idx = sorted_idx[f];
            idx.reserve(x.rows);
            for (size_t r = 0; r < x.rows; ++r)
                if (!std::isnan(x.at(r, f))) idx.push_back(static_cast<int>(r));
            std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
                return x.at(static_cast<size_t>(a), f) < x.at(static_cast<size_t>(b), f);
            });
        }
    }

    static double leaf_gain(double g, double h, double lambda) {
        return g * g / (h + lambda);
    }

    Tree grow(std::span<const double> grad, std::span<const double> hess,
              std::vector<double>& split_gain, Exec exec) const {
        const size_t n = x.rows, p = x.cols();
        Tree tree;
        tree.nodes.push_back({});
        std::vector<int> node_of(n, 0);
        std::vector<int> frontier{0};

        for (int depth = 0; depth <= max_depth && !frontier.empty(); ++depth) {
            const size_t S = frontier.size();
            std::vector<int> slot_of(tree.nodes.size(), -1);
            for (size_t s = 0; s < S; ++s) slot_of[static_cast<size_t>(frontier[s])] = static_cast<int>(s);

            std::vector<double> G(S, 0), H(S, 0);
            std::vector<int> C(S, 0);
            for (size_t r = 0; r < n; ++r) {
                const int s = slot_of[static_cast<size_t>(node_of[r])];
                if (s < 0) continue;
                G[static_cast<size_t>(s)] += grad[r];
                H[static_cast<size_t>(s)] += hess[r];
                ++C[static_cast<size_t>(s)];
            }

            struct Best {
                double gain = kMinGain;
                int feature = -1;
                double threshold = 0;
                bool missing_left = false;
            };
            std::vector<Best> best(S);

            if (depth < max_depth) {
                std::vector<GbtCand> cand(p * S);
                const auto scan_feature = [&](size_t f) {
                    const auto& idx = sorted_idx[f];
                    std::vector<double> gp(S, 0), hp(S, 0);
                    for (int r : idx) {
                        const int s = slot_of[static_cast<size_t>(node_of[static_cast<size_t>(r)])];
                        if (s < 0) continue;
                        gp[static_cast<size_t>(s)] += grad[static_cast<size_t>(r)];
                        hp[static_cast<size_t>(s)] += hess[static_cast<size_t>(r)];
                    }
                    std::vector<double> gl(S, 0), hl(S, 0), lastv(S, 0);
                    std::vector<char> started(S, 0);
                    for (int r : idx) {
                        const size_t row = static_cast<size_t>(r);
                        const int si = slot_of[static_cast<size_t>(node_of[row])];
                        if (si < 0) continue;
                        const size_t s = static_cast<size_t>(si);
                        const double v = x.at(row, f);
                        if (started[s] && v != lastv[s]) {
                            const double mid = 0.5 * (lastv[s] + v);
                            if (mid > lastv[s] && mid < v) {
                                const double gm = G[s] - gp[s], hm = H[s] - hp[s];
                                const double base = leaf_gain(G[s], H[s], lambda);
                                GbtCand& c = cand[f * S + s];
                                // missing routed right
                                {
                                    const double hl_ = hl[s], hr_ = H[s] - hl[s];
                                    if (hl_ >= min_child_h && hr_ >= min_child_h) {
                                        const double gain =
                                            0.5 * (leaf_gain(gl[s], hl_, lambda) +
                                                   leaf_gain(G[s] - gl[s], hr_, lambda) - base);
                                        if (!c.valid || gain > c.gain)
                                            c = {gain, mid, false, true};
                                    }
                                }
                                // missing routed left
                                if (hm > 0 || gm != 0) {
                                    const double hl_ = hl[s] + hm, hr_ = H[s] - hl[s] - hm;
                                    if (hl_ >= min_child_h && hr_ >= min_child_h) {
                                        const double gain =
                                            0.5 * (leaf_gain(gl[s] + gm, hl_, lambda) +
                                                   leaf_gain(G[s] - gl[s] - gm, hr_, lambda) -
                                                   base);
                                        if (!c.valid || gain > c.gain)
                                            c = {gain, mid, true, true};
                                    }
                                }
                            }
                        }
                        gl[s] += grad[row];
                        hl[s] += hess[row];
                        lastv[s] = v;
                        started[s] = 1;
                    }
                };

                if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
                    for (int f = 0; f < static_cast<int>(p); ++f) scan_feature(static_cast<size_t>(f));
                } else {
                    for (size_t f = 0; f < p; ++f) scan_feature(f);
                }

                // Deterministic reduction in feature order.
                for (size_t f = 0; f < p; ++f) {
                    for (size_t s = 0; s < S; ++s) {
                        const GbtCand& c = cand[f * S + s];
                        if (c.valid && c.gain > best[s].gain)
                            best[s] = {c.gain, static_cast<int>(f), c.threshold, c.missing_left};
                    }
                }
            }

            std::vector<int> next_frontier;
            for (size_t s = 0; s < S; ++s) {
                if (best[s].feature < 0 || C[s] < 2) {
                    TreeNode& leaf = tree.nodes[static_cast<size_t>(frontier[s])];
                    leaf.value = lr * (-G[s] / (H[s] + lambda));
                    continue;
                }
                const int left = static_cast<int>(tree.nodes.size());
                tree.nodes.push_back({});
                const int right = static_cast<int>(tree.nodes.size());
                tree.nodes.push_back({});
                TreeNode& node = tree.nodes[static_cast<size_t>(frontier[s])];
                node.feature = best[s].feature;
                node.threshold = best[s].threshold;
                node.missing_left = best[s].missing_left;
                node.left = left;
                node.right = right;
                next_frontier.push_back(left);
                next_frontier.push_back(right);
                split_gain[static_cast<size_t>(best[s].feature)] += best[s].gain;
            }

            if (!next_frontier.empty()) {
                for (size_t r = 0; r < n; ++r) {
                    const int nid = node_of[r];
                    const int s = slot_of[static_cast<size_t>(nid)];
                    if (s < 0) continue;
                    const TreeNode& node = tree.nodes[static_cast<size_t>(nid)];
                    if (node.feature < 0) continue;
                    const double v = x.at(r, static_cast<size_t>(node.feature));
                    const bool go_left = std::isnan(v) ? node.missing_left : v < node.threshold;
                    node_of[r] = go_left ? node.left : node.right;
                }
            }
            frontier = std::move(next_frontier);
        }
        return tree;
    }
};

double tree_raw(const Tree& tree, std::span<const double> row) {
    int nid = 0;
    while (tree.nodes[static_cast<size_t>(nid)].feature >= 0) {
        const TreeNode& node = tree.nodes[static_cast<size_t>(nid)];
        const double v = row[static_cast<size_t>(node.feature)];
        nid = (std::isnan(v) ? node.missing_left : v < node.threshold) ? node.left : node.right;
    }
    return tree.nodes[static_cast<size_t>(nid)].value;
}

// ---------------------------------------------------------------------------
// Linear models: shared standardization and imputation
// ---------------------------------------------------------------------------

void fit_scaler(const FeatureMatrix& x, TrainedModel& model) {
    const size_t p = x.cols();
    model.impute_mean.assign(p, 0.0);
    model.scale_mean.assign(p, 0.0);
    model.scale_std.assign(p, 1.0);
    for (size_t f = 0; f < p; ++f) {
        double sum = 0, sum2 = 0;
        size_t cnt = 0;
        for (size_t r = 0; r < x.rows; ++r) {
            const double v = x.at(r, f);
            if (std::isnan(v)) continue;
            sum += v;
            sum2 += v * v;
            ++cnt;
        }
        if (cnt == 0) continue;  // all-missing feature imputes to 0
        const double mu = sum / static_cast<double>(cnt);
        const double var = std::max(0.0, sum2 / static_cast<double>(cnt) - mu * mu);
        model.impute_mean[f] = mu;
        model.scale_mean[f] = mu;
        model.scale_std[f] = var > 0 ? std::sqrt(var) : 1.0;
    }
}

double standardized_at(const TrainedModel& model, std::span<const double> row, size_t f) {
    const double v = row[f];
    if (std::isnan(v)) return 0.0;  // mean-imputed
    return (v - model.scale_mean[f]) / model.scale_std[f];
}

void train_logistic(const FeatureMatrix& x, std::span<const int> y, TrainedModel& model) {
    const size_t n = x.rows, p = x.cols();
    const double l2 = model.spec.get("l2");
    const double tol = model.spec.get("tol");
    const int max_iter = static_cast<int>(model.spec.get("max_iter"));
    fit_scaler(x, model);

    // Standardized design with intercept column 0.
    Matrix z(n, p + 1);
    for (size_t r = 0; r < n; ++r) {
        z(r, 0) = 1.0;
        for (size_t f = 0; f < p; ++f) z(r, f + 1) = standardized_at(model, x.row(r), f);
    }

    std::vector<double> coef(p + 1, 0.0);
    for (int iter = 0; iter < max_iter; ++iter) {
        Matrix a(p + 1, p + 1);
        std::vector<double> rhs(p + 1, 0.0);
        for (size_t r = 0; r < n; ++r) {
            double eta = 0;
            for (size_t j = 0; j <= p; ++j) eta += coef[j] * z(r, j);
            const double prob = std::clamp(sigmoid(eta), 1e-12, 1.0 - 1e-12);
            const double w = std::max(prob * (1.0 - prob), 1e-10);
            const double zwork = eta + (static_cast<double>(y[r]) - prob) / w;
            for (size_t j = 0; j <= p; ++j) {
                const double wzj = w * z(r, j);
                rhs[j] += wzj * zwork;
                for (size_t k = j; k <= p; ++k) a(j, k) += wzj * z(r, k);
            }
        }
        for (size_t j = 0; j <= p; ++j)
            for (size_t k = 0; k < j; ++k) a(j, k) = a(k, j);
        for (size_t j = 1; j <= p; ++j) a(j, j) += l2;

        const std::vector<double> next = solve_spd(std::move(a), std::move(rhs));
        double delta = 0;
        for (size_t j = 0; j <= p; ++j) delta = std::max(delta, std::fabs(next[j] - coef[j]));
        coef = next;
        if (delta < tol) break;
    }

    model.bias = coef[0];
    model.weights.assign(coef.begin() + 1, coef.end());
}

void train_max_margin(const FeatureMatrix& x, std::span<const int> y, TrainedModel& model) {
    const size_t n = x.rows, p = x.cols();
    const double c = model.spec.get("c");
    const int epochs = static_cast<int>(model.spec.get("epochs"));
    fit_scaler(x, model);

    std::vector<double> z(n * (p + 1));
    for (size_t r = 0; r < n; ++r) {
        for (size_t f = 0; f < p; ++f) z[r * (p + 1) + f] = standardized_at(model, x.row(r), f);
        z[r * (p + 1) + p] = 1.0;  // intercept feature
    }

    const double lambda = 1.0 / (c * static_cast<double>(n));
    const uint64_t steps = static_cast<uint64_t>(epochs) * n;
    std::vector<double> w(p + 1, 0.0), avg(p + 1, 0.0);
    uint64_t avg_count = 0;
    Rng sampler(derive_seed(model.seed, {0x51}));
    for (uint64_t t = 1; t <= steps; ++t) {
        const size_t i = static_cast<size_t>(sampler.uniform_int(n));
        const double* zi = &z[i * (p + 1)];
        double margin = 0;
        for (size_t j = 0; j <= p; ++j) margin += w[j] * zi[j];
        margin *= (y[i] ? 1.0 : -1.0);

        const double eta = 1.0 / (lambda * static_cast<double>(t));
        const double keep = 1.0 - eta * lambda;
        for (size_t j = 0; j <= p; ++j) w[j] *= keep;
        if (margin < 1.0) {
            const double sign = y[i] ? 1.0 : -1.0;
            for (size_t j = 0; j <= p; ++j) w[j] += eta * sign * zi[j];
        }
        if (t > steps / 2) {
            for (size_t j = 0; j <= p; ++j) avg[j] += w[j];
            ++avg_count;
        }
    }
    if (avg_count > 0)
        for (double& v : avg) v /= static_cast<double>(avg_count);

    model.bias = avg[p];
    model.weights.assign(avg.begin(), avg.begin() + static_cast<ptrdiff_t>(p));
}

}  // namespace

// ---------------------------------------------------------------------------

TrainedModel train(const ModelSpec& spec, const FeatureMatrix& x, std::span<const int> y,
                   uint64_t seed, Exec exec) {
    if (x.rows != y.size()) throw std::invalid_argument("train: row/label count mismatch");
    if (x.rows < 10) throw std::invalid_argument("train: need at least 10 rows");
    if (x.names.empty()) throw std::invalid_argument("train: empty feature set");
    size_t pos = 0;
    for (int v : y) pos += static_cast<size_t>(v != 0);
    if (pos == 0 || pos == y.size()) throw std::invalid_argument("train: single-class labels");

    TrainedModel model;
    model.spec = spec;
    model.feature_names = x.names;
    model.seed = seed;
    model.n_rows = x.rows;
    model.split_gain.assign(x.cols(), 0.0);

    switch (spec.kind) {
        case ModelKind::decision_tree: {
            CartCtx ctx{x, y, static_cast<int>(spec.get("max_depth")),
                        static_cast<int>(spec.get("min_samples_split")), &model.split_gain};
            std::vector<int> rows(x.rows);
            std::iota(rows.begin(), rows.end(), 0);
            Tree tree;
            grow_cart(ctx, tree, rows, 0);
            model.trees.push_back(std::move(tree));
            break;
        }
        case ModelKind::gbt: {
            const int rounds = static_cast<int>(spec.get("rounds"));
            model.learning_rate = spec.get("learning_rate");
            GbtTrainer trainer(x, y, spec.get("l2_lambda"), spec.get("min_child_hessian"),
                               static_cast<int>(spec.get("max_depth")), model.learning_rate);
            std::vector<double> raw(x.rows, 0.0), grad(x.rows), hess(x.rows);
            for (int round = 0; round < rounds; ++round) {
                for (size_t r = 0; r < x.rows; ++r) {
                    const double prob = sigmoid(raw[r]);
                    grad[r] = prob - static_cast<double>(y[r]);
                    hess[r] = std::max(prob * (1.0 - prob), 1e-16);
                }
                Tree tree = trainer.grow(grad, hess, model.split_gain, exec);
                for (size_t r = 0; r < x.rows; ++r) raw[r] += tree_raw(tree, x.row(r));
                model.trees.push_back(std::move(tree));
            }
            break;
        }
        case ModelKind::logistic_regression:
            train_logistic(x, y, model);
            break;
        case ModelKind::max_margin:
            train_max_margin(x, y, model);
            break;
    }
    return model;
}

Prediction predict_row(const TrainedModel& model, std::span<const double> row) {
    if (row.size() != model.feature_names.size())
        throw std::invalid_argument("predict_row: row width mismatch");
    double prob = 0;
    switch (model.spec.kind) {
        case ModelKind::decision_tree:
            prob = tree_raw(model.trees[0], row);
            break;
        case ModelKind::gbt: {
            double raw = 0;
            for (const Tree& t : model.trees) raw += tree_raw(t, row);
            prob = sigmoid(raw);
            break;
        }
        case ModelKind::logistic_regression:
        case ModelKind::max_margin: {
            double raw = model.bias;
            for (size_t f = 0; f < model.weights.size(); ++f)
                raw += model.weights[f] * standardized_at(model, row, f);
            prob = sigmoid(raw);
            break;
        }
    }
    return {prob >= 0.5 ? 1 : 0, prob};
}

std::vector<Prediction> predict(const TrainedModel& model, const FeatureMatrix& x) {
    std::vector<Prediction> out;
    out.reserve(x.rows);
    if (x.names == model.feature_names) {
        for (size_t r = 0; r < x.rows; ++r) out.push_back(predict_row(model, x.row(r)));
        return out;
    }
    std::vector<size_t> col(model.feature_names.size());
    for (size_t f = 0; f < model.feature_names.size(); ++f) {
        const auto it = std::find(x.names.begin(), x.names.end(), model.feature_names[f]);
        if (it == x.names.end())
            throw std::invalid_argument("predict: feature not provided: " + model.feature_names[f]);
        col[f] = static_cast<size_t>(it - x.names.begin());
    }
    std::vector<double> row(model.feature_names.size());
    for (size_t r = 0; r < x.rows; ++r) {
        for (size_t f = 0; f < col.size(); ++f) row[f] = x.at(r, col[f]);
        out.push_back(predict_row(model, row));
    }
    return out;
}

std::vector<std::pair<std::string, double>> feature_importance(const TrainedModel& model,
                                                               const FeatureMatrix& x,
                                                               std::span<const int> y) {
    std::vector<double> gain;
    if (model.spec.kind == ModelKind::decision_tree || model.spec.kind == ModelKind::gbt) {
        gain = model.split_gain;
    } else {
        // Surrogate forest: bagged trees with sqrt(p) features per split.
        if (x.rows != y.size()) throw std::invalid_argument("feature_importance: shape mismatch");
        gain.assign(x.cols(), 0.0);
        const size_t mtry = std::max<size_t>(1, static_cast<size_t>(std::sqrt(
                                                    static_cast<double>(x.cols()))));
        constexpr int kForestSize = 50;
        for (int t = 0; t < kForestSize; ++t) {
            Rng rng(derive_seed(model.seed, {0xF0, static_cast<uint64_t>(t)}));
            std::vector<int> rows(x.rows);
            for (auto& r : rows) r = static_cast<int>(rng.uniform_int(x.rows));
            CartCtx ctx{x, y, 6, 2, &gain, &rng, mtry};
            Tree tree;
            grow_cart(ctx, tree, rows, 0);
        }
    }

    double total = 0;
    for (double g : gain) total += g;
    std::vector<std::pair<std::string, double>> out;
    out.reserve(gain.size());
    for (size_t f = 0; f < gain.size(); ++f)
        out.emplace_back(model.feature_names[f], total > 0 ? gain[f] / total : 0.0);
    std::stable_sort(out.begin(), out.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    return out;
}

// ---------------------------------------------------------------------------

std::string TrainedModel::serialize() const {
    nlohmann::json j;
    j["version"] = 1;
    j["kind"] = to_string(spec.kind);
    j["params"] = spec.params;
    j["features"] = feature_names;
    j["seed"] = seed;
    j["n_rows"] = n_rows;
    j["learning_rate"] = learning_rate;
    j["bias"] = bias;
    j["split_gain"] = split_gain;
    j["weights"] = weights;
    j["impute_mean"] = impute_mean;
    j["scale_mean"] = scale_mean;
    j["scale_std"] = scale_std;
    nlohmann::json jtrees = nlohmann::json::array();
    for (const Tree& t : trees) {
        nlohmann::json jt = nlohmann::json::array();
        for (const TreeNode& n : t.nodes) {
            jt.push_back({{"f", n.feature},
                          {"t", n.threshold},
                          {"ml", n.missing_left},
                          {"l", n.left},
                          {"r", n.right},
                          {"v", n.value}});
        }
        jtrees.push_back(std::move(jt));
    }
    j["trees"] = std::move(jtrees);
    return j.dump();
}

TrainedModel TrainedModel::deserialize(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (!j.contains("version") || j.at("version").get<int>() != 1)
        throw std::runtime_error("unsupported model container version");

    TrainedModel m;
    const auto kind = model_kind_from_string(j.at("kind").get<std::string>());
    if (!kind) throw std::runtime_error("unknown model kind in container");
    m.spec = ModelSpec(*kind);
    for (const auto& [k, v] : j.at("params").items()) m.spec.set(k, v.get<double>());
    m.feature_names = j.at("features").get<std::vector<std::string>>();
    m.seed = j.at("seed").get<uint64_t>();
    m.n_rows = j.at("n_rows").get<size_t>();
    m.learning_rate = j.at("learning_rate").get<double>();
    m.bias = j.at("bias").get<double>();
    m.split_gain = j.at("split_gain").get<std::vector<double>>();
    m.weights = j.at("weights").get<std::vector<double>>();
    m.impute_mean = j.at("impute_mean").get<std::vector<double>>();
    m.scale_mean = j.at("scale_mean").get<std::vector<double>>();
    m.scale_std = j.at("scale_std").get<std::vector<double>>();
    for (const auto& jt : j.at("trees")) {
        Tree t;
        for (const auto& jn : jt) {
            TreeNode n;
            n.feature = jn.at("f").get<int>();
            n.threshold = jn.at("t").get<double>();
            n.missing_left = jn.at("ml").get<bool>();
            n.left = jn.at("l").get<int>();
            n.right = jn.at("r").get<int>();
            n.value = jn.at("v").get<double>();
            t.nodes.push_back(n);
        }
        m.trees.push_back(std::move(t));
    }
    return m;
}

}  // namespace eml
