#include "eml/windowing.hpp"

#include <algorithm>
#include <cmath>

#include "eml/numeric.hpp"

namespace eml {

int FoldAssignment::at(const TrialKey& key) const {
    const auto it = fold_of.find(key);
    if (it == fold_of.end()) throw std::runtime_error("no fold assigned for " + key.str());
    return it->second;
}

std::vector<Window> partition(const TrialKey& key, double trial_duration_s,
                              double window_size_s, double step_size_s) {
    if (window_size_s <= 0) throw std::invalid_argument("window size must be positive");
    if (step_size_s <= 0 || step_size_s > window_size_s)
        throw std::invalid_argument("step size must be in (0, window]");

    std::vector<Window> out;
    if (trial_duration_s < window_size_s) return out;

    // Half-ulp slack so a duration that equals start+window exactly (up to
    // rounding of the duration computation) still produces that window.
    const double slack = 1e-9 * std::max(1.0, trial_duration_s);
    for (int i = 0;; ++i) {
        const double start = static_cast<double>(i) * step_size_s;
        const double end = start + window_size_s;
        if (end > trial_duration_s + slack) break;
        out.push_back(Window{key, start, end, i});
    }
    return out;
}

FoldAssignment assign_folds(std::span<const TrialKey> keys, int k, uint64_t seed) {
    if (k < 2) throw std::invalid_argument("assign_folds: k must be >= 2");
    if (std::cmp_less(keys.size(), k))
        throw std::invalid_argument("assign_folds: fewer keys than folds");

    std::map<std::string, std::vector<TrialKey>> by_user;
    for (const auto& key : keys) {
        auto& v = by_user[key.user_id];
        if (std::find(v.begin(), v.end(), key) != v.end())
            throw std::invalid_argument("assign_folds: duplicate key " + key.str());
        v.push_back(key);
    }

    FoldAssignment out;
    out.k = k;
    out.seed = seed;

    size_t user_index = 0;
    for (auto& [user, trials] : by_user) {
        std::sort(trials.begin(), trials.end());
        Rng rng(derive_seed(seed, {0x6f1d, user_index++}));
        rng.shuffle(trials);
        const int offset = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(k)));
        for (size_t i = 0; i < trials.size(); ++i)
            out.fold_of[trials[i]] = (offset + static_cast<int>(i)) % k;
    }
    return out;
}

FoldAssignment assign_folds_leave_one_user_out(std::span<const TrialKey> keys) {
    std::map<std::string, int> user_fold;
    FoldAssignment out;
    for (const auto& key : keys) {
        const auto [it, inserted] =
            user_fold.try_emplace(key.user_id, static_cast<int>(user_fold.size()));
        out.fold_of[key] = it->second;
    }
    out.k = static_cast<int>(user_fold.size());
    if (out.k < 2) throw std::invalid_argument("leave-one-user-out requires >= 2 users");
    return out;
}

}  // namespace eml
