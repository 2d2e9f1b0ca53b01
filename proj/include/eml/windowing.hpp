#pragma once

// Sliding-window partitioning and leak-free fold assignment. Folds are
// assigned to whole trials, never to windows, so no trial's data can appear
// on both sides of a train/test split.

#include <cstdint>
#include <map>

#include "eml/types.hpp"

namespace eml {

struct FoldAssignment {
    std::map<TrialKey, int> fold_of;
    int k = 0;
    uint64_t seed = 0;

    int at(const TrialKey& key) const;
};

// Windows at starts 0, step, 2*step, ... whose end fits within the duration.
// Trailing partial windows are discarded. A duration below one window yields
// an empty list.
std::vector<Window> partition(const TrialKey& key, double trial_duration_s,
                              double window_size_s, double step_size_s);

inline std::vector<Window> partition(double trial_duration_s, double window_size_s,
                                     double step_size_s) {
    return partition(TrialKey{}, trial_duration_s, window_size_s, step_size_s);
}

// Deterministic grouped assignment: each user's trials are spread across the
// k folds as evenly as divisibility allows, shuffled and rotated by the seed.
FoldAssignment assign_folds(std::span<const TrialKey> keys, int k, uint64_t seed);

// Optional split mode: one fold per user (not the default).
FoldAssignment assign_folds_leave_one_user_out(std::span<const TrialKey> keys);

}  // namespace eml
