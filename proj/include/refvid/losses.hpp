#pragma once

#include <functional>
#include <vector>

#include "refvid/graph.hpp"
#include "refvid/metrics.hpp"

namespace refvid {

struct LossReport {
    double l_mat = 0.0;
    double l_seg = 0.0;
    double total = 0.0;
    double lambda = 0.0;
    double epsilon = 0.0;
    int active_query_hinges = 0;
    int active_proposal_hinges = 0;
    bool query_term_skipped = false; // batches of one cannot form query negatives
};

/// Average binary cross-entropy of the predicted mask against the binary
/// target; probabilities must be strictly inside (0,1).
Value seg_loss(const Value& kappa, const Mask& target);

/// Bidirectional triplet hinge loss averaged over the batch. For each sample,
/// query negatives are the other in-batch queries scored against its positive
/// proposal, and proposal negatives are its own K-1 non-positive proposals.
/// cross_score(b, bq) must return the score of sample b's positive proposal
/// against sample bq's query.
Value matching_loss(const std::vector<std::vector<Value>>& own_scores,
                    const std::vector<int>& positive,
                    const std::function<Value(size_t, size_t)>& cross_score, double epsilon,
                    LossReport* report = nullptr);

/// L = L_mat + lambda * L_seg.
Value total_loss(const Value& l_mat, const Value& l_seg, double lambda);

} // namespace refvid
