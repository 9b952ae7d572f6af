#include "refvid/losses.hpp"

#include "refvid/error.hpp"

namespace refvid {

Value seg_loss(const Value& kappa, const Mask& target) {
    Tensor t;
    t.shape = kappa->val.shape;
    t.v.resize(target.v.size());
    if (kappa->val.numel() != static_cast<int64_t>(target.v.size()))
        throw DimensionError("seg_loss: prediction " + shape_str(kappa->val.shape) + " vs " +
                             std::to_string(target.h) + "x" + std::to_string(target.w) +
                             " target");
    for (size_t i = 0; i < target.v.size(); ++i) t.v[i] = target.v[i] ? 1.0 : 0.0;
    return bce_mean(kappa, t);
}

Value matching_loss(const std::vector<std::vector<Value>>& own_scores,
                    const std::vector<int>& positive,
                    const std::function<Value(size_t, size_t)>& cross_score, double epsilon,
                    LossReport* report) {
    const size_t batch = own_scores.size();
    if (batch == 0) throw ArgumentError("matching_loss: empty batch");
    if (positive.size() != batch)
        throw ArgumentError("matching_loss: positive indices do not match batch size");
    if (epsilon < 0) throw ArgumentError("matching_loss: negative margin");
    if (report) {
        report->epsilon = epsilon;
        report->active_query_hinges = 0;
        report->active_proposal_hinges = 0;
        report->query_term_skipped = batch < 2;
    }

    Value acc;
    auto add_term = [&](const Value& term) { acc = acc ? add(acc, term) : term; };

    for (size_t b = 0; b < batch; ++b) {
        const auto& scores = own_scores[b];
        const int pos = positive[b];
        if (pos < 0 || pos >= static_cast<int>(scores.size()))
            throw ArgumentError("matching_loss: positive index out of range");
        const Value& s_pos = scores[static_cast<size_t>(pos)];

        // query negatives: other in-batch queries against this positive proposal
        for (size_t bq = 0; bq < batch; ++bq) {
            if (bq == b) continue;
            Value hinge = relu(add_scalar(sub(cross_score(b, bq), s_pos), epsilon));
            if (report && scalar(hinge) > 0) ++report->active_query_hinges;
            add_term(hinge);
        }
        // proposal negatives: the K-1 mismatched proposals of the same frame
        for (size_t j = 0; j < scores.size(); ++j) {
            if (static_cast<int>(j) == pos) continue;
            Value hinge = relu(add_scalar(sub(scores[j], s_pos), epsilon));
            if (report && scalar(hinge) > 0) ++report->active_proposal_hinges;
            add_term(hinge);
        }
    }
    if (!acc) acc = input_scalar(0.0); // B=1 with K=1 degenerates to zero loss
    Value loss = scale(acc, 1.0 / static_cast<double>(batch));
    if (report) report->l_mat = scalar(loss);
    return loss;
}

Value total_loss(const Value& l_mat, const Value& l_seg, double lambda) {
    if (lambda <= 0) throw ArgumentError("total_loss: lambda must be positive");
    return add(l_mat, scale(l_seg, lambda));
}

} // namespace refvid
