#include "draftlab/ssl.hpp"

#include "draftlab/error.hpp"
#include "draftlab/ops.hpp"

#include <algorithm>
#include <string>
#include <vector>

namespace draft::ssl {

ApcTargets apc_targets(const TensorPtr& features, int shift, int t_out,
                       int subsample) {
    check(features && features->rank() == 2, ErrorCode::kDimension,
          "features must be [T x dim]");
    check(shift >= 1, ErrorCode::kConfig,
          "shift must be >= 1, got " + std::to_string(shift));
    check(subsample >= 1, ErrorCode::kConfig, "subsample must be >= 1");
    check(t_out >= 0, ErrorCode::kDimension, "t_out must be >= 0");

    const int t = features->rows();
    const int dim = features->cols();
    // Step u needs raw rows [subsample*(u+shift), subsample*(u+shift+1)).
    const int full = t / subsample - shift;
    const int steps = std::min(t_out, full);
    check(steps >= 1, ErrorCode::kSequenceTooShort,
          "shift " + std::to_string(shift) + " leaves no future targets in " +
              std::to_string(t) + " frames");

    ApcTargets out;
    out.steps = steps;
    out.targets = make_tensor({steps, subsample * dim});
    for (int u = 0; u < steps; ++u) {
        const real* src = features->data.data() +
                          static_cast<std::size_t>(u + shift) * subsample * dim;
        std::copy_n(src, static_cast<std::size_t>(subsample) * dim,
                    out.targets->data.data() +
                        static_cast<std::size_t>(u) * subsample * dim);
    }
    return out;
}

TensorPtr apc_loss(const std::vector<TensorPtr>& predictions,
                   const std::vector<TensorPtr>& targets) {
    check(!predictions.empty(), ErrorCode::kConfig,
          "future-prediction loss needs at least one shift");
    check(predictions.size() == targets.size(), ErrorCode::kConfig,
          "got " + std::to_string(predictions.size()) + " predictions for " +
              std::to_string(targets.size()) + " target sets");
    TensorPtr total;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        auto term = ops::l1_loss(predictions[i], targets[i]);
        total = total ? ops::add(total, term) : term;
    }
    return ops::scale(total, 1.0 / static_cast<double>(predictions.size()));
}

TensorPtr apc_utterance_loss(model::AcousticModel& m,
                             const TensorPtr& features) {
    auto enc = m.encode(features);
    const int t_out = enc->rows();
    std::vector<TensorPtr> preds;
    std::vector<TensorPtr> tgts;
    for (int shift : m.config().apc_shifts) {
        auto tg = apc_targets(features, shift, t_out);
        auto pred = m.apc_predict(enc, shift);
        if (tg.steps < t_out) pred = ops::slice_rows(pred, 0, tg.steps);
        preds.push_back(pred);
        tgts.push_back(tg.targets);
    }
    return apc_loss(preds, tgts);
}

void MaskSpec::validate() const {
    check(mask_prob > 0.0 && mask_prob < 1.0, ErrorCode::kConfig,
          "mask_prob must lie in (0, 1), got " + std::to_string(mask_prob));
    check(span_len >= 1, ErrorCode::kConfig,
          "span_len must be >= 1, got " + std::to_string(span_len));
}

std::vector<int> draw_mask_positions(int t, const MaskSpec& spec, Rng& rng) {
    spec.validate();
    check(t >= 1, ErrorCode::kSequenceTooShort,
          "cannot mask a sequence of " + std::to_string(t) + " steps");
    for (int attempt = 0; attempt < 2; ++attempt) {
        std::vector<unsigned char> flags(static_cast<std::size_t>(t), 0);
        for (int i = 0; i < t; ++i)
            if (rng.uniform() < spec.mask_prob) {
                const int end = std::min(t, i + spec.span_len);
                for (int j = i; j < end; ++j)
                    flags[static_cast<std::size_t>(j)] = 1;
            }
        std::vector<int> positions;
        for (int i = 0; i < t; ++i)
            if (flags[static_cast<std::size_t>(i)]) positions.push_back(i);
        if (!positions.empty()) return positions;
    }
    fail(ErrorCode::kTraining,
         "mask drew no positions over " + std::to_string(t) +
             " steps, even after a resample");
}

std::vector<int> subsampled_labels(const kmeans::Codebook& book,
                                   const TensorPtr& features, int t_out,
                                   int subsample) {
    check(subsample >= 1, ErrorCode::kConfig, "subsample must be >= 1");
    const auto frame_labels = kmeans::assign(book, features);
    const int t = static_cast<int>(frame_labels.size());
    std::vector<int> labels(static_cast<std::size_t>(t_out), 0);
    for (int g = 0; g < t_out; ++g) {
        const int lo = g * subsample;
        const int hi = std::min(t, lo + subsample);
        check(lo < t, ErrorCode::kDimension,
              "output step " + std::to_string(g) + " has no raw frames in " +
                  std::to_string(t));
        // Majority vote inside the group; count ties go to the lowest label.
        int best = -1;
        int best_n = 0;
        for (int j = lo; j < hi; ++j) {
            const int lab = frame_labels[static_cast<std::size_t>(j)];
            int count = 0;
            for (int j2 = lo; j2 < hi; ++j2)
                if (frame_labels[static_cast<std::size_t>(j2)] == lab) ++count;
            if (count > best_n || (count == best_n && lab < best)) {
                best = lab;
                best_n = count;
            }
        }
        labels[static_cast<std::size_t>(g)] = best;
    }
    return labels;
}

TensorPtr masked_predict_loss(model::AcousticModel& m,
                              const TensorPtr& features,
                              const kmeans::Codebook& book,
                              const MaskSpec& spec, Rng& rng, int* n_masked) {
    check(book.k == m.head_classes(), ErrorCode::kConfig,
          "codebook has " + std::to_string(book.k) + " labels but the head " +
              "has " + std::to_string(m.head_classes()) + " classes");
    const int t_out = m.frontend_out_len(features->rows());
    const auto positions = draw_mask_positions(t_out, spec, rng);
    const auto all_labels = subsampled_labels(book, features, t_out);

    auto enc = m.encode_masked(features, positions);
    auto logits = m.masked_logits(ops::gather_rows(enc, positions));
    std::vector<int> labels;
    labels.reserve(positions.size());
    for (int p : positions)
        labels.push_back(all_labels[static_cast<std::size_t>(p)]);
    if (n_masked) *n_masked = static_cast<int>(positions.size());
    return ops::nll_rows(ops::log_softmax_rows(logits), labels);
}

TensorPtr info_nce(const TensorPtr& context, const TensorPtr& candidates,
                   const std::vector<int>& positives,
                   const std::vector<std::vector<int>>& negatives,
                   double temperature) {
    check(temperature > 0.0, ErrorCode::kConfig,
          "temperature must be positive");
    check(context && candidates && context->rank() == 2 &&
              candidates->rank() == 2 &&
              context->cols() == candidates->cols(),
          ErrorCode::kDimension,
          "context and candidates must share a width");
    const int anchors = context->rows();
    const int pool = candidates->rows();
    check(static_cast<int>(positives.size()) == anchors &&
              static_cast<int>(negatives.size()) == anchors && anchors >= 1,
          ErrorCode::kDimension,
          "one positive and one negative list per anchor");
    const int k = static_cast<int>(negatives.front().size());
    check(k >= 1, ErrorCode::kConfig, "need at least one negative");

    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(static_cast<std::size_t>(anchors) * (1 + k));
    for (int i = 0; i < anchors; ++i) {
        check(static_cast<int>(negatives[static_cast<std::size_t>(i)].size()) ==
                  k,
              ErrorCode::kDimension,
              "every anchor must list the same number of negatives");
        const auto in_pool = [&](int idx) { return idx >= 0 && idx < pool; };
        check(in_pool(positives[static_cast<std::size_t>(i)]),
              ErrorCode::kDimension, "positive index out of range");
        pairs.emplace_back(i, positives[static_cast<std::size_t>(i)]);
        for (int idx : negatives[static_cast<std::size_t>(i)]) {
            check(in_pool(idx), ErrorCode::kDimension,
                  "negative index out of range");
            pairs.emplace_back(i, idx);
        }
    }

    auto cn = ops::l2_normalize_rows(context);
    auto qn = ops::l2_normalize_rows(candidates);
    auto sims = ops::gathered_dot(cn, qn, pairs, anchors, 1 + k);
    auto scaled = ops::scale(sims, 1.0 / temperature);
    // Column 0 of every row is the positive.
    return ops::nll_rows(ops::log_softmax_rows(scaled),
                         std::vector<int>(static_cast<std::size_t>(anchors),
                                          0));
}

TensorPtr contrastive_loss(model::AcousticModel& m, const TensorPtr& features,
                           const MaskSpec& spec, int n_negatives,
                           double temperature, Rng& rng,
                           int* replacement_warnings, int* n_masked) {
    check(n_negatives >= 1, ErrorCode::kConfig,
          "n_negatives must be >= 1, got " + std::to_string(n_negatives));
    check(temperature > 0.0, ErrorCode::kConfig,
          "temperature must be positive");
    const int t_out = m.frontend_out_len(features->rows());
    const auto positions = draw_mask_positions(t_out, spec, rng);
    const int n = static_cast<int>(positions.size());
    check(n >= 2, ErrorCode::kTraining,
          "contrastive loss needs >= 2 masked steps to draw negatives, got " +
              std::to_string(n));

    auto targets = ops::gather_rows(m.frontend_forward(features), positions);
    auto enc = m.encode_masked(features, positions);
    auto context =
        m.contrastive_project(ops::gather_rows(enc, positions));

    std::vector<int> positives(static_cast<std::size_t>(n));
    std::vector<std::vector<int>> negatives(static_cast<std::size_t>(n));
    std::vector<int> cand;
    for (int i = 0; i < n; ++i) {
        positives[static_cast<std::size_t>(i)] = i;
        cand.clear();
        for (int j = 0; j < n; ++j)
            if (j != i) cand.push_back(j);
        auto& negs = negatives[static_cast<std::size_t>(i)];
        if (static_cast<int>(cand.size()) >= n_negatives) {
            // Partial Fisher-Yates: the first n_negatives entries end up a
            // uniform draw without replacement.
            for (int j = 0; j < n_negatives; ++j) {
                const int pick = j + static_cast<int>(rng.uniform_index(
                                         cand.size() - j));
                std::swap(cand[static_cast<std::size_t>(j)],
                          cand[static_cast<std::size_t>(pick)]);
                negs.push_back(cand[static_cast<std::size_t>(j)]);
            }
        } else {
            if (replacement_warnings) ++*replacement_warnings;
            for (int j = 0; j < n_negatives; ++j)
                negs.push_back(cand[rng.uniform_index(cand.size())]);
        }
    }
    if (n_masked) *n_masked = n;
    return info_nce(context, targets, positives, negatives, temperature);
}

}  // namespace draft::ssl
