#pragma once

#include "draftlab/kmeans.hpp"
#include "draftlab/model.hpp"
#include "draftlab/rng.hpp"
#include "draftlab/tensor.hpp"

#include <vector>

namespace draft::ssl {

// Future-prediction targets of one utterance for one shift: row u holds the
// `subsample` raw frames starting subsample * shift raw frames after output
// step u, concatenated. Steps without a full future window are dropped.
struct ApcTargets {
    int steps = 0;      // rows of `targets`
    TensorPtr targets;  // [steps, subsample * feature_dim], no gradient
};

ApcTargets apc_targets(const TensorPtr& features, int shift, int t_out,
                       int subsample = 4);

// Mean absolute error per shift, averaged uniformly over the shifts.
TensorPtr apc_loss(const std::vector<TensorPtr>& predictions,
                   const std::vector<TensorPtr>& targets);

// Full future-prediction loss of one utterance under the model's APC head:
// one prediction per configured shift against apc_targets of that shift.
TensorPtr apc_utterance_loss(model::AcousticModel& m,
                             const TensorPtr& features);

// Span masking over encoder steps: every step independently starts a span of
// span_len steps with probability mask_prob.
struct MaskSpec {
    double mask_prob = 0.065;
    int span_len = 10;
    void validate() const;
};

// Sorted masked step indices in [0, t). An empty draw is retried once; a
// second empty draw raises a training error.
std::vector<int> draw_mask_positions(int t, const MaskSpec& spec, Rng& rng);

// Majority codebook label over each group of `subsample` raw frames (ties to
// the lowest label), one label per encoder step.
std::vector<int> subsampled_labels(const kmeans::Codebook& book,
                                   const TensorPtr& features, int t_out,
                                   int subsample = 4);

// Masked pseudo-label prediction for one utterance: masked front-end rows are
// replaced by the learned mask embedding, and the cross-entropy is taken at
// the masked steps only. n_masked (when given) receives the masked-step
// count so callers can weight a batch average.
TensorPtr masked_predict_loss(model::AcousticModel& m,
                              const TensorPtr& features,
                              const kmeans::Codebook& book,
                              const MaskSpec& spec, Rng& rng,
                              int* n_masked = nullptr);

// InfoNCE over cosine similarities at temperature tau: anchor row i of
// `context` scores candidates[positives[i]] as its positive and the
// candidates rows listed in negatives[i] as distractors. Every anchor must
// list the same number of negatives.
TensorPtr info_nce(const TensorPtr& context, const TensorPtr& candidates,
                   const std::vector<int>& positives,
                   const std::vector<std::vector<int>>& negatives,
                   double temperature);

// Contrastive loss of one utterance: anchors are the projected masked
// encoder states, positives the front-end outputs at the same steps, and
// negatives are drawn uniformly from the other masked steps. When fewer
// distinct candidates exist than n_negatives the draw falls back to
// replacement sampling and bumps *replacement_warnings once per anchor.
TensorPtr contrastive_loss(model::AcousticModel& m, const TensorPtr& features,
                           const MaskSpec& spec, int n_negatives,
                           double temperature, Rng& rng,
                           int* replacement_warnings = nullptr,
                           int* n_masked = nullptr);

}  // namespace draft::ssl
