#include "draftlab/metrics.hpp"

#include "draftlab/ctc.hpp"
#include "draftlab/error.hpp"
#include "draftlab/ops.hpp"
#include "draftlab/text.hpp"

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

namespace draft::metrics {

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> words;
    std::istringstream in(text);
    std::string word;
    while (in >> word) words.push_back(word);
    return words;
}

EditCounts edit_distance(const std::vector<std::string>& ref,
                         const std::vector<std::string>& hyp) {
    const int n = static_cast<int>(ref.size());
    const int m = static_cast<int>(hyp.size());
    const int w = m + 1;
    std::vector<int> d(static_cast<std::size_t>(n + 1) * w);
    for (int i = 0; i <= n; ++i) d[static_cast<std::size_t>(i) * w] = i;
    for (int j = 0; j <= m; ++j) d[static_cast<std::size_t>(j)] = j;
    for (int i = 1; i <= n; ++i)
        for (int j = 1; j <= m; ++j) {
            const int sub = d[static_cast<std::size_t>(i - 1) * w + j - 1] +
                            (ref[static_cast<std::size_t>(i - 1)] ==
                                     hyp[static_cast<std::size_t>(j - 1)]
                                 ? 0
                                 : 1);
            const int del = d[static_cast<std::size_t>(i - 1) * w + j] + 1;
            const int ins = d[static_cast<std::size_t>(i) * w + j - 1] + 1;
            d[static_cast<std::size_t>(i) * w + j] =
                std::min(sub, std::min(del, ins));
        }

    EditCounts counts;
    int i = n;
    int j = m;
    while (i > 0 || j > 0) {
        const int here = d[static_cast<std::size_t>(i) * w + j];
        if (i > 0 && j > 0) {
            const bool match = ref[static_cast<std::size_t>(i - 1)] ==
                               hyp[static_cast<std::size_t>(j - 1)];
            if (here == d[static_cast<std::size_t>(i - 1) * w + j - 1] +
                            (match ? 0 : 1)) {
                if (!match) ++counts.substitutions;
                --i;
                --j;
                continue;
            }
        }
        if (i > 0 && here == d[static_cast<std::size_t>(i - 1) * w + j] + 1) {
            ++counts.deletions;
            --i;
            continue;
        }
        ++counts.insertions;
        --j;
    }
    return counts;
}

CorpusScore score_corpus(const std::vector<ScoreRecord>& records) {
    CorpusScore score;
    for (const auto& record : records) {
        UtteranceScore u;
        u.record = record;
        const auto ref = split_words(record.ref);
        const auto hyp = split_words(record.hyp);
        u.counts = edit_distance(ref, hyp);
        u.ref_words = static_cast<int>(ref.size());
        score.totals.substitutions += u.counts.substitutions;
        score.totals.insertions += u.counts.insertions;
        score.totals.deletions += u.counts.deletions;
        score.ref_words += u.ref_words;
        score.utterances.push_back(std::move(u));
    }
    check(score.ref_words > 0, ErrorCode::kUndefinedWer,
          "word error rate is undefined: the references contain no words");
    score.wer = static_cast<double>(score.totals.total()) / score.ref_words;
    return score;
}

std::string format_report(const CorpusScore& score) {
    std::string out;
    char buf[96];
    for (const auto& u : score.utterances) {
        std::snprintf(buf, sizeof(buf), "\t%d,%d,%d\n",
                      u.counts.substitutions, u.counts.insertions,
                      u.counts.deletions);
        out += u.record.id + "\t" + u.record.ref + "\t" + u.record.hyp + buf;
    }
    std::snprintf(buf, sizeof(buf), "WER\t%.6f\t%d,%d,%d\tref_words=%d\n",
                  score.wer, score.totals.substitutions,
                  score.totals.insertions, score.totals.deletions,
                  score.ref_words);
    out += buf;
    return out;
}

std::string decode_utterance(model::AcousticModel& m,
                             const TensorPtr& features) {
    auto logp = ops::log_softmax_rows(m.asr_logits(m.encode(features)));
    const auto ids =
        ctc::greedy_decode(logp->data.data(), logp->rows(), logp->cols());
    return text::detokenize(ids);
}

TensorPtr asr_batch_loss(model::AcousticModel& m, const data::Batch& batch,
                         int* skipped) {
    const int b = static_cast<int>(batch.feature_lengths.size());
    check(b >= 1, ErrorCode::kConfig, "batch is empty");
    int kept = 0;
    int dropped = 0;
    TensorPtr total;
    for (int i = 0; i < b; ++i) {
        const auto tokens = data::batch_item_tokens(batch, i);
        const int t_out = m.frontend_out_len(
            batch.feature_lengths[static_cast<std::size_t>(i)]);
        if (t_out < ctc::min_frames(tokens)) {
            ++dropped;
            continue;
        }
        auto features = data::batch_item_features(batch, i);
        auto logp = ops::log_softmax_rows(m.asr_logits(m.encode(features)));
        auto loss = ops::ctc_loss(logp, tokens);
        total = total ? ops::add(total, loss) : loss;
        ++kept;
    }
    if (skipped) *skipped = dropped;
    check(kept > 0, ErrorCode::kTraining,
          "every item in the batch was too short for its labels");
    return ops::scale(total, 1.0 / kept);
}

}  // namespace draft::metrics
