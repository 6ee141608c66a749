#pragma once

#include "draftlab/data.hpp"
#include "draftlab/model.hpp"
#include "draftlab/tensor.hpp"

#include <string>
#include <vector>

namespace draft::metrics {

struct EditCounts {
    int substitutions = 0;
    int insertions = 0;
    int deletions = 0;
    int total() const { return substitutions + insertions + deletions; }
};

// Whitespace word tokenization for scoring.
std::vector<std::string> split_words(const std::string& text);

// Unit-cost alignment counts of the hypothesis against the reference.
// Backtrace preference is fixed (substitution, deletion, insertion), so the
// split of the minimal distance is deterministic.
EditCounts edit_distance(const std::vector<std::string>& ref,
                         const std::vector<std::string>& hyp);

struct ScoreRecord {
    std::string id;
    std::string ref;
    std::string hyp;
};

struct UtteranceScore {
    ScoreRecord record;
    EditCounts counts;
    int ref_words = 0;
};

struct CorpusScore {
    std::vector<UtteranceScore> utterances;
    EditCounts totals;
    int ref_words = 0;
    double wer = 0.0;  // total edits over total reference words
};

// Corpus-level word error rate. A corpus whose references hold no words at
// all has no defined rate and raises kUndefinedWer.
CorpusScore score_corpus(const std::vector<ScoreRecord>& records);

// One line per utterance, "id<TAB>ref<TAB>hyp<TAB>S,I,D", then one aggregate
// line "WER<TAB>value<TAB>S,I,D<TAB>ref_words=N".
std::string format_report(const CorpusScore& score);

// Greedy transcript of one utterance under the ASR head.
std::string decode_utterance(model::AcousticModel& m,
                             const TensorPtr& features);

// Mean CTC loss over the batch items whose encoder output can still fit
// their label sequence; too-short items are skipped and counted in *skipped.
// A batch with no feasible item at all cannot produce a loss.
TensorPtr asr_batch_loss(model::AcousticModel& m, const data::Batch& batch,
                         int* skipped = nullptr);

}  // namespace draft::metrics
