#pragma once

#include "draftlab/checkpoint.hpp"
#include "draftlab/data.hpp"
#include "draftlab/kmeans.hpp"
#include "draftlab/model.hpp"
#include "draftlab/optim.hpp"
#include "draftlab/schedule.hpp"
#include "draftlab/ssl.hpp"

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace draft::stages {

enum class StageKind { kPretrain, kAdapt, kFinetune };
enum class Objective { kApc, kMaskedPredict, kContrastive, kCtc };
enum class CorpusRef { kSource, kTarget };

const char* stage_name(StageKind stage);
const char* objective_name(Objective objective);
const char* corpus_name(CorpusRef corpus);

// Head the model must carry to train a given objective.
model::HeadKind head_for(Objective objective);

using SchedulerConfig = std::variant<NoamConfig, TriStageConfig>;

double scheduled_lr(const SchedulerConfig& sched, int step);
double peak_lr(const SchedulerConfig& sched);

// One training stage: which corpus it reads, what loss it minimizes, which
// parameter groups move, and how long it runs.
struct StagePlan {
    StageKind stage = StageKind::kPretrain;
    CorpusRef corpus = CorpusRef::kSource;
    Objective objective = Objective::kApc;
    std::set<ParamGroup> trainable_groups;
    int steps = 0;
    int batch_size = 1;
    SchedulerConfig scheduler = NoamConfig{};
    std::uint64_t seed = 0;
};

// Feature-space augmentation while training: per item, a speed resample
// with a factor drawn from `speed_factors`, then SpecAug masking. Off by
// default; the two flags choose which stages it covers (pretraining is
// never augmented).
struct AugmentSpec {
    bool finetune_stage = false;
    bool adapt_stage = false;
    int time_masks = 2;
    int max_time_width = 10;
    int freq_masks = 2;
    int max_freq_width = 8;
    std::vector<double> speed_factors = {0.9, 1.0, 1.1};

    bool active_for(StageKind stage) const;
    void validate() const;
};

// Everything a stage needs besides its plan: the corpora and the loss
// hyperparameters shared across stages.
struct TrainEnv {
    const std::vector<data::Utterance>* source = nullptr;
    const std::vector<data::Utterance>* target = nullptr;
    const kmeans::Codebook* codebook = nullptr;  // masked objective only
    ssl::MaskSpec mask;
    int n_negatives = 10;
    double temperature = 0.1;
    int log_every = 10;
    AdamConfig adam;
    AugmentSpec augment;
};

struct MetricsRow {
    int step = 0;
    double lr = 0.0;
    double loss = 0.0;
};

// One line per row: step<TAB>lr<TAB>loss.
std::string format_metrics(const std::vector<MetricsRow>& rows);

struct StageReport {
    StageKind stage = StageKind::kPretrain;
    Objective objective = Objective::kApc;
    CorpusRef corpus = CorpusRef::kSource;
    int steps = 0;
    std::uint64_t seed = 0;
    std::int64_t trainable_params = 0;
    std::vector<MetricsRow> log;  // step 1, every log_every, and the last
    double first_loss = 0.0;
    double final_loss = 0.0;
    int skipped_items = 0;          // CTC items shorter than their labels
    int replacement_warnings = 0;   // contrastive draws that fell back
    std::vector<std::uint64_t> rng_words;  // batch-order + loss streams
};

// Runs one stage in place: freezes everything outside plan.trainable_groups,
// steps a fresh optimizer under the plan's schedule, and bumps the stage
// counter of exactly the trained groups. Parameters outside the trained
// groups end bit-identical to how they started.
StageReport run_stage(model::AcousticModel& m, const StagePlan& plan,
                      const TrainEnv& env);

struct PipelineResult {
    model::AcousticModel model;
    std::vector<StageReport> stages;
    std::vector<std::string> checkpoints;  // archive per completed stage
    std::vector<std::string> notes;        // warnings and skip records
    std::array<std::uint32_t, kGroupCount> update_counts{};
};

// Pretraining alone: one SSL stage on the source corpus, archived for reuse
// by the other pipelines (resume or adapter finetuning). Bit-identical to
// the first stage of run_draft under the same plan.
PipelineResult run_pretrain(const model::ModelConfig& cfg,
                            const TrainEnv& env, const StagePlan& pretrain,
                            const std::string& work_dir);

// Residual-adapter pipeline: pretrain on the source corpus, train the
// zero-initialized adapters alone on the target corpus under the same
// objective, then swap in an ASR head and finetune with CTC. When
// `resume_pretrain` is given the first stage is restored from it instead of
// trained. Changing the objective between pretraining and adaptation is an
// error unless `allow_objective_switch` is set, which downgrades it to a
// recorded note.
PipelineResult run_draft(const model::ModelConfig& cfg, const TrainEnv& env,
                         const StagePlan& pretrain, const StagePlan& adapt,
                         const StagePlan& finetune, int d_ada,
                         const std::string& work_dir,
                         const checkpoint::Checkpoint* resume_pretrain = nullptr,
                         bool allow_objective_switch = false);

// Whole-backbone continued pretraining on the target corpus, no adapters.
// The adaptation stage restarts both optimizer and schedule; a peak
// adaptation rate at or above the pretraining peak is noted, not rejected.
// Zero adaptation steps skip the stage, leaving a plain pretrain + finetune
// run.
PipelineResult run_saft(const model::ModelConfig& cfg, const TrainEnv& env,
                        const StagePlan& pretrain, const StagePlan& adapt,
                        const StagePlan& finetune,
                        const std::string& work_dir,
                        const checkpoint::Checkpoint* resume_pretrain = nullptr,
                        bool allow_objective_switch = false);

// Pretrain on the source corpus, then CTC finetune; no adaptation stage.
PipelineResult run_finetune(const model::ModelConfig& cfg,
                            const TrainEnv& env, const StagePlan& pretrain,
                            const StagePlan& finetune,
                            const std::string& work_dir,
                            const checkpoint::Checkpoint* resume_pretrain =
                                nullptr);

// CTC training from random initialization; no pretraining at all.
PipelineResult run_baseline(const model::ModelConfig& cfg,
                            const TrainEnv& env, const StagePlan& finetune,
                            const std::string& work_dir);

// Fresh zero-initialized adapters on a frozen pretrained backbone, trained
// jointly with the ASR head by CTC. The backbone is loaded from the archive
// and never updated.
PipelineResult run_adapter_finetune(const model::ModelConfig& cfg,
                                    const TrainEnv& env,
                                    const checkpoint::Checkpoint& pretrained,
                                    int d_ada, const StagePlan& finetune,
                                    const std::string& work_dir);

// CTC finetune on this environment's target corpus starting from a donor's
// adapted archive: backbone and adapters come from the archive, the ASR head
// starts fresh. With the donor's own environment and plans this reproduces
// the third stage of run_draft bit for bit.
PipelineResult cross_transfer(const model::ModelConfig& cfg,
                              const TrainEnv& env,
                              const checkpoint::Checkpoint& adapted,
                              int d_ada, const StagePlan& finetune,
                              const std::string& work_dir);

// The adapter-free counterpart: CTC finetune starting from a donor's
// whole-backbone adapted archive, ASR head fresh. The archive must carry no
// adapter tensors. With the donor's own environment and plans this
// reproduces the third stage of run_saft bit for bit.
PipelineResult saft_transfer(const model::ModelConfig& cfg,
                             const TrainEnv& env,
                             const checkpoint::Checkpoint& adapted,
                             const StagePlan& finetune,
                             const std::string& work_dir);

}  // namespace draft::stages
