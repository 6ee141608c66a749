#include "draftlab/stages.hpp"

#include "draftlab/ctc.hpp"
#include "draftlab/error.hpp"
#include "draftlab/features.hpp"
#include "draftlab/ops.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <utility>

namespace draft::stages {

const char* stage_name(StageKind stage) {
    switch (stage) {
        case StageKind::kPretrain: return "pretrain";
        case StageKind::kAdapt: return "adapt";
        case StageKind::kFinetune: return "finetune";
    }
    return "?";
}

const char* objective_name(Objective objective) {
    switch (objective) {
        case Objective::kApc: return "apc";
        case Objective::kMaskedPredict: return "masked_predict";
        case Objective::kContrastive: return "contrastive";
        case Objective::kCtc: return "ctc";
    }
    return "?";
}

const char* corpus_name(CorpusRef corpus) {
    return corpus == CorpusRef::kSource ? "source" : "target";
}

model::HeadKind head_for(Objective objective) {
    switch (objective) {
        case Objective::kApc: return model::HeadKind::kApc;
        case Objective::kMaskedPredict: return model::HeadKind::kMaskedPredict;
        case Objective::kContrastive: return model::HeadKind::kContrastive;
        case Objective::kCtc: return model::HeadKind::kAsr;
    }
    return model::HeadKind::kApc;
}

double scheduled_lr(const SchedulerConfig& sched, int step) {
    if (const auto* noam = std::get_if<NoamConfig>(&sched))
        return noam_lr(*noam, step);
    return tristage_lr(std::get<TriStageConfig>(sched), step);
}

double peak_lr(const SchedulerConfig& sched) {
    if (const auto* noam = std::get_if<NoamConfig>(&sched))
        return noam_lr(*noam, noam->warmup_steps);
    return std::get<TriStageConfig>(sched).peak_lr;
}

bool AugmentSpec::active_for(StageKind stage) const {
    return (stage == StageKind::kFinetune && finetune_stage) ||
           (stage == StageKind::kAdapt && adapt_stage);
}

void AugmentSpec::validate() const {
    check(time_masks >= 0 && max_time_width >= 0 && freq_masks >= 0 &&
              max_freq_width >= 0,
          ErrorCode::kConfig, "augmentation mask counts and widths must be "
                              "non-negative");
    check(!speed_factors.empty(), ErrorCode::kConfig,
          "augmentation needs at least one speed factor");
    for (double f : speed_factors)
        check(f > 0.0, ErrorCode::kConfig,
              "speed factors must be positive, got " + std::to_string(f));
}

std::string format_metrics(const std::vector<MetricsRow>& rows) {
    std::string out;
    char line[96];
    for (const auto& row : rows) {
        std::snprintf(line, sizeof(line), "%d\t%.10g\t%.10g\n", row.step,
                      row.lr, row.loss);
        out += line;
    }
    return out;
}

namespace {

// Fork labels: each derived stream depends only on (seed, label), so the
// same plan seed reproduces the same batches, masks, and fresh heads no
// matter which pipeline drives the stage.
constexpr std::uint64_t kForkOrder = 1;
constexpr std::uint64_t kForkLoss = 2;
constexpr std::uint64_t kForkInit = 3;
constexpr std::uint64_t kForkHead = 4;
constexpr std::uint64_t kForkAdapters = 5;
constexpr std::uint64_t kForkScaffold = 6;
constexpr std::uint64_t kForkAugment = 7;

const std::vector<data::Utterance>& resolve_corpus(const TrainEnv& env,
                                                   CorpusRef ref) {
    const auto* corpus = ref == CorpusRef::kSource ? env.source : env.target;
    check(corpus != nullptr, ErrorCode::kConfig,
          std::string("the plan reads the ") + corpus_name(ref) +
              " corpus but none was provided");
    check(!corpus->empty(), ErrorCode::kConfig,
          std::string("the ") + corpus_name(ref) + " corpus is empty");
    return *corpus;
}

// Endless utterance-index stream: a fresh permutation per pass, batches cut
// sequentially so every utterance is visited once per pass.
struct IndexStream {
    std::vector<int> order;
    std::size_t pos = 0;
    Rng rng;

    IndexStream(int n, Rng r) : order(n), rng(r) {
        std::iota(order.begin(), order.end(), 0);
        reshuffle();
    }

    void reshuffle() {
        for (std::size_t i = order.size(); i > 1; --i) {
            auto j = rng.uniform_index(i);
            std::swap(order[i - 1], order[j]);
        }
        pos = 0;
    }

    int next() {
        if (pos == order.size()) reshuffle();
        return order[pos++];
    }
};

void validate_scheduler(const SchedulerConfig& sched, int plan_steps) {
    if (const auto* noam = std::get_if<NoamConfig>(&sched)) {
        noam_lr(*noam, 1);  // raises on bad fields
        return;
    }
    const auto& tri = std::get<TriStageConfig>(sched);
    validate(tri);
    check(tri.total_steps >= plan_steps, ErrorCode::kConfig,
          "the schedule covers " + std::to_string(tri.total_steps) +
              " steps but the plan runs " + std::to_string(plan_steps));
}

std::string join_ids(const std::vector<std::string>& ids) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ", ";
        out += ids[i];
    }
    return out;
}

struct BatchLoss {
    TensorPtr loss;          // null when every item was skipped
    int skipped = 0;
    int replacement_warnings = 0;
};

// Speed resample plus SpecAug under the dedicated stream; draw order per
// item is fixed (factor, then mask seed) so the stream stays aligned with
// the batch order.
TensorPtr augment_item(const TensorPtr& features, const AugmentSpec& aug,
                       Rng& rng) {
    const double factor =
        aug.speed_factors[rng.uniform_index(aug.speed_factors.size())];
    auto out = features::speed_perturb(features, factor);
    return features::spec_augment(out, aug.time_masks, aug.max_time_width,
                                  aug.freq_masks, aug.max_freq_width,
                                  rng.next_u64());
}

BatchLoss batch_loss(model::AcousticModel& m, Objective objective,
                     const std::vector<const data::Utterance*>& items,
                     const TrainEnv& env, Rng& loss_rng, Rng* aug_rng) {
    BatchLoss out;
    std::vector<TensorPtr> parts;
    parts.reserve(items.size());
    for (const auto* item : items) {
        TensorPtr feats = item->features;
        if (aug_rng != nullptr)
            feats = augment_item(feats, env.augment, *aug_rng);
        switch (objective) {
            case Objective::kApc:
                parts.push_back(ssl::apc_utterance_loss(m, feats));
                break;
            case Objective::kMaskedPredict:
                parts.push_back(ssl::masked_predict_loss(
                    m, feats, *env.codebook, env.mask, loss_rng));
                break;
            case Objective::kContrastive: {
                int warned = 0;
                parts.push_back(ssl::contrastive_loss(
                    m, feats, env.mask, env.n_negatives, env.temperature,
                    loss_rng, &warned));
                out.replacement_warnings += warned;
                break;
            }
            case Objective::kCtc: {
                int t_out = m.frontend_out_len(feats->rows());
                if (t_out < ctc::min_frames(item->transcript)) {
                    ++out.skipped;
                    break;
                }
                auto logp =
                    ops::log_softmax_rows(m.asr_logits(m.encode(feats)));
                parts.push_back(ops::ctc_loss(logp, item->transcript));
                break;
            }
        }
    }
    if (parts.empty()) return out;
    TensorPtr total = parts[0];
    for (std::size_t i = 1; i < parts.size(); ++i)
        total = ops::add(total, parts[i]);
    out.loss = parts.size() == 1
                   ? total
                   : ops::scale(total, 1.0 / static_cast<double>(parts.size()));
    return out;
}

void validate_plan(const model::AcousticModel& m, const StagePlan& plan,
                   const TrainEnv& env) {
    check(plan.steps >= 1, ErrorCode::kConfig,
          std::string(stage_name(plan.stage)) +
              " stage needs at least one step, got " +
              std::to_string(plan.steps));
    check(plan.batch_size >= 1, ErrorCode::kConfig,
          "batch size must be at least 1, got " +
              std::to_string(plan.batch_size));
    check(!plan.trainable_groups.empty(), ErrorCode::kConfig,
          "the plan marks no parameter group trainable");
    for (ParamGroup g : plan.trainable_groups)
        check(m.store().count_params(g) > 0, ErrorCode::kConfig,
              std::string("the plan trains the ") + group_name(g) +
                  " group but the model has no such parameters");
    check(m.head_kind() == head_for(plan.objective), ErrorCode::kConfig,
          std::string("objective ") + objective_name(plan.objective) +
              " does not match the model's head");
    validate_scheduler(plan.scheduler, plan.steps);
    if (plan.objective == Objective::kMaskedPredict) {
        check(env.codebook != nullptr, ErrorCode::kConfig,
              "the masked objective needs a codebook");
        check(env.codebook->k == m.head_classes(), ErrorCode::kConfig,
              "codebook size " + std::to_string(env.codebook->k) +
                  " does not match the head's " +
                  std::to_string(m.head_classes()) + " classes");
    }
    if (plan.objective == Objective::kMaskedPredict ||
        plan.objective == Objective::kContrastive)
        env.mask.validate();
    if (plan.objective == Objective::kContrastive) {
        check(env.n_negatives >= 1, ErrorCode::kConfig,
              "contrastive training needs at least one negative");
        check(env.temperature > 0.0, ErrorCode::kConfig,
              "temperature must be positive");
    }
    check(env.log_every >= 1, ErrorCode::kConfig,
          "log cadence must be at least 1");
    if (env.augment.active_for(plan.stage)) env.augment.validate();
}

}  // namespace

StageReport run_stage(model::AcousticModel& m, const StagePlan& plan,
                      const TrainEnv& env) {
    validate_plan(m, plan, env);
    const auto& corpus = resolve_corpus(env, plan.corpus);

    StageReport report;
    report.stage = plan.stage;
    report.objective = plan.objective;
    report.corpus = plan.corpus;
    report.steps = plan.steps;
    report.seed = plan.seed;

    m.store().set_trainable_groups(plan.trainable_groups);
    for (ParamGroup g : plan.trainable_groups)
        report.trainable_params += m.store().count_params(g);

    Rng root(plan.seed);
    Rng order_rng = root.fork(kForkOrder);
    Rng loss_rng = root.fork(kForkLoss);
    Rng aug_rng = root.fork(kForkAugment);
    const bool augmented = env.augment.active_for(plan.stage);
    IndexStream stream(static_cast<int>(corpus.size()), order_rng);
    AdamState adam(env.adam);

    for (int step = 1; step <= plan.steps; ++step) {
        std::vector<const data::Utterance*> items;
        std::vector<std::string> ids;
        for (int b = 0; b < plan.batch_size; ++b) {
            const auto& utt = corpus[static_cast<std::size_t>(stream.next())];
            items.push_back(&utt);
            ids.push_back(utt.id);
        }

        m.store().zero_grads();
        BatchLoss batch = batch_loss(m, plan.objective, items, env, loss_rng,
                                     augmented ? &aug_rng : nullptr);
        report.skipped_items += batch.skipped;
        report.replacement_warnings += batch.replacement_warnings;
        check(batch.loss != nullptr, ErrorCode::kTraining,
              "every item in the batch was too short for its labels at step " +
                  std::to_string(step) + " (batch: " + join_ids(ids) + ")");

        double loss_value = static_cast<double>(batch.loss->data[0]);
        check(std::isfinite(loss_value), ErrorCode::kTraining,
              "non-finite loss at step " + std::to_string(step) +
                  " (batch: " + join_ids(ids) + ")");

        backward(batch.loss);
        double lr = scheduled_lr(plan.scheduler, step);
        adam.step(m.store(), lr);

        if (step == 1) report.first_loss = loss_value;
        if (step == plan.steps) report.final_loss = loss_value;
        if (step == 1 || step == plan.steps || step % env.log_every == 0)
            report.log.push_back({step, lr, loss_value});
    }

    m.store().note_stage(plan.trainable_groups);
    report.rng_words = stream.rng.serialize();
    for (std::uint64_t w : loss_rng.serialize()) report.rng_words.push_back(w);
    return report;
}

namespace {

std::string save_stage(const std::string& work_dir, StageKind stage,
                       const ParamStore& store, const StageReport& report,
                       std::vector<std::string>& paths) {
    checkpoint::TrainState state;
    state.step = static_cast<std::uint64_t>(report.steps);
    state.rng_words = report.rng_words;
    const std::string path =
        work_dir + "/" + stage_name(stage) + ".ckpt";
    checkpoint::save_checkpoint(path, store, state);
    paths.push_back(path);
    return path;
}

void expect_kind(const StagePlan& plan, StageKind kind) {
    check(plan.stage == kind, ErrorCode::kConfig,
          std::string("expected a ") + stage_name(kind) + " plan, got " +
              stage_name(plan.stage));
}

void expect_corpus(const StagePlan& plan, CorpusRef ref) {
    check(plan.corpus == ref, ErrorCode::kConfig,
          std::string(stage_name(plan.stage)) + " must read the " +
              corpus_name(ref) + " corpus");
}

void expect_groups(const StagePlan& plan, const std::set<ParamGroup>& want) {
    check(plan.trainable_groups == want, ErrorCode::kConfig,
          std::string("the ") + stage_name(plan.stage) +
              " stage trains a fixed parameter-group set in this pipeline");
}

void expect_ctc_groups(const StagePlan& plan,
                       const std::set<ParamGroup>& allowed) {
    check(plan.objective == Objective::kCtc, ErrorCode::kConfig,
          "the finetune stage must train with CTC");
    check(plan.trainable_groups.count(ParamGroup::kAsrHead) > 0,
          ErrorCode::kConfig, "the finetune stage must train the ASR head");
    for (ParamGroup g : plan.trainable_groups)
        check(allowed.count(g) > 0, ErrorCode::kConfig,
              std::string("the finetune stage cannot train the ") +
                  group_name(g) + " group here");
}

void expect_ssl(const StagePlan& plan) {
    check(plan.objective != Objective::kCtc, ErrorCode::kConfig,
          std::string(stage_name(plan.stage)) +
              " needs a self-supervised objective, got ctc");
}

int ssl_head_classes(Objective objective, const TrainEnv& env) {
    if (objective != Objective::kMaskedPredict) return 0;
    check(env.codebook != nullptr, ErrorCode::kConfig,
          "the masked objective needs a codebook");
    return env.codebook->k;
}

// Objective agreement between pretraining and adaptation; a switch is only
// allowed when explicitly requested, and is then recorded.
void check_objective_pair(const StagePlan& pretrain, const StagePlan& adapt,
                          bool allow_switch,
                          std::vector<std::string>& notes) {
    if (pretrain.objective == adapt.objective) return;
    if (!allow_switch)
        fail(ErrorCode::kConfig,
             std::string("adaptation objective ") +
                 objective_name(adapt.objective) +
                 " differs from pretraining objective " +
                 objective_name(pretrain.objective) +
                 "; pass the objective-switch override to allow this");
    notes.push_back(std::string("objective switched from ") +
                    objective_name(pretrain.objective) + " to " +
                    objective_name(adapt.objective) + " for adaptation");
}

model::AcousticModel build_ssl_model(const model::ModelConfig& cfg,
                                     const StagePlan& pretrain,
                                     const TrainEnv& env) {
    Rng root(pretrain.seed);
    Rng init = root.fork(kForkInit);
    return model::AcousticModel(cfg, head_for(pretrain.objective),
                                ssl_head_classes(pretrain.objective, env),
                                init);
}

void run_or_restore_pretrain(model::AcousticModel& m, const TrainEnv& env,
                             const StagePlan& pretrain,
                             const checkpoint::Checkpoint* resume,
                             const std::string& work_dir,
                             PipelineResult& result) {
    if (resume != nullptr) {
        checkpoint::restore_into(m.store(), *resume);
        result.notes.push_back("pretraining restored from a checkpoint");
        return;
    }
    result.stages.push_back(run_stage(m, pretrain, env));
    save_stage(work_dir, StageKind::kPretrain, m.store(),
               result.stages.back(), result.checkpoints);
}

void swap_to_asr(model::AcousticModel& m, const StagePlan& finetune) {
    Rng root(finetune.seed);
    Rng head_rng = root.fork(kForkHead);
    m.swap_head(model::HeadKind::kAsr, 0, head_rng);
}

void note_peak_lr(const StagePlan& pretrain, const StagePlan& adapt,
                  std::vector<std::string>& notes) {
    double pre = peak_lr(pretrain.scheduler);
    double ada = peak_lr(adapt.scheduler);
    if (ada >= pre) {
        char line[160];
        std::snprintf(line, sizeof(line),
                      "adaptation peak learning rate %.6g is not below the "
                      "pretraining peak %.6g",
                      ada, pre);
        notes.emplace_back(line);
    }
}

}  // namespace

PipelineResult run_pretrain(const model::ModelConfig& cfg,
                            const TrainEnv& env, const StagePlan& pretrain,
                            const std::string& work_dir) {
    expect_kind(pretrain, StageKind::kPretrain);
    expect_ssl(pretrain);
    expect_corpus(pretrain, CorpusRef::kSource);
    expect_groups(pretrain, {ParamGroup::kBackbone, ParamGroup::kSslHead});

    PipelineResult result{build_ssl_model(cfg, pretrain, env), {}, {}, {}, {}};
    result.stages.push_back(run_stage(result.model, pretrain, env));
    save_stage(work_dir, StageKind::kPretrain, result.model.store(),
               result.stages.back(), result.checkpoints);

    result.update_counts = result.model.store().stage_counts();
    return result;
}

PipelineResult run_draft(const model::ModelConfig& cfg, const TrainEnv& env,
                         const StagePlan& pretrain, const StagePlan& adapt,
                         const StagePlan& finetune, int d_ada,
                         const std::string& work_dir,
                         const checkpoint::Checkpoint* resume_pretrain,
                         bool allow_objective_switch) {
    expect_kind(pretrain, StageKind::kPretrain);
    expect_kind(adapt, StageKind::kAdapt);
    expect_kind(finetune, StageKind::kFinetune);
    expect_ssl(pretrain);
    expect_corpus(pretrain, CorpusRef::kSource);
    expect_corpus(adapt, CorpusRef::kTarget);
    expect_groups(pretrain, {ParamGroup::kBackbone, ParamGroup::kSslHead});
    expect_groups(adapt, {ParamGroup::kAdapter});
    expect_ctc_groups(finetune, {ParamGroup::kBackbone, ParamGroup::kAdapter,
                                 ParamGroup::kAsrHead});
    check(d_ada >= 1, ErrorCode::kConfig,
          "adapter width must be at least 1, got " + std::to_string(d_ada));

    PipelineResult result{build_ssl_model(cfg, pretrain, env), {}, {}, {}, {}};
    check_objective_pair(pretrain, adapt, allow_objective_switch,
                         result.notes);

    run_or_restore_pretrain(result.model, env, pretrain, resume_pretrain,
                            work_dir, result);

    Rng adapter_rng = Rng(adapt.seed).fork(kForkAdapters);
    result.model.insert_adapters(d_ada, adapter_rng);
    if (pretrain.objective != adapt.objective) {
        Rng swap_rng = Rng(adapt.seed).fork(kForkHead);
        result.model.swap_head(head_for(adapt.objective),
                               ssl_head_classes(adapt.objective, env),
                               swap_rng);
    }
    if (adapt.steps == 0) {
        result.notes.push_back("adaptation skipped: the plan has 0 steps");
    } else {
        result.stages.push_back(run_stage(result.model, adapt, env));
        save_stage(work_dir, StageKind::kAdapt, result.model.store(),
                   result.stages.back(), result.checkpoints);
    }

    swap_to_asr(result.model, finetune);
    result.stages.push_back(run_stage(result.model, finetune, env));
    save_stage(work_dir, StageKind::kFinetune, result.model.store(),
               result.stages.back(), result.checkpoints);

    result.update_counts = result.model.store().stage_counts();
    return result;
}

PipelineResult run_saft(const model::ModelConfig& cfg, const TrainEnv& env,
                        const StagePlan& pretrain, const StagePlan& adapt,
                        const StagePlan& finetune,
                        const std::string& work_dir,
                        const checkpoint::Checkpoint* resume_pretrain,
                        bool allow_objective_switch) {
    expect_kind(pretrain, StageKind::kPretrain);
    expect_kind(adapt, StageKind::kAdapt);
    expect_kind(finetune, StageKind::kFinetune);
    expect_ssl(pretrain);
    expect_corpus(pretrain, CorpusRef::kSource);
    expect_corpus(adapt, CorpusRef::kTarget);
    expect_groups(pretrain, {ParamGroup::kBackbone, ParamGroup::kSslHead});
    expect_groups(adapt, {ParamGroup::kBackbone, ParamGroup::kSslHead});
    expect_ctc_groups(finetune,
                      {ParamGroup::kBackbone, ParamGroup::kAsrHead});

    PipelineResult result{build_ssl_model(cfg, pretrain, env), {}, {}, {}, {}};
    check_objective_pair(pretrain, adapt, allow_objective_switch,
                         result.notes);

    run_or_restore_pretrain(result.model, env, pretrain, resume_pretrain,
                            work_dir, result);

    if (adapt.steps == 0) {
        result.notes.push_back("adaptation skipped: the plan has 0 steps");
    } else {
        if (pretrain.objective != adapt.objective) {
            Rng swap_rng = Rng(adapt.seed).fork(kForkHead);
            result.model.swap_head(head_for(adapt.objective),
                                   ssl_head_classes(adapt.objective, env),
                                   swap_rng);
        }
        note_peak_lr(pretrain, adapt, result.notes);
        result.notes.push_back(
            "adaptation restarted the optimizer state and schedule");
        result.stages.push_back(run_stage(result.model, adapt, env));
        save_stage(work_dir, StageKind::kAdapt, result.model.store(),
                   result.stages.back(), result.checkpoints);
    }

    swap_to_asr(result.model, finetune);
    result.stages.push_back(run_stage(result.model, finetune, env));
    save_stage(work_dir, StageKind::kFinetune, result.model.store(),
               result.stages.back(), result.checkpoints);

    result.update_counts = result.model.store().stage_counts();
    return result;
}

PipelineResult run_finetune(const model::ModelConfig& cfg,
                            const TrainEnv& env, const StagePlan& pretrain,
                            const StagePlan& finetune,
                            const std::string& work_dir,
                            const checkpoint::Checkpoint* resume_pretrain) {
    expect_kind(pretrain, StageKind::kPretrain);
    expect_kind(finetune, StageKind::kFinetune);
    expect_ssl(pretrain);
    expect_corpus(pretrain, CorpusRef::kSource);
    expect_groups(pretrain, {ParamGroup::kBackbone, ParamGroup::kSslHead});
    expect_ctc_groups(finetune,
                      {ParamGroup::kBackbone, ParamGroup::kAsrHead});

    PipelineResult result{build_ssl_model(cfg, pretrain, env), {}, {}, {}, {}};
    run_or_restore_pretrain(result.model, env, pretrain, resume_pretrain,
                            work_dir, result);

    swap_to_asr(result.model, finetune);
    result.stages.push_back(run_stage(result.model, finetune, env));
    save_stage(work_dir, StageKind::kFinetune, result.model.store(),
               result.stages.back(), result.checkpoints);

    result.update_counts = result.model.store().stage_counts();
    return result;
}

PipelineResult run_baseline(const model::ModelConfig& cfg,
                            const TrainEnv& env, const StagePlan& finetune,
                            const std::string& work_dir) {
    expect_kind(finetune, StageKind::kFinetune);
    expect_ctc_groups(finetune,
                      {ParamGroup::kBackbone, ParamGroup::kAsrHead});

    Rng root(finetune.seed);
    Rng init = root.fork(kForkInit);
    PipelineResult result{
        model::AcousticModel(cfg, model::HeadKind::kAsr, 0, init),
        {}, {}, {}, {}};

    result.stages.push_back(run_stage(result.model, finetune, env));
    save_stage(work_dir, StageKind::kFinetune, result.model.store(),
               result.stages.back(), result.checkpoints);

    result.update_counts = result.model.store().stage_counts();
    return result;
}

PipelineResult run_adapter_finetune(const model::ModelConfig& cfg,
                                    const TrainEnv& env,
                                    const checkpoint::Checkpoint& pretrained,
                                    int d_ada, const StagePlan& finetune,
                                    const std::string& work_dir) {
    expect_kind(finetune, StageKind::kFinetune);
    check(finetune.objective == Objective::kCtc, ErrorCode::kConfig,
          "the finetune stage must train with CTC");
    expect_groups(finetune, {ParamGroup::kAdapter, ParamGroup::kAsrHead});
    check(d_ada >= 1, ErrorCode::kConfig,
          "adapter width must be at least 1, got " + std::to_string(d_ada));

    Rng root(finetune.seed);
    Rng init = root.fork(kForkInit);
    PipelineResult result{
        model::AcousticModel(cfg, model::HeadKind::kAsr, 0, init),
        {}, {}, {}, {}};
    Rng adapter_rng = root.fork(kForkAdapters);
    result.model.insert_adapters(d_ada, adapter_rng);
    checkpoint::restore_groups(result.model.store(), pretrained,
                               {ParamGroup::kBackbone});

    result.stages.push_back(run_stage(result.model, finetune, env));
    save_stage(work_dir, StageKind::kFinetune, result.model.store(),
               result.stages.back(), result.checkpoints);

    result.update_counts = result.model.store().stage_counts();
    return result;
}

PipelineResult cross_transfer(const model::ModelConfig& cfg,
                              const TrainEnv& env,
                              const checkpoint::Checkpoint& adapted,
                              int d_ada, const StagePlan& finetune,
                              const std::string& work_dir) {
    expect_kind(finetune, StageKind::kFinetune);
    expect_ctc_groups(finetune, {ParamGroup::kBackbone, ParamGroup::kAdapter,
                                 ParamGroup::kAsrHead});
    check(d_ada >= 1, ErrorCode::kConfig,
          "adapter width must be at least 1, got " + std::to_string(d_ada));
    check(!adapted.store.names(ParamGroup::kAdapter).empty(),
          ErrorCode::kCheckpointContent,
          "the checkpoint carries no adapter tensors; it is not an adapted "
          "model");

    // The scaffold's own draws never survive: backbone and adapters come
    // from the archive, and the head swap below redraws the head the same
    // way the third stage of run_draft does.
    Rng scaffold_rng = Rng(finetune.seed).fork(kForkScaffold);
    PipelineResult result{
        model::AcousticModel(cfg, model::HeadKind::kApc, 0, scaffold_rng),
        {}, {}, {}, {}};
    Rng adapter_rng = Rng(finetune.seed).fork(kForkAdapters);
    result.model.insert_adapters(d_ada, adapter_rng);
    swap_to_asr(result.model, finetune);
    checkpoint::restore_groups(result.model.store(), adapted,
                               {ParamGroup::kBackbone, ParamGroup::kAdapter});

    result.stages.push_back(run_stage(result.model, finetune, env));
    save_stage(work_dir, StageKind::kFinetune, result.model.store(),
               result.stages.back(), result.checkpoints);

    result.update_counts = result.model.store().stage_counts();
    return result;
}

PipelineResult saft_transfer(const model::ModelConfig& cfg,
                             const TrainEnv& env,
                             const checkpoint::Checkpoint& adapted,
                             const StagePlan& finetune,
                             const std::string& work_dir) {
    expect_kind(finetune, StageKind::kFinetune);
    expect_ctc_groups(finetune,
                      {ParamGroup::kBackbone, ParamGroup::kAsrHead});
    check(adapted.store.names(ParamGroup::kAdapter).empty(),
          ErrorCode::kCheckpointContent,
          "the checkpoint carries adapter tensors; transfer it with the "
          "adapter path");

    // As in cross_transfer, the scaffold's draws never survive: the backbone
    // comes from the archive and the head swap redraws the head the same way
    // the third stage of run_saft does.
    Rng scaffold_rng = Rng(finetune.seed).fork(kForkScaffold);
    PipelineResult result{
        model::AcousticModel(cfg, model::HeadKind::kApc, 0, scaffold_rng),
        {}, {}, {}, {}};
    swap_to_asr(result.model, finetune);
    checkpoint::restore_groups(result.model.store(), adapted,
                               {ParamGroup::kBackbone});

    result.stages.push_back(run_stage(result.model, finetune, env));
    save_stage(work_dir, StageKind::kFinetune, result.model.store(),
               result.stages.back(), result.checkpoints);

    result.update_counts = result.model.store().stage_counts();
    return result;
}

}  // namespace draft::stages
