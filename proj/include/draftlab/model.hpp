#pragma once

#include "draftlab/ops.hpp"
#include "draftlab/param_store.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace draft::model {

// Which output mapping sits on top of the encoder. The three SSL heads are
// tagged group SslHead, the CTC head AsrHead.
enum class HeadKind {
    kApc,          // one linear d_model -> ssl_out_dim per configured shift
    kMaskedPredict,  // linear d_model -> n_classes (cluster logits)
    kContrastive,    // linear d_model -> d_model (match front-end targets)
    kAsr,            // linear d_model -> vocab_size (CTC logits, blank = 0)
};

const char* head_kind_name(HeadKind kind);

struct ModelConfig {
    int d_model = 64;
    int n_layers = 4;
    int n_heads = 4;
    int d_ff = 256;
    int in_dim = 80;
    int conv_mid = 96;        // channels between the two front-end convs
    int ssl_out_dim = 320;
    int vocab_size = 29;
    bool causal = true;
    std::vector<int> apc_shifts = {1, 2, 3};
    // "post_block" applies adapter i+1 to block i's complete output;
    // "post_attention" applies it right after the attention residual.
    std::string adapter_position = "post_block";

    static ModelConfig desk();
    static ModelConfig paper_scale();
    void validate() const;
};

// The six tensors of one bottleneck adapter.
struct AdapterView {
    TensorPtr ln_gain, ln_bias, w1, b1, w2, b2;
};

// x + W2 * relu(W1 * LN(x) + b1) + b2. Zero W2/b2 make this the identity.
TensorPtr adapter_forward(const TensorPtr& x, const AdapterView& adapter);

// Scalar parameters of `count` adapters at the given widths:
// count * (2*d_model + 2*d_model*d_ada + d_ada + d_model).
std::int64_t adapter_param_count(int d_model, int d_ada, int count);

// Scalar parameters of a freshly built model (backbone plus one head) by
// arithmetic alone, no tensors allocated. `head_classes` follows the
// constructor's convention; adapters are counted separately above.
std::int64_t scalar_param_count(const ModelConfig& cfg, HeadKind kind,
                                int head_classes);

// Conv front-end, encoder blocks, optional adapters, and one head, all
// registered in an owned ParamStore under their freeze groups.
class AcousticModel {
  public:
    // head_classes: class count for the masked-prediction head; <= 0 for the
    // ASR head means "use cfg.vocab_size"; ignored by APC and contrastive.
    AcousticModel(const ModelConfig& cfg, HeadKind head, int head_classes,
                  Rng& rng);

    const ModelConfig& config() const { return cfg_; }
    ParamStore& store() { return store_; }
    const ParamStore& store() const { return store_; }
    HeadKind head_kind() const { return head_kind_; }
    int head_classes() const { return head_classes_; }
    bool has_adapters() const { return d_ada_ > 0; }
    int d_ada() const { return d_ada_; }

    // Frame count the front-end yields for t input frames; raises a
    // sequence error when t is too short to produce even one frame.
    int frontend_out_len(int t) const;

    // Conv stack + projection only (no positional terms); these activations
    // are also the contrastive targets.
    TensorPtr frontend_forward(const TensorPtr& features);

    // Full backbone: front-end, positional encoding, adapters when present,
    // n_layers blocks. Rows at index >= valid_len of `features` are padding;
    // valid_len -1 means every row is real. Output rows beyond
    // frontend_out_len(valid_len) are padding and must be ignored.
    TensorPtr encode(const TensorPtr& features, int valid_len = -1);

    // encode() with the front-end rows at `masked_steps` (encoder-step
    // indices) replaced by the head's learned mask embedding before the
    // positional terms. Only the masked-prediction and contrastive heads
    // carry such an embedding.
    TensorPtr encode_masked(const TensorPtr& features,
                            const std::vector<int>& masked_steps,
                            int valid_len = -1);

    // Head applications; each demands the matching head kind.
    TensorPtr apc_predict(const TensorPtr& encoded, int shift);
    TensorPtr masked_logits(const TensorPtr& encoded);
    TensorPtr contrastive_project(const TensorPtr& encoded);
    TensorPtr asr_logits(const TensorPtr& encoded);

    // Inserts n_layers + 1 zero-initialized adapters (bit-identical forward
    // until trained); raises a state error when adapters already exist.
    void insert_adapters(int d_ada, Rng& rng);

    // Drops every head parameter and installs a fresh head of the new kind;
    // backbone and adapters are untouched.
    void swap_head(HeadKind kind, int head_classes, Rng& rng);

    AdapterView adapter(int index) const;

  private:
    void build_backbone(Rng& rng);
    void build_head(HeadKind kind, int head_classes, Rng& rng);
    TensorPtr encode_impl(const TensorPtr& features, int valid_len,
                          const std::vector<int>* masked_steps);
    TensorPtr block_forward(const TensorPtr& x, int block,
                            const std::vector<unsigned char>& mask);
    TensorPtr linear(const TensorPtr& x, const std::string& prefix);

    ModelConfig cfg_;
    ParamStore store_;
    HeadKind head_kind_;
    int head_classes_ = 0;
    int d_ada_ = 0;
};

}  // namespace draft::model
