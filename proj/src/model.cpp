#include "draftlab/model.hpp"

#include "draftlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace draft::model {

namespace {

std::string block_name(int i) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "block%02d", i);
    return buf;
}

std::string adapter_name(int i) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "adapter%02d", i);
    return buf;
}

// Sinusoidal position terms, built fresh per forward (not parameters).
TensorPtr positional_encoding(int rows, int d_model) {
    auto pe = make_tensor({rows, d_model});
    for (int t = 0; t < rows; ++t)
        for (int i = 0; i < d_model; i += 2) {
            const double rate =
                std::pow(10000.0, -static_cast<double>(i) / d_model);
            pe->at(t, i) = static_cast<real>(std::sin(t * rate));
            if (i + 1 < d_model)
                pe->at(t, i + 1) = static_cast<real>(std::cos(t * rate));
        }
    return pe;
}

// Attention mask over a t x t score matrix: key columns at or beyond
// valid_len never receive weight; causal rows additionally exclude keys
// after themselves. Padded query rows (>= valid_len) attend over the valid
// keys, which keeps every row non-empty.
std::vector<unsigned char> attention_mask(int t, int valid_len, bool causal) {
    std::vector<unsigned char> mask(static_cast<std::size_t>(t) *
                                        static_cast<std::size_t>(t),
                                    0);
    for (int q = 0; q < t; ++q)
        for (int k = 0; k < valid_len; ++k) {
            const bool allowed = !causal || k <= q || q >= valid_len;
            if (allowed)
                mask[static_cast<std::size_t>(q) * t +
                     static_cast<std::size_t>(k)] = 1;
        }
    return mask;
}

}  // namespace

const char* head_kind_name(HeadKind kind) {
    switch (kind) {
        case HeadKind::kApc: return "apc";
        case HeadKind::kMaskedPredict: return "masked_predict";
        case HeadKind::kContrastive: return "contrastive";
        case HeadKind::kAsr: return "asr";
    }
    return "unknown";
}

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::paper_scale() {
    ModelConfig cfg;
    cfg.d_model = 512;
    cfg.n_layers = 12;
    cfg.n_heads = 8;
    cfg.d_ff = 2048;
    cfg.conv_mid = 256;
    cfg.apc_shifts = {1, 2, 3, 4};
    return cfg;
}

void ModelConfig::validate() const {
    check(d_model >= 1 && n_layers >= 1 && n_heads >= 1 && d_ff >= 1 &&
              in_dim >= 1 && conv_mid >= 1 && ssl_out_dim >= 1,
          ErrorCode::kConfig, "model dimensions must be positive");
    check(d_model % n_heads == 0, ErrorCode::kConfig,
          "d_model " + std::to_string(d_model) + " is not divisible by " +
              std::to_string(n_heads) + " heads");
    check(!apc_shifts.empty(), ErrorCode::kConfig,
          "apc_shifts must not be empty");
    for (std::size_t i = 0; i < apc_shifts.size(); ++i) {
        check(apc_shifts[i] >= 1, ErrorCode::kConfig,
              "apc shifts must be positive");
        check(i == 0 || apc_shifts[i] > apc_shifts[i - 1], ErrorCode::kConfig,
              "apc shifts must be strictly increasing");
    }
    check(adapter_position == "post_block" ||
              adapter_position == "post_attention",
          ErrorCode::kConfig,
          "adapter_position must be post_block or post_attention, got " +
              adapter_position);
}

TensorPtr adapter_forward(const TensorPtr& x, const AdapterView& a) {
    check(x->rank() == 2 && x->cols() == a.ln_gain->shape[0],
          ErrorCode::kDimension, "adapter input width mismatch");
    auto h = ops::layer_norm(x, a.ln_gain, a.ln_bias);
    h = ops::relu(ops::add_bias(ops::matmul(h, a.w1), a.b1));
    h = ops::add_bias(ops::matmul(h, a.w2), a.b2);
    return ops::add(x, h);
}

std::int64_t adapter_param_count(int d_model, int d_ada, int count) {
    const std::int64_t d = d_model, da = d_ada;
    return count * (2 * d + 2 * d * da + da + d);
}

std::int64_t scalar_param_count(const ModelConfig& cfg, HeadKind kind,
                                int head_classes) {
    cfg.validate();
    const std::int64_t d = cfg.d_model, ff = cfg.d_ff, mid = cfg.conv_mid;
    std::int64_t n = 3 * cfg.in_dim * mid + mid  // conv1
                     + 3 * mid * d + d           // conv2
                     + d * d + d;                // projection
    // Per block: two layer norms, four attention mats with biases, two
    // feed-forward mats with biases.
    n += cfg.n_layers * (4 * d + 4 * d * d + 4 * d + 2 * d * ff + ff + d);
    switch (kind) {
        case HeadKind::kApc:
            n += static_cast<std::int64_t>(cfg.apc_shifts.size()) *
                 (d * cfg.ssl_out_dim + cfg.ssl_out_dim);
            break;
        case HeadKind::kMaskedPredict:
            check(head_classes >= 2, ErrorCode::kConfig,
                  "masked-prediction head needs >= 2 classes, got " +
                      std::to_string(head_classes));
            n += d * head_classes + head_classes + d;
            break;
        case HeadKind::kContrastive:
            n += d * d + d + d;
            break;
        case HeadKind::kAsr: {
            const std::int64_t vocab =
                head_classes > 0 ? head_classes : cfg.vocab_size;
            n += d * vocab + vocab;
            break;
        }
    }
    return n;
}

AcousticModel::AcousticModel(const ModelConfig& cfg, HeadKind head,
                             int head_classes, Rng& rng)
    : cfg_(cfg), head_kind_(head) {
    cfg_.validate();
    build_backbone(rng);
    build_head(head, head_classes, rng);
}

void AcousticModel::build_backbone(Rng& rng) {
    const int d = cfg_.d_model;
    const double conv1_std = std::sqrt(2.0 / (3.0 * cfg_.in_dim));
    const double conv2_std = std::sqrt(2.0 / (3.0 * cfg_.conv_mid));
    store_.create_randn("frontend.conv1.w", ParamGroup::kBackbone,
                        {3 * cfg_.in_dim, cfg_.conv_mid}, rng, conv1_std);
    store_.create("frontend.conv1.b", ParamGroup::kBackbone, {cfg_.conv_mid});
    store_.create_randn("frontend.conv2.w", ParamGroup::kBackbone,
                        {3 * cfg_.conv_mid, d}, rng, conv2_std);
    store_.create("frontend.conv2.b", ParamGroup::kBackbone, {d});
    store_.create_randn("frontend.proj.w", ParamGroup::kBackbone, {d, d}, rng,
                        std::sqrt(1.0 / d));
    store_.create("frontend.proj.b", ParamGroup::kBackbone, {d});

    for (int i = 0; i < cfg_.n_layers; ++i) {
        const std::string b = block_name(i);
        auto ln1_gain =
            store_.create(b + ".ln1.gain", ParamGroup::kBackbone, {d});
        std::fill(ln1_gain->data.begin(), ln1_gain->data.end(), real(1));
        store_.create(b + ".ln1.bias", ParamGroup::kBackbone, {d});
        for (const char* part : {"wq", "wk", "wv", "wo"})
            store_.create_randn(b + ".attn." + part, ParamGroup::kBackbone,
                                {d, d}, rng, std::sqrt(1.0 / d));
        for (const char* part : {"bq", "bk", "bv", "bo"})
            store_.create(b + ".attn." + part, ParamGroup::kBackbone, {d});
        auto ln2_gain =
            store_.create(b + ".ln2.gain", ParamGroup::kBackbone, {d});
        std::fill(ln2_gain->data.begin(), ln2_gain->data.end(), real(1));
        store_.create(b + ".ln2.bias", ParamGroup::kBackbone, {d});
        store_.create_randn(b + ".ff.w1", ParamGroup::kBackbone,
                            {d, cfg_.d_ff}, rng, std::sqrt(2.0 / d));
        store_.create(b + ".ff.b1", ParamGroup::kBackbone, {cfg_.d_ff});
        store_.create_randn(b + ".ff.w2", ParamGroup::kBackbone,
                            {cfg_.d_ff, d}, rng, std::sqrt(1.0 / cfg_.d_ff));
        store_.create(b + ".ff.b2", ParamGroup::kBackbone, {d});
    }
}

void AcousticModel::build_head(HeadKind kind, int head_classes, Rng& rng) {
    const int d = cfg_.d_model;
    const double head_std = std::sqrt(1.0 / d);
    head_kind_ = kind;
    switch (kind) {
        case HeadKind::kApc:
            for (int shift : cfg_.apc_shifts) {
                const std::string prefix =
                    "head.apc.shift" + std::to_string(shift);
                store_.create_randn(prefix + ".w", ParamGroup::kSslHead,
                                    {d, cfg_.ssl_out_dim}, rng, head_std);
                store_.create(prefix + ".b", ParamGroup::kSslHead,
                              {cfg_.ssl_out_dim});
            }
            head_classes_ = cfg_.ssl_out_dim;
            break;
        case HeadKind::kMaskedPredict:
            check(head_classes >= 2, ErrorCode::kConfig,
                  "masked-prediction head needs >= 2 classes, got " +
                      std::to_string(head_classes));
            store_.create_randn("head.masked.w", ParamGroup::kSslHead,
                                {d, head_classes}, rng, head_std);
            store_.create("head.masked.b", ParamGroup::kSslHead,
                          {head_classes});
            store_.create_randn("head.masked.embed", ParamGroup::kSslHead,
                                {1, d}, rng, head_std);
            head_classes_ = head_classes;
            break;
        case HeadKind::kContrastive:
            store_.create_randn("head.contrastive.w", ParamGroup::kSslHead,
                                {d, d}, rng, head_std);
            store_.create("head.contrastive.b", ParamGroup::kSslHead, {d});
            store_.create_randn("head.contrastive.embed",
                                ParamGroup::kSslHead, {1, d}, rng, head_std);
            head_classes_ = d;
            break;
        case HeadKind::kAsr: {
            const int vocab = head_classes > 0 ? head_classes
                                               : cfg_.vocab_size;
            check(vocab >= 2, ErrorCode::kConfig,
                  "asr head needs a vocab_size >= 2, got " +
                      std::to_string(vocab));
            store_.create_randn("head.asr.w", ParamGroup::kAsrHead,
                                {d, vocab}, rng, head_std);
            store_.create("head.asr.b", ParamGroup::kAsrHead, {vocab});
            head_classes_ = vocab;
            break;
        }
    }
}

int AcousticModel::frontend_out_len(int t) const {
    check(t >= 1, ErrorCode::kSequenceTooShort,
          "front-end input length must be >= 1, got " + std::to_string(t));
    if (cfg_.causal) {
        const int t1 = (t + 1) / 2;
        return (t1 + 1) / 2;
    }
    check(t >= 3, ErrorCode::kSequenceTooShort,
          "non-causal front-end needs >= 3 frames, got " + std::to_string(t));
    const int t1 = (t - 3) / 2 + 1;
    check(t1 >= 3, ErrorCode::kSequenceTooShort,
          "non-causal front-end needs >= 7 frames, got " + std::to_string(t));
    return (t1 - 3) / 2 + 1;
}

TensorPtr AcousticModel::linear(const TensorPtr& x, const std::string& prefix) {
    return ops::add_bias(ops::matmul(x, store_.get(prefix + ".w")),
                         store_.get(prefix + ".b"));
}

TensorPtr AcousticModel::frontend_forward(const TensorPtr& features) {
    check(features->rank() == 2 && features->cols() == cfg_.in_dim,
          ErrorCode::kDimension,
          "front-end expects [T x " + std::to_string(cfg_.in_dim) +
              "] features");
    auto x = features;
    if (cfg_.causal) x = ops::pad_rows_front(x, 2);
    x = ops::relu(ops::add_bias(
        ops::conv1d(x, store_.get("frontend.conv1.w"), 2),
        store_.get("frontend.conv1.b")));
    if (cfg_.causal) x = ops::pad_rows_front(x, 2);
    x = ops::relu(ops::add_bias(
        ops::conv1d(x, store_.get("frontend.conv2.w"), 2),
        store_.get("frontend.conv2.b")));
    return linear(x, "frontend.proj");
}

TensorPtr AcousticModel::block_forward(
    const TensorPtr& x, int block, const std::vector<unsigned char>& mask) {
    const std::string b = block_name(block);
    const int heads = cfg_.n_heads;
    const int dh = cfg_.d_model / heads;

    auto y = ops::layer_norm(x, store_.get(b + ".ln1.gain"),
                             store_.get(b + ".ln1.bias"));
    auto q = ops::add_bias(ops::matmul(y, store_.get(b + ".attn.wq")),
                           store_.get(b + ".attn.bq"));
    auto k = ops::add_bias(ops::matmul(y, store_.get(b + ".attn.wk")),
                           store_.get(b + ".attn.bk"));
    auto v = ops::add_bias(ops::matmul(y, store_.get(b + ".attn.wv")),
                           store_.get(b + ".attn.bv"));

    std::vector<TensorPtr> contexts;
    contexts.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        auto qh = ops::slice_cols(q, h * dh, dh);
        auto kh = ops::slice_cols(k, h * dh, dh);
        auto vh = ops::slice_cols(v, h * dh, dh);
        auto scores =
            ops::scale(ops::matmul_nt(qh, kh), 1.0 / std::sqrt(double(dh)));
        auto probs = ops::masked_softmax(scores, mask);
        contexts.push_back(ops::matmul(probs, vh));
    }
    auto attn_out =
        ops::add_bias(ops::matmul(ops::concat_cols(contexts),
                                  store_.get(b + ".attn.wo")),
                      store_.get(b + ".attn.bo"));
    auto a = ops::add(x, attn_out);
    if (has_adapters() && cfg_.adapter_position == "post_attention")
        a = model::adapter_forward(a, adapter(block + 1));

    auto z = ops::layer_norm(a, store_.get(b + ".ln2.gain"),
                             store_.get(b + ".ln2.bias"));
    auto ff = ops::add_bias(
        ops::matmul(ops::relu(ops::add_bias(
                        ops::matmul(z, store_.get(b + ".ff.w1")),
                        store_.get(b + ".ff.b1"))),
                    store_.get(b + ".ff.w2")),
        store_.get(b + ".ff.b2"));
    auto out = ops::add(a, ff);
    if (has_adapters() && cfg_.adapter_position == "post_block")
        out = model::adapter_forward(out, adapter(block + 1));
    return out;
}

TensorPtr AcousticModel::encode(const TensorPtr& features, int valid_len) {
    return encode_impl(features, valid_len, nullptr);
}

TensorPtr AcousticModel::encode_masked(const TensorPtr& features,
                                       const std::vector<int>& masked_steps,
                                       int valid_len) {
    return encode_impl(features, valid_len, &masked_steps);
}

TensorPtr AcousticModel::encode_impl(const TensorPtr& features, int valid_len,
                                     const std::vector<int>* masked_steps) {
    const int t_in = features->rows();
    if (valid_len < 0) valid_len = t_in;
    check(valid_len >= 1, ErrorCode::kInvalidMask,
          "encode needs at least one real frame");
    check(valid_len <= t_in, ErrorCode::kDimension,
          "valid_len " + std::to_string(valid_len) + " exceeds " +
              std::to_string(t_in) + " rows");

    auto x = frontend_forward(features);
    if (masked_steps && !masked_steps->empty()) {
        const std::string embed = head_kind_ == HeadKind::kMaskedPredict
                                      ? "head.masked.embed"
                                      : "head.contrastive.embed";
        check(head_kind_ == HeadKind::kMaskedPredict ||
                  head_kind_ == HeadKind::kContrastive,
              ErrorCode::kState,
              std::string(head_kind_name(head_kind_)) +
                  " head has no mask embedding");
        // The embedding replaces the front-end rows; positional terms are
        // added afterwards, so masked steps keep their position information.
        x = ops::replace_rows(x, store_.get(embed), *masked_steps);
    }
    x = ops::add(x, positional_encoding(x->rows(), cfg_.d_model));
    if (has_adapters()) x = model::adapter_forward(x, adapter(0));

    const int valid_out = frontend_out_len(valid_len);
    const auto mask = attention_mask(x->rows(), valid_out, cfg_.causal);
    for (int i = 0; i < cfg_.n_layers; ++i) x = block_forward(x, i, mask);
    return x;
}

TensorPtr AcousticModel::apc_predict(const TensorPtr& encoded, int shift) {
    check(head_kind_ == HeadKind::kApc, ErrorCode::kState,
          "model head is " + std::string(head_kind_name(head_kind_)) +
              ", not apc");
    const bool known = std::find(cfg_.apc_shifts.begin(),
                                 cfg_.apc_shifts.end(),
                                 shift) != cfg_.apc_shifts.end();
    check(known, ErrorCode::kConfig,
          "shift " + std::to_string(shift) + " has no head");
    return linear(encoded, "head.apc.shift" + std::to_string(shift));
}

TensorPtr AcousticModel::masked_logits(const TensorPtr& encoded) {
    check(head_kind_ == HeadKind::kMaskedPredict, ErrorCode::kState,
          "model head is " + std::string(head_kind_name(head_kind_)) +
              ", not masked_predict");
    return linear(encoded, "head.masked");
}

TensorPtr AcousticModel::contrastive_project(const TensorPtr& encoded) {
    check(head_kind_ == HeadKind::kContrastive, ErrorCode::kState,
          "model head is " + std::string(head_kind_name(head_kind_)) +
              ", not contrastive");
    return linear(encoded, "head.contrastive");
}

TensorPtr AcousticModel::asr_logits(const TensorPtr& encoded) {
    check(head_kind_ == HeadKind::kAsr, ErrorCode::kState,
          "model head is " + std::string(head_kind_name(head_kind_)) +
              ", not asr");
    return linear(encoded, "head.asr");
}

void AcousticModel::insert_adapters(int d_ada, Rng& rng) {
    check(!has_adapters(), ErrorCode::kState, "adapters already present");
    check(d_ada >= 1, ErrorCode::kConfig, "d_ada must be >= 1");
    const int d = cfg_.d_model;
    for (int i = 0; i <= cfg_.n_layers; ++i) {
        const std::string a = adapter_name(i);
        auto gain = store_.create(a + ".ln.gain", ParamGroup::kAdapter, {d});
        std::fill(gain->data.begin(), gain->data.end(), real(1));
        store_.create(a + ".ln.bias", ParamGroup::kAdapter, {d});
        store_.create_randn(a + ".w1", ParamGroup::kAdapter, {d, d_ada}, rng,
                            std::sqrt(1.0 / d));
        store_.create(a + ".b1", ParamGroup::kAdapter, {d_ada});
        // Zero W2 and b2: the residual branch contributes exactly nothing
        // until trained, so insertion preserves the learned function.
        store_.create(a + ".w2", ParamGroup::kAdapter, {d_ada, d});
        store_.create(a + ".b2", ParamGroup::kAdapter, {d});
    }
    d_ada_ = d_ada;
}

void AcousticModel::swap_head(HeadKind kind, int head_classes, Rng& rng) {
    for (const auto& name : store_.names())
        if (name.rfind("head.", 0) == 0) store_.remove(name);
    build_head(kind, head_classes, rng);
}

AdapterView AcousticModel::adapter(int index) const {
    check(has_adapters(), ErrorCode::kState, "model has no adapters");
    check(index >= 0 && index <= cfg_.n_layers, ErrorCode::kDimension,
          "adapter index out of range");
    const std::string a = adapter_name(index);
    return AdapterView{store_.get(a + ".ln.gain"), store_.get(a + ".ln.bias"),
                       store_.get(a + ".w1"),      store_.get(a + ".b1"),
                       store_.get(a + ".w2"),      store_.get(a + ".b2")};
}

}  // namespace draft::model
