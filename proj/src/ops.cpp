#include "draftlab/ops.hpp"

#include "draftlab/ctc.hpp"
#include "draftlab/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

namespace draft::ops {

namespace {

void check_rank2(const TensorPtr& t, const char* who) {
    check(t->rank() == 2, ErrorCode::kRank,
          std::string(who) + " expects a rank-2 tensor, got rank " +
              std::to_string(t->rank()));
}

void check_same_shape(const TensorPtr& a, const TensorPtr& b,
                      const char* who) {
    check(a->shape == b->shape, ErrorCode::kDimension,
          std::string(who) + " needs matching shapes");
}

// Result node: parents and the backward closure are recorded only when some
// input carries gradient, so inference-only forwards build no graph.
TensorPtr node(const char* name, std::vector<int> shape,
               std::vector<TensorPtr> parents) {
    auto t = make_tensor(std::move(shape));
    t->op_name = name;
    for (const auto& p : parents) t->requires_grad |= p->requires_grad;
    if (t->requires_grad) t->parents = std::move(parents);
    return t;
}

}  // namespace

const std::vector<std::string>& registered_op_names() {
    static const std::vector<std::string> names = {
        "matmul",        "matmul_nt",       "add",
        "sub",           "mul",             "scale",
        "add_bias",      "relu",            "layer_norm",
        "masked_softmax", "conv1d",         "pad_rows_front",
        "sum",           "mean",            "l1_loss",
        "log_softmax_rows", "nll_rows",     "gather_rows",
        "slice_rows",    "slice_cols",      "concat_cols",
        "replace_rows",  "l2_normalize_rows", "gathered_dot",
        "ctc_loss",
    };
    return names;
}

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
    check_rank2(a, "matmul");
    check_rank2(b, "matmul");
    int m = a->rows(), k = a->cols(), n = b->cols();
    check(b->rows() == k, ErrorCode::kDimension,
          "matmul inner dimensions disagree: " + std::to_string(k) + " vs " +
              std::to_string(b->rows()));
    auto out = node("matmul", {m, n}, {a, b});
    kernels::matmul(a->data.data(), b->data.data(), out->data.data(), m, k, n,
                    false);
    if (out->requires_grad) {
        Tensor* self = out.get();
        Tensor* ap = a.get();
        Tensor* bp = b.get();
        out->backward_fn = [self, ap, bp, m, k, n] {
            if (ap->requires_grad)
                kernels::matmul_nt(self->grad.data(), bp->data.data(),
                                   ap->grad_data(), m, n, k, true);
            if (bp->requires_grad)
                kernels::matmul_tn(ap->data.data(), self->grad.data(),
                                   bp->grad_data(), k, m, n, true);
        };
    }
    return out;
}

TensorPtr matmul_nt(const TensorPtr& a, const TensorPtr& b) {
    check_rank2(a, "matmul_nt");
    check_rank2(b, "matmul_nt");
    int m = a->rows(), k = a->cols(), n = b->rows();
    check(b->cols() == k, ErrorCode::kDimension,
          "matmul_nt inner dimensions disagree: " + std::to_string(k) +
              " vs " + std::to_string(b->cols()));
    auto out = node("matmul_nt", {m, n}, {a, b});
    kernels::matmul_nt(a->data.data(), b->data.data(), out->data.data(), m, k,
                       n, false);
    if (out->requires_grad) {
        Tensor* self = out.get();
        Tensor* ap = a.get();
        Tensor* bp = b.get();
        out->backward_fn = [self, ap, bp, m, k, n] {
            if (ap->requires_grad)
                kernels::matmul(self->grad.data(), bp->data.data(),
                                ap->grad_data(), m, n, k, true);
            if (bp->requires_grad)
                kernels::matmul_tn(self->grad.data(), ap->data.data(),
                                   bp->grad_data(), n, m, k, true);
        };
    }
    return out;
}

namespace {

enum class Elementwise { kAdd, kSub, kMul };

TensorPtr elementwise(const char* name, Elementwise kind, const TensorPtr& a,
                      const TensorPtr& b) {
    check_same_shape(a, b, name);
    auto out = node(name, a->shape, {a, b});
    std::size_t n = a->data.size();
    for (std::size_t i = 0; i < n; ++i) {
        switch (kind) {
            case Elementwise::kAdd: out->data[i] = a->data[i] + b->data[i]; break;
            case Elementwise::kSub: out->data[i] = a->data[i] - b->data[i]; break;
            case Elementwise::kMul: out->data[i] = a->data[i] * b->data[i]; break;
        }
    }
    if (out->requires_grad) {
        Tensor* self = out.get();
        Tensor* ap = a.get();
        Tensor* bp = b.get();
        out->backward_fn = [self, ap, bp, kind, n] {
            if (ap->requires_grad) {
                real* da = ap->grad_data();
                for (std::size_t i = 0; i < n; ++i)
                    da[i] += (kind == Elementwise::kMul)
                                 ? self->grad[i] * bp->data[i]
                                 : self->grad[i];
            }
            if (bp->requires_grad) {
                real* db = bp->grad_data();
                for (std::size_t i = 0; i < n; ++i) {
                    switch (kind) {
                        case Elementwise::kAdd: db[i] += self->grad[i]; break;
                        case Elementwise::kSub: db[i] -= self->grad[i]; break;
                        case Elementwise::kMul:
                            db[i] += self->grad[i] * ap->data[i];
                            break;
                    }
                }
            }
        };
    }
    return out;
}

}  // namespace

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
    return elementwise("add", Elementwise::kAdd, a, b);
}

TensorPtr sub(const TensorPtr& a, const TensorPtr& b) {
    return elementwise("sub", Elementwise::kSub, a, b);
}

TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
    return elementwise("mul", Elementwise::kMul, a, b);
}

TensorPtr scale(const TensorPtr& x, double s) {
    auto out = node("scale", x->shape, {x});
    real rs = static_cast<real>(s);
    for (std::size_t i = 0; i < x->data.size(); ++i)
        out->data[i] = x->data[i] * rs;
    if (out->requires_grad) {
        Tensor* self = out.get();
        Tensor* xp = x.get();
        out->backward_fn = [self, xp, rs] {
            real* dx = xp->grad_data();
            for (std::size_t i = 0; i < self->grad.size(); ++i)
                dx[i] += self->grad[i] * rs;
        };
    }
    return out;
}

TensorPtr add_bias(const TensorPtr& x, const TensorPtr& b) {
    check_rank2(x, "add_bias");
    check(b->rank() == 1, ErrorCode::kRank, "add_bias expects a rank-1 bias");
    int rows = x->rows(), cols = x->cols();
    check(b->shape[0] == cols, ErrorCode::kDimension,
          "bias width " + std::to_string(b->shape[0]) +
              " does not match columns " + std::to_string(cols));
    auto out = node("add_bias", x->shape, {x, b});
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            out->at(i, j) = x->at(i, j) + b->data[j];
    if (out->requires_grad) {
        Tensor* self = out.get();
        Tensor* xp = x.get();
        Tensor* bp = b.get();
        out->backward_fn = [self, xp, bp, rows, cols] {
            if (xp->requires_grad) {
                real* dx = xp->grad_data();
                for (std::size_t i = 0; i < self->grad.size(); ++i)
                    dx[i] += self->grad[i];
            }
            if (bp->requires_grad) {
                real* db = bp->grad_data();
                for (int j = 0; j < cols; ++j) {
                    real acc = 0;
                    for (int i = 0; i < rows; ++i)
                        acc += self->grad[static_cast<std::size_t>(i) * cols + j];
                    db[j] += acc;
                }
            }
        };
    }
    return out;
}

TensorPtr relu(const TensorPtr& x) {
    auto out = node("relu", x->shape, {x});
    for (std::size_t i = 0; i < x->data.size(); ++i)
        out->data[i] = x->data[i] > 0 ? x->data[i] : real(0);
    if (out->requires_grad) {
        Tensor* self = out.get();
        Tensor* xp = x.get();
        out->backward_fn = [self, xp] {
            real* dx = xp->grad_data();
            for (std::size_t i = 0; i < self->grad.size(); ++i)
                if (xp->data[i] > 0) dx[i] += self->grad[i];
        };
    }
    return out;
}

TensorPtr layer_norm(const TensorPtr& x, const TensorPtr& gain,
                     const TensorPtr& bias, real epsilon) {
    check_rank2(x, "layer_norm");
    check(gain->rank() == 1 && bias->rank() == 1, ErrorCode::kRank,
          "layer_norm gain and bias are rank-1");
    int rows = x->rows(), cols = x->cols();
    check(gain->shape[0] == cols && bias->shape[0] == cols,
          ErrorCode::kDimension, "layer_norm affine width mismatch");
    auto out = node("layer_norm", x->shape, {x, gain, bias});
    auto xhat = std::make_shared<std::vector<real>>(x->data.size());
    auto mean = std::make_shared<std::vector<real>>(rows);
    auto rstd = std::make_shared<std::vector<real>>(rows);
    kernels::layer_norm_rows(x->data.data(), xhat->data(), mean->data(),
                             rstd->data(), rows, cols, epsilon);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            out->at(i, j) =
                (*xhat)[static_cast<std::size_t>(i) * cols + j] *
                    gain->data[j] +
                bias->data[j];
    if (out->requires_grad) {
        Tensor* self = out.get();
        Tensor* xp = x.get();
        Tensor* gp = gain.get();
        Tensor* bp = bias.get();
        out->backward_fn = [self, xp, gp, bp, xhat, mean, rstd, rows, cols] {
            if (gp->requires_grad) {
                real* dg = gp->grad_data();
                for (int j = 0; j < cols; ++j) {
                    real acc = 0;
                    for (int i = 0; i < rows; ++i)
                        acc += self->grad[static_cast<std::size_t>(i) * cols + j] *
                               (*xhat)[static_cast<std::size_t>(i) * cols + j];
                    dg[j] += acc;
                }
            }
            if (bp->requires_grad) {
                real* db = bp->grad_data();
                for (int j = 0; j < cols; ++j) {
                    real acc = 0;
                    for (int i = 0; i < rows; ++i)
                        acc += self->grad[static_cast<std::size_t>(i) * cols + j];
                    db[j] += acc;
                }
            }
            if (xp->requires_grad) {
                std::vector<real> dxhat(self->grad.size());
                for (int i = 0; i < rows; ++i)
                    for (int j = 0; j < cols; ++j)
                        dxhat[static_cast<std::size_t>(i) * cols + j] =
                            self->grad[static_cast<std::size_t>(i) * cols + j] *
                            gp->data[j];
                kernels::layer_norm_backward_rows(
                    xp->data.data(), dxhat.data(), mean->data(), rstd->data(),
                    xp->grad_data(), rows, cols);
            }
        };
    }
    return out;
}

TensorPtr masked_softmax(const TensorPtr& x, std::vector<unsigned char> mask) {
    check_rank2(x, "masked_softmax");
    int rows = x->rows(), cols = x->cols();
    check(static_cast<std::int64_t>(mask.size()) == x->numel(),
          ErrorCode::kInvalidMask, "mask size does not match the tensor");
    for (int i = 0; i < rows; ++i) {
        bool any = false;
        for (int j = 0; j < cols && !any; ++j)
            any = mask[static_cast<std::size_t>(i) * cols + j] != 0;
        check(any, ErrorCode::kInvalidMask,
              "softmax row " + std::to_string(i) + " masks out every position");
    }
    auto out = node("masked_softmax", x->shape, {x});
    auto mask_ptr =
        std::make_shared<std::vector<unsigned char>>(std::move(mask));
    kernels::masked_softmax_rows(x->data.data(), mask_ptr->data(),
                                 out->data.data(), rows, cols);
    if (out->requires_grad) {
        Tensor* self = out.get();
        Tensor* xp = x.get();
        out->backward_fn = [self, xp, mask_ptr, rows, cols] {
            kernels::masked_softmax_backward_rows(
                self->data.data(), mask_ptr->data(), self->grad.data(),
                xp->grad_data(), rows, cols);
        };
    }
    return out;
}

TensorPtr conv1d(const TensorPtr& x, const TensorPtr& w, int stride) {
    check_rank2(x, "conv1d");
    check_rank2(w, "conv1d");
    check(stride >= 1, ErrorCode::kConfig, "conv1d stride must be positive");
    int t_in = x->rows(), c_in = x->cols();
    check(w->rows() % c_in == 0, ErrorCode::kDimension,
          "conv1d weight rows must be a multiple of the input channels");
    int k = w->rows() / c_in;
    int c_out = w->cols();
    check(t_in >= k, ErrorCode::kSequenceTooShort,
          "conv1d input of " + std::to_string(t_in) +
              " rows is shorter than the kernel (" + std::to_string(k) + ")");
    int t_out = (t_in - k) / stride + 1;
    auto out = node("conv1d", {t_out, c_out}, {x, w});
    kernels::conv1d_forward(x->data.data(), w->data.data(), out->data.data(),
                            t_in, c_in, c_out, k, stride);
    if (out->requires_grad) {
        Tensor* self = out.get();
        Tensor* xp = x.get();
        Tensor* wp = w.get();
        out->backward_fn = [self, xp, wp, t_in, c_in, c_out, k, stride] {
            if (xp->requires_grad)
                kernels::conv1d_backward_input(self->grad.data(),
                                               wp->data.data(),
                                               xp->grad_data(), t_in, c_in,
                                               c_out, k, stride);
            if (wp->requires_grad)
                kernels::conv1d_backward_weight(xp->data.data(),
                                                self->grad.data(),
                                                wp->grad_data(), t_in, c_in,
                                                c_out, k, stride);
        };
    }
    return out;
}

TensorPtr pad_rows_front(const TensorPtr& x, int count) {
    check_rank2(x, "pad_rows_front");
    check(count >= 0, ErrorCode::kDimension, "pad count must be non-negative");
    int rows = x->rows(), cols = x->cols();
    auto out = node("pad_rows_front", {rows + count, cols}, {x});
    std::copy(x->data.begin(), x->data.end(),
              out->data.begin() + static_cast<std::size_t>(count) * cols);
    if (out->requires_grad) {
        Tensor* self = out.get();
        Tensor* xp = x.get();
        out->backward_fn = [self, xp, count, cols] {
            real* dx = xp->grad_data();
            const real* dy = self->grad.data() +
                             static_cast<std::size_t>(count) * cols;
            for (std::size_t i = 0; i < xp->data.size(); ++i) dx[i] += dy[i];
        };
    }
    return out;
}

TensorPtr sum(const TensorPtr& x) {
    auto out = node("sum", {}, {x});
    real acc = 0;
    for (real v : x->data) acc += v;
    out->data[0] = acc;
    if (out->requires_grad) {
        Tensor* self = out.get();
        Tensor* xp = x.get();
        out->backward_fn = [self, xp] {
            real g = self->grad[0];
            real* dx = xp->grad_data();
            for (std::size_t i = 0; i < xp->data.size(); ++i) dx[i] += g;
        };
    }
    return out;
}

TensorPtr mean(const TensorPtr& x) {
    auto out = node("mean", {}, {x});
    real acc = 0;
    for (real v : x->data) acc += v;
    out->data[0] = acc / static_cast<real>(x->numel());
    if (out->requires_grad) {
        Tensor* self = out.get();
        Tensor* xp = x.get();
        out->backward_fn = [self, xp] {
            real g = self->grad[0] / static_cast<real>(xp->numel());
            real* dx = xp->grad_data();
            for (std::size_t i = 0; i < xp->data.size(); ++i) dx[i] += g;
        };
    }
    return out;
}

TensorPtr l1_loss(const TensorPtr& pred, const TensorPtr& target) {
    check_same_shape(pred, target, "l1_loss");
    auto out = node("l1_loss", {}, {pred, target});
    real acc = 0;
    for (std::size_t i = 0; i < pred->data.size(); ++i)
        acc += std::abs(pred->data[i] - target->data[i]);
    out->data[0] = acc / static_cast<real>(pred->numel());
    if (out->requires_grad) {
        Tensor* self = out.get();
        Tensor* pp = pred.get();
        Tensor* tp = target.get();
        out->backward_fn = [self, pp, tp] {
            real g = self->grad[0] / static_cast<real>(pp->numel());
            real* dp = pp->requires_grad ? pp->grad_data() : nullptr;
            real* dt = tp->requires_grad ? tp->grad_data() : nullptr;
            for (std::size_t i = 0; i < pp->data.size(); ++i) {
                real d = pp->data[i] - tp->data[i];
                real s = d > 0 ? g : (d < 0 ? -g : real(0));
                if (dp) dp[i] += s;
                if (dt) dt[i] -= s;
            }
        };
    }
    return out;
}

TensorPtr log_softmax_rows(const TensorPtr& x) {
    check_rank2(x, "log_softmax_rows");
    int rows = x->rows(), cols = x->cols();
    auto out = node("log_softmax_rows", x->shape, {x});
    for (int i = 0; i < rows; ++i) {
        const real* xi = x->data.data() + static_cast<std::size_t>(i) * cols;
        real* yi = out->data.data() + static_cast<std::size_t>(i) * cols;
        real mx = xi[0];
        for (int j = 1; j < cols; ++j) mx = std::max(mx, xi[j]);
        real acc = 0;
        for (int j = 0; j < cols; ++j) acc += std::exp(xi[j] - mx);
        real lse = mx + std::log(acc);
        for (int j = 0; j < cols; ++j) yi[j] = xi[j] - lse;
    }
    if (out->requires_grad) {
        Tensor* self = out.get();
        Tensor* xp = x.get();
        out->backward_fn = [self, xp, rows, cols] {
            real* dx = xp->grad_data();
            for (int i = 0; i < rows; ++i) {
                const real* yi =
                    self->data.data() + static_cast<std::size_t>(i) * cols;
                const real* dyi =
                    self->grad.data() + static_cast<std::size_t>(i) * cols;
                real s = 0;
                for (int j = 0; j < cols; ++j) s += dyi[j];
                real* dxi = dx + static_cast<std::size_t>(i) * cols;
                for (int j = 0; j < cols; ++j)
                    dxi[j] += dyi[j] - std::exp(yi[j]) * s;
            }
        };
    }
    return out;
}

TensorPtr nll_rows(const TensorPtr& log_probs, std::vector<int> labels) {
    check_rank2(log_probs, "nll_rows");
    int rows = log_probs->rows(), cols = log_probs->cols();
    check(static_cast<int>(labels.size()) == rows, ErrorCode::kDimension,
          "nll_rows needs one label per row");
    for (int lab : labels)
        check(lab >= 0 && lab < cols, ErrorCode::kDimension,
              "nll_rows label " + std::to_string(lab) + " outside [0, " +
                  std::to_string(cols) + ")");
    auto out = node("nll_rows", {}, {log_probs});
    real acc = 0;
    for (int i = 0; i < rows; ++i) acc -= log_probs->at(i, labels[i]);
    out->data[0] = acc / static_cast<real>(rows);
    if (out->requires_grad) {
        Tensor* self = out.get();
        Tensor* xp = log_probs.get();
        auto labs = std::make_shared<std::vector<int>>(std::move(labels));
        out->backward_fn = [self, xp, labs, rows, cols] {
            real g = self->grad[0] / static_cast<real>(rows);
            real* dx = xp->grad_data();
            for (int i = 0; i < rows; ++i)
                dx[static_cast<std::size_t>(i) * cols + (*labs)[i]] -= g;
        };
    }
    return out;
}

TensorPtr gather_rows(const TensorPtr& x, std::vector<int> indices) {
    check_rank2(x, "gather_rows");
    int rows = x->rows(), cols = x->cols();
    check(!indices.empty(), ErrorCode::kDimension,
          "gather_rows needs at least one index");
    for (int idx : indices)
        check(idx >= 0 && idx < rows, ErrorCode::kDimension,
              "gather_rows index " + std::to_string(idx) + " outside [0, " +
                  std::to_string(rows) + ")");
    int n = static_cast<int>(indices.size());
    auto out = node("gather_rows", {n, cols}, {x});
    for (int r = 0; r < n; ++r)
        std::copy_n(x->data.data() + static_cast<std::size_t>(indices[r]) * cols,
                    cols, out->data.data() + static_cast<std::size_t>(r) * cols);
    if (out->requires_grad) {
        Tensor* self = out.get();
        Tensor* xp = x.get();
        auto idx = std::make_shared<std::vector<int>>(std::move(indices));
        out->backward_fn = [self, xp, idx, cols] {
            real* dx = xp->grad_data();
            for (std::size_t r = 0; r < idx->size(); ++r) {
                const real* dyr = self->grad.data() + r * cols;
                real* dxr =
                    dx + static_cast<std::size_t>((*idx)[r]) * cols;
                for (int j = 0; j < cols; ++j) dxr[j] += dyr[j];
            }
        };
    }
    return out;
}

TensorPtr slice_rows(const TensorPtr& x, int begin, int count) {
    check_rank2(x, "slice_rows");
    int rows = x->rows(), cols = x->cols();
    check(begin >= 0 && count >= 1 && begin + count <= rows,
          ErrorCode::kDimension,
          "slice_rows [" + std::to_string(begin) + ", " +
              std::to_string(begin + count) + ") outside 0.." +
              std::to_string(rows));
    auto out = node("slice_rows", {count, cols}, {x});
    std::copy_n(x->data.data() + static_cast<std::size_t>(begin) * cols,
                static_cast<std::size_t>(count) * cols, out->data.data());
    if (out->requires_grad) {
        Tensor* self = out.get();
        Tensor* xp = x.get();
        out->backward_fn = [self, xp, begin, cols] {
            real* dx = xp->grad_data() + static_cast<std::size_t>(begin) * cols;
            for (std::size_t i = 0; i < self->grad.size(); ++i)
                dx[i] += self->grad[i];
        };
    }
    return out;
}

TensorPtr slice_cols(const TensorPtr& x, int begin, int count) {
    check_rank2(x, "slice_cols");
    int rows = x->rows(), cols = x->cols();
    check(begin >= 0 && count >= 1 && begin + count <= cols,
          ErrorCode::kDimension,
          "slice_cols [" + std::to_string(begin) + ", " +
              std::to_string(begin + count) + ") outside 0.." +
              std::to_string(cols));
    auto out = node("slice_cols", {rows, count}, {x});
    for (int i = 0; i < rows; ++i)
        std::copy_n(x->data.data() + static_cast<std::size_t>(i) * cols + begin,
                    count, out->data.data() + static_cast<std::size_t>(i) * count);
    if (out->requires_grad) {
        Tensor* self = out.get();
        Tensor* xp = x.get();
        out->backward_fn = [self, xp, begin, count, cols, rows] {
            real* dx = xp->grad_data();
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < count; ++j)
                    dx[static_cast<std::size_t>(i) * cols + begin + j] +=
                        self->grad[static_cast<std::size_t>(i) * count + j];
        };
    }
    return out;
}

TensorPtr concat_cols(const std::vector<TensorPtr>& parts) {
    check(!parts.empty(), ErrorCode::kDimension,
          "concat_cols needs at least one part");
    int rows = -1, total = 0;
    for (const auto& p : parts) {
        check_rank2(p, "concat_cols");
        if (rows < 0) rows = p->rows();
        check(p->rows() == rows, ErrorCode::kDimension,
              "concat_cols parts must share a row count");
        total += p->cols();
    }
    std::vector<TensorPtr> parents(parts.begin(), parts.end());
    auto out = node("concat_cols", {rows, total}, std::move(parents));
    int offset = 0;
    for (const auto& p : parts) {
        int cols = p->cols();
        for (int i = 0; i < rows; ++i)
            std::copy_n(p->data.data() + static_cast<std::size_t>(i) * cols,
                        cols,
                        out->data.data() +
                            static_cast<std::size_t>(i) * total + offset);
        offset += cols;
    }
    if (out->requires_grad) {
        Tensor* self = out.get();
        std::vector<Tensor*> raw;
        for (const auto& p : parts) raw.push_back(p.get());
        out->backward_fn = [self, raw, rows, total] {
            int offset = 0;
            for (Tensor* p : raw) {
                int cols = p->cols();
                if (p->requires_grad) {
                    real* dp = p->grad_data();
                    for (int i = 0; i < rows; ++i)
                        for (int j = 0; j < cols; ++j)
                            dp[static_cast<std::size_t>(i) * cols + j] +=
                                self->grad[static_cast<std::size_t>(i) * total +
                                           offset + j];
                }
                offset += cols;
            }
        };
    }
    return out;
}

TensorPtr replace_rows(const TensorPtr& x, const TensorPtr& replacement,
                       std::vector<int> indices) {
    check_rank2(x, "replace_rows");
    check_rank2(replacement, "replace_rows");
    int rows = x->rows(), cols = x->cols();
    check(replacement->rows() == 1 && replacement->cols() == cols,
          ErrorCode::kDimension,
          "replacement must be a single row of width " + std::to_string(cols));
    std::unordered_set<int> seen;
    for (int idx : indices) {
        check(idx >= 0 && idx < rows, ErrorCode::kInvalidMask,
              "replace_rows index " + std::to_string(idx) + " outside [0, " +
                  std::to_string(rows) + ")");
        check(seen.insert(idx).second, ErrorCode::kInvalidMask,
              "replace_rows index " + std::to_string(idx) + " repeats");
    }
    auto out = node("replace_rows", x->shape, {x, replacement});
    out->data = x->data;
    for (int idx : indices)
        std::copy_n(replacement->data.data(), cols,
                    out->data.data() + static_cast<std::size_t>(idx) * cols);
    if (out->requires_grad) {
        Tensor* self = out.get();
        Tensor* xp = x.get();
        Tensor* rp = replacement.get();
        auto idx = std::make_shared<std::vector<int>>(std::move(indices));
        out->backward_fn = [self, xp, rp, idx, rows, cols] {
            if (xp->requires_grad) {
                std::vector<unsigned char> replaced(rows, 0);
                for (int i : *idx) replaced[i] = 1;
                real* dx = xp->grad_data();
                for (int i = 0; i < rows; ++i) {
                    if (replaced[i]) continue;  // replaced rows: gradient 0
                    for (int j = 0; j < cols; ++j)
                        dx[static_cast<std::size_t>(i) * cols + j] +=
                            self->grad[static_cast<std::size_t>(i) * cols + j];
                }
            }
            if (rp->requires_grad) {
                real* dr = rp->grad_data();
                for (int i : *idx)
                    for (int j = 0; j < cols; ++j)
                        dr[j] +=
                            self->grad[static_cast<std::size_t>(i) * cols + j];
            }
        };
    }
    return out;
}

TensorPtr l2_normalize_rows(const TensorPtr& x) {
    check_rank2(x, "l2_normalize_rows");
    int rows = x->rows(), cols = x->cols();
    auto out = node("l2_normalize_rows", x->shape, {x});
    auto inv_norm = std::make_shared<std::vector<real>>(rows);
    for (int i = 0; i < rows; ++i) {
        const real* xi = x->data.data() + static_cast<std::size_t>(i) * cols;
        real ss = 0;
        for (int j = 0; j < cols; ++j) ss += xi[j] * xi[j];
        real inv = real(1) / std::sqrt(ss + real(1e-12));
        (*inv_norm)[i] = inv;
        real* yi = out->data.data() + static_cast<std::size_t>(i) * cols;
        for (int j = 0; j < cols; ++j) yi[j] = xi[j] * inv;
    }
    if (out->requires_grad) {
        Tensor* self = out.get();
        Tensor* xp = x.get();
        out->backward_fn = [self, xp, inv_norm, rows, cols] {
            real* dx = xp->grad_data();
            for (int i = 0; i < rows; ++i) {
                const real* yi =
                    self->data.data() + static_cast<std::size_t>(i) * cols;
                const real* dyi =
                    self->grad.data() + static_cast<std::size_t>(i) * cols;
                real dot = 0;
                for (int j = 0; j < cols; ++j) dot += dyi[j] * yi[j];
                real inv = (*inv_norm)[i];
                real* dxi = dx + static_cast<std::size_t>(i) * cols;
                for (int j = 0; j < cols; ++j)
                    dxi[j] += (dyi[j] - dot * yi[j]) * inv;
            }
        };
    }
    return out;
}

TensorPtr gathered_dot(const TensorPtr& a, const TensorPtr& b,
                       const std::vector<std::pair<int, int>>& pairs, int rows,
                       int cols) {
    check_rank2(a, "gathered_dot");
    check_rank2(b, "gathered_dot");
    check(a->cols() == b->cols(), ErrorCode::kDimension,
          "gathered_dot operands must share a width");
    check(rows >= 1 && cols >= 1 &&
              static_cast<std::size_t>(rows) * cols == pairs.size(),
          ErrorCode::kDimension,
          "gathered_dot pair count does not match the output shape");
    int d = a->cols();
    for (const auto& [i, j] : pairs) {
        check(i >= 0 && i < a->rows(), ErrorCode::kDimension,
              "gathered_dot left index out of range");
        check(j >= 0 && j < b->rows(), ErrorCode::kDimension,
              "gathered_dot right index out of range");
    }
    auto out = node("gathered_dot", {rows, cols}, {a, b});
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const real* ai =
            a->data.data() + static_cast<std::size_t>(pairs[p].first) * d;
        const real* bj =
            b->data.data() + static_cast<std::size_t>(pairs[p].second) * d;
        real acc = 0;
        for (int k = 0; k < d; ++k) acc += ai[k] * bj[k];
        out->data[p] = acc;
    }
    if (out->requires_grad) {
        Tensor* self = out.get();
        Tensor* ap = a.get();
        Tensor* bp = b.get();
        auto prs =
            std::make_shared<std::vector<std::pair<int, int>>>(pairs);
        out->backward_fn = [self, ap, bp, prs, d] {
            real* da = ap->requires_grad ? ap->grad_data() : nullptr;
            real* db = bp->requires_grad ? bp->grad_data() : nullptr;
            for (std::size_t p = 0; p < prs->size(); ++p) {
                real g = self->grad[p];
                const real* ai =
                    ap->data.data() +
                    static_cast<std::size_t>((*prs)[p].first) * d;
                const real* bj =
                    bp->data.data() +
                    static_cast<std::size_t>((*prs)[p].second) * d;
                if (da) {
                    real* dst =
                        da + static_cast<std::size_t>((*prs)[p].first) * d;
                    for (int k = 0; k < d; ++k) dst[k] += g * bj[k];
                }
                if (db) {
                    real* dst =
                        db + static_cast<std::size_t>((*prs)[p].second) * d;
                    for (int k = 0; k < d; ++k) dst[k] += g * ai[k];
                }
            }
        };
    }
    return out;
}

TensorPtr ctc_loss(const TensorPtr& log_probs, const std::vector<int>& labels) {
    check_rank2(log_probs, "ctc_loss");
    int t = log_probs->rows(), vocab = log_probs->cols();
    std::vector<double> logp(log_probs->data.begin(), log_probs->data.end());
    auto out = node("ctc_loss", {}, {log_probs});
    if (out->requires_grad) {
        auto grad = std::make_shared<std::vector<double>>();
        out->data[0] = static_cast<real>(
            ctc::forward_backward(logp.data(), t, vocab, labels, grad.get()));
        Tensor* self = out.get();
        Tensor* xp = log_probs.get();
        out->backward_fn = [self, xp, grad] {
            real g = self->grad[0];
            real* dx = xp->grad_data();
            for (std::size_t i = 0; i < grad->size(); ++i)
                dx[i] += g * static_cast<real>((*grad)[i]);
        };
    } else {
        out->data[0] = static_cast<real>(
            ctc::forward_backward(logp.data(), t, vocab, labels, nullptr));
    }
    return out;
}

}  // namespace draft::ops
