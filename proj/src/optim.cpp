#include "draftlab/optim.hpp"

#include "draftlab/kernels.hpp"

namespace draft {

void AdamState::step(ParamStore& store, double lr) {
    check(lr > 0, ErrorCode::kConfig,
          "adam learning rate must be positive, got " + std::to_string(lr));
    ++t_;
    for (const auto& [name, entry] : store.entries()) {
        if (!entry.trainable) continue;
        Tensor& p = *entry.tensor;
        // Trainable but outside the current graph (no gradient buffer):
        // leave the parameter and its moments untouched this step.
        if (p.grad.empty()) continue;
        auto& slot = slots_[name];
        if (slot.m.empty()) {
            slot.m.assign(p.data.size(), real(0));
            slot.v.assign(p.data.size(), real(0));
        }
        kernels::adam_update(p.data.data(), p.grad.data(), slot.m.data(),
                             slot.v.data(),
                             static_cast<std::int64_t>(p.data.size()), t_, lr,
                             config_.beta1, config_.beta2, config_.epsilon);
    }
}

}  // namespace draft
