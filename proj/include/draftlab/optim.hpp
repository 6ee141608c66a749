#pragma once

#include "draftlab/param_store.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace draft {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.98;
    double epsilon = 1e-9;
};

// Bias-corrected Adam over the trainable parameters of a store. Moment
// buffers are created lazily per parameter name; frozen parameters are never
// looked at, which keeps them byte-identical by construction. Each training
// stage starts from a fresh state.
class AdamState {
  public:
    explicit AdamState(AdamConfig config = {}) : config_(config) {}

    // One update over every trainable parameter that holds a gradient.
    void step(ParamStore& store, double lr);

    std::int64_t t() const { return t_; }
    const AdamConfig& config() const { return config_; }

    // Checkpoint plumbing: moments exposed per name in map (lexicographic)
    // order. moment(name) -> {m, v} pair of flat buffers.
    struct Moments {
        std::vector<real> m;
        std::vector<real> v;
    };
    const std::map<std::string, Moments>& moments() const { return slots_; }
    void restore(std::int64_t t, std::map<std::string, Moments> slots) {
        t_ = t;
        slots_ = std::move(slots);
    }

  private:
    AdamConfig config_;
    std::int64_t t_ = 0;
    std::map<std::string, Moments> slots_;
};

// Free-function form of one update.
inline void adam_step(ParamStore& store, AdamState& state, double lr) {
    state.step(store, lr);
}

}  // namespace draft
