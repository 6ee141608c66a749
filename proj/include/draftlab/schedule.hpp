#pragma once

#include "draftlab/error.hpp"

#include <cmath>
#include <cstdint>
#include <optional>

namespace draft {

struct NoamConfig {
    double factor = 1.0;
    std::int64_t warmup_steps = 1;
    int d_model = 1;
};

// lr = factor * d_model^(-1/2) * min(step^(-1/2), step * warmup^(-3/2)).
// Peaks exactly at step = warmup where the two branches meet.
inline double noam_lr(const NoamConfig& cfg, std::int64_t step) {
    check(cfg.factor > 0 && cfg.warmup_steps > 0 && cfg.d_model > 0,
          ErrorCode::kConfig, "noam config fields must all be positive");
    check(step >= 1, ErrorCode::kState,
          "noam schedule starts at step 1, got " + std::to_string(step));
    double s = static_cast<double>(step);
    double w = static_cast<double>(cfg.warmup_steps);
    return cfg.factor * std::pow(static_cast<double>(cfg.d_model), -0.5) *
           std::min(std::pow(s, -0.5), s * std::pow(w, -1.5));
}

struct TriStageConfig {
    std::int64_t warmup_steps = 0;
    std::int64_t hold_steps = 0;
    std::int64_t total_steps = 1;
    double peak_lr = 0.0;
    // Present: the tail decays exponentially, reaching final_ratio * peak at
    // total_steps. Absent: the tail decays linearly to 0 (the ramp-then-down
    // shape used for the adaptation stage).
    std::optional<double> final_ratio;
};

inline void validate(const TriStageConfig& cfg) {
    check(cfg.peak_lr > 0, ErrorCode::kConfig,
          "tri-stage peak learning rate must be positive");
    check(cfg.warmup_steps >= 0 && cfg.hold_steps >= 0, ErrorCode::kConfig,
          "tri-stage segment lengths cannot be negative");
    check(cfg.warmup_steps + cfg.hold_steps <= cfg.total_steps,
          ErrorCode::kConfig,
          "tri-stage warmup plus hold exceeds the total step budget");
    if (cfg.final_ratio)
        check(*cfg.final_ratio > 0 && *cfg.final_ratio <= 1,
              ErrorCode::kConfig, "tri-stage final ratio must be in (0, 1]");
}

inline double tristage_lr(const TriStageConfig& cfg, std::int64_t step) {
    validate(cfg);
    check(step >= 0 && step <= cfg.total_steps, ErrorCode::kState,
          "tri-stage step " + std::to_string(step) + " outside [0, " +
              std::to_string(cfg.total_steps) + "]");
    if (step < cfg.warmup_steps)
        return cfg.peak_lr * static_cast<double>(step) /
               static_cast<double>(cfg.warmup_steps);
    std::int64_t past_hold = step - cfg.warmup_steps - cfg.hold_steps;
    if (past_hold <= 0) return cfg.peak_lr;
    std::int64_t decay_len =
        cfg.total_steps - cfg.warmup_steps - cfg.hold_steps;
    double frac = static_cast<double>(past_hold) /
                  static_cast<double>(decay_len);
    if (cfg.final_ratio)
        return cfg.peak_lr * std::pow(*cfg.final_ratio, frac);
    return cfg.peak_lr * (1.0 - frac);
}

}  // namespace draft
