#pragma once

#include "draftlab/tensor.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace draft {

// The four parameter families the training stages freeze and thaw. Tag
// values are fixed by the checkpoint format.
enum class ParamGroup : std::uint8_t {
    kBackbone = 0,
    kSslHead = 1,
    kAdapter = 2,
    kAsrHead = 3,
};

inline constexpr int kGroupCount = 4;

const char* group_name(ParamGroup group);
std::optional<ParamGroup> group_from_name(const std::string& name);

struct ParamEntry {
    TensorPtr tensor;
    ParamGroup group;
    bool trainable = true;
};

// Named parameters with group tags and trainable flags. Iteration order is
// lexicographic by name everywhere (map order), so checkpoints and optimizer
// sweeps are deterministic. The per-group update counters count how many
// training stages touched each group.
class ParamStore {
  public:
    TensorPtr create(const std::string& name, ParamGroup group,
                     std::vector<int> shape);
    TensorPtr create_randn(const std::string& name, ParamGroup group,
                           std::vector<int> shape, Rng& rng, double stddev);

    bool has(const std::string& name) const;
    TensorPtr get(const std::string& name) const;
    const ParamEntry& entry(const std::string& name) const;
    void remove(const std::string& name);

    // All names, or one group's names, lexicographically sorted.
    std::vector<std::string> names() const;
    std::vector<std::string> names(ParamGroup group) const;

    // Marks exactly the given groups trainable; every other parameter is
    // frozen (requires_grad cleared, so it never even receives a gradient).
    void set_trainable_groups(const std::set<ParamGroup>& groups);

    bool trainable(const std::string& name) const;

    std::int64_t count_params() const;
    std::int64_t count_params(ParamGroup group) const;

    void zero_grads();

    // Stage bookkeeping: increments the counter of every group in `groups`.
    void note_stage(const std::set<ParamGroup>& groups);
    std::uint32_t stage_count(ParamGroup group) const;
    const std::array<std::uint32_t, kGroupCount>& stage_counts() const {
        return stage_counts_;
    }
    void set_stage_counts(const std::array<std::uint32_t, kGroupCount>& c) {
        stage_counts_ = c;
    }

    const std::map<std::string, ParamEntry>& entries() const {
        return entries_;
    }

  private:
    std::map<std::string, ParamEntry> entries_;
    std::array<std::uint32_t, kGroupCount> stage_counts_{};
};

}  // namespace draft
