#pragma once

#include "draftlab/kmeans.hpp"
#include "draftlab/optim.hpp"
#include "draftlab/param_store.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace draft::checkpoint {

// On-disk container, all integers little-endian:
//   magic "DRFT", u32 version, u64 step, u32 tensor count,
//   per tensor: u16 name length, name bytes, u8 group tag, u8 rank,
//     u32 dims[rank], raw little-endian f32 data,
//   u32 per-group update counters (one per parameter group),
//   u32 generator word count, u64 generator words,
//   u8 optimizer flag; when set: u64 update count, f64 beta1/beta2/epsilon,
//     u32 slot count, per slot the first and second moment buffers as two
//     tensor records named "<param>#m" and "<param>#v".
inline constexpr std::uint32_t kVersion = 1;

struct TrainState {
    std::uint64_t step = 0;
    std::vector<std::uint64_t> rng_words;
};

struct Checkpoint {
    std::uint32_t version = kVersion;
    std::uint64_t step = 0;
    ParamStore store;
    std::vector<std::uint64_t> rng_words;
    bool has_optimizer = false;
    std::int64_t optimizer_t = 0;
    AdamConfig optimizer_config;
    std::map<std::string, AdamState::Moments> optimizer_slots;
};

void save_checkpoint(const std::string& path, const ParamStore& store,
                     const TrainState& state,
                     const AdamState* optimizer = nullptr);

Checkpoint load_checkpoint(const std::string& path);

// Copies checkpoint values into an existing store in place, so model wiring
// that holds the store's tensors keeps seeing them. Every parameter the store
// owns must appear in the checkpoint with an identical shape and group tag;
// names the checkpoint lacks are listed in the error. Checkpoint tensors the
// store does not own are ignored. Per-group update counters are copied over.
void restore_into(ParamStore& store, const Checkpoint& ckpt);

// restore_into limited to the store's parameters in the given groups; other
// parameters keep their current values. Counters are still copied whole,
// since they describe the loaded weights' history.
void restore_groups(ParamStore& store, const Checkpoint& ckpt,
                    const std::set<ParamGroup>& groups);

// Builds an AdamState from a loaded checkpoint's optimizer block.
AdamState restore_optimizer(const Checkpoint& ckpt);

// Codebooks ride the same container: the centroid matrix plus a one-cell
// inertia tensor, with the Lloyd iteration count in the step field.
void save_codebook(const std::string& path, const kmeans::Codebook& book);
kmeans::Codebook load_codebook(const std::string& path);

}  // namespace draft::checkpoint
