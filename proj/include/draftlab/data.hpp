#pragma once

#include "draftlab/common.hpp"
#include "draftlab/features.hpp"
#include "draftlab/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace draft::data {

struct Utterance {
    std::string id;
    TensorPtr features;           // [T x n_mels]
    std::vector<int> transcript;  // token ids; empty for unlabeled data
};

// One manifest line: id<TAB>path<TAB>transcript (transcript may be empty).
struct ManifestRecord {
    std::string id;
    std::string path;
    std::string transcript;
};

std::vector<ManifestRecord> load_manifest(const std::string& path);
void write_manifest(const std::string& path,
                    const std::vector<ManifestRecord>& records);

// Binary feature file: magic "DFEA", u32 version, u32 rows, u32 cols,
// little-endian f32 payload. Synthetic corpora store features this way since
// they never pass through a waveform.
void save_features(const std::string& path, const TensorPtr& features);
TensorPtr load_features(const std::string& path);

// Resolves the record's path (relative paths are taken against base_dir),
// loads features (.wav through the front-end, .feat directly), and tokenizes
// the transcript.
Utterance load_utterance(const ManifestRecord& record,
                         const std::string& base_dir,
                         const features::FeatureConfig& cfg);

// Loads every record of the manifest; relative paths resolve against the
// manifest's own directory.
std::vector<Utterance> load_corpus(const std::string& manifest_path,
                                   const features::FeatureConfig& cfg);

struct Batch {
    TensorPtr features;                // [B x T_max x n_mels], zero padded
    std::vector<int> feature_lengths;  // frames per item
    std::vector<int> tokens;           // [B x L_max], padded with 0
    int token_cols = 0;                // L_max
    std::vector<int> token_lengths;
    std::vector<unsigned char> padding_mask;  // [B x T_max], 1 = real frame
    std::vector<std::string> ids;
};

// Shuffles with the seeded generator (then optionally stable-sorts by frame
// count, so length grouping stays deterministic), and cuts sequential chunks
// of batch_size; the last batch may be smaller, never dropped.
std::vector<Batch> make_batches(const std::vector<Utterance>& utts,
                                int batch_size, std::uint64_t seed,
                                bool sort_by_length);

// Item i of a batch, re-materialized without padding: a fresh [len x n_mels]
// feature tensor (inputs carry no gradient) and the unpadded token ids.
TensorPtr batch_item_features(const Batch& batch, int i);
std::vector<int> batch_item_tokens(const Batch& batch, int i);

}  // namespace draft::data
