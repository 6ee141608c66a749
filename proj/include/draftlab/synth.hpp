#pragma once

#include "draftlab/data.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace draft::synth {

// One vocabulary symbol: its sampling weight and the spectral bump template
// its frames are rendered from (a Gaussian across mel bins plus a linear
// tilt).
struct SymbolTemplate {
    char symbol = 'a';
    double weight = 1.0;
    double center_bin = 40.0;
    double bandwidth = 4.0;  // bins
    double tilt = 0.0;       // feature-value slope from low to high bins
};

struct SyntheticDomainSpec {
    std::string domain_id;
    std::vector<SymbolTemplate> symbols;
    double noise_level = 0.25;
    int min_symbols = 3;  // transcript length range per utterance
    int max_symbols = 8;
    int min_frames_per_symbol = 6;
    int max_frames_per_symbol = 10;
    int n_mels = 80;
    std::uint64_t seed = 1;

    void validate() const;
};

// True when any distributional parameter differs (everything except the id
// and the seed). Two domains must differ somewhere or there is no shift to
// adapt to.
bool specs_differ(const SyntheticDomainSpec& a, const SyntheticDomainSpec& b);

// The deterministic frame template of one symbol with noise_level 0.
std::vector<real> symbol_frame(const SymbolTemplate& tmpl, int n_mels);

// Renders n_utts utterances: per utterance, a seeded child stream draws the
// symbol count, the symbols, each symbol's frame span, and the additive
// noise. Same spec -> bit-identical corpus.
std::vector<data::Utterance> synth_generate(const SyntheticDomainSpec& spec,
                                            int n_utts);

// Writes <dir>/<id>.feat files, <dir>/manifest.tsv, and <dir>/spec.txt
// echoing every spec field. Returns the manifest path.
std::string write_synth_corpus(const std::string& dir,
                               const SyntheticDomainSpec& spec, int n_utts);

// Built-in two-domain pair: same vocabulary, shifted bump centers, opposite
// spectral tilt, reweighted symbols. Source is the pretraining domain.
SyntheticDomainSpec default_source_spec(std::uint64_t seed);
SyntheticDomainSpec default_target_spec(std::uint64_t seed);

}  // namespace draft::synth
