#include "draftlab/synth.hpp"

#include "draftlab/error.hpp"
#include "draftlab/rng.hpp"
#include "draftlab/text.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace draft::synth {

void SyntheticDomainSpec::validate() const {
    check(!domain_id.empty(), ErrorCode::kConfig, "domain_id must be set");
    check(!symbols.empty(), ErrorCode::kConfig,
          "domain " + domain_id + " has an empty vocabulary");
    for (const auto& s : symbols) {
        text::tokenize(std::string(1, s.symbol));  // must be in the alphabet
        check(s.weight > 0.0, ErrorCode::kConfig,
              "symbol weight must be positive");
        check(s.bandwidth > 0.0, ErrorCode::kConfig,
              "symbol bandwidth must be positive");
        check(s.center_bin >= 0.0 && s.center_bin < n_mels,
              ErrorCode::kConfig, "symbol center bin out of range");
    }
    check(n_mels >= 1, ErrorCode::kConfig, "n_mels must be >= 1");
    check(min_symbols >= 1 && min_symbols <= max_symbols, ErrorCode::kConfig,
          "symbol count range invalid");
    check(min_frames_per_symbol >= 1 &&
              min_frames_per_symbol <= max_frames_per_symbol,
          ErrorCode::kConfig, "frames-per-symbol range invalid");
    check(noise_level >= 0.0, ErrorCode::kConfig,
          "noise_level must be >= 0");
}

bool specs_differ(const SyntheticDomainSpec& a, const SyntheticDomainSpec& b) {
    if (a.symbols.size() != b.symbols.size()) return true;
    for (std::size_t i = 0; i < a.symbols.size(); ++i) {
        const auto& x = a.symbols[i];
        const auto& y = b.symbols[i];
        if (x.symbol != y.symbol || x.weight != y.weight ||
            x.center_bin != y.center_bin || x.bandwidth != y.bandwidth ||
            x.tilt != y.tilt)
            return true;
    }
    return a.noise_level != b.noise_level ||
           a.min_symbols != b.min_symbols || a.max_symbols != b.max_symbols ||
           a.min_frames_per_symbol != b.min_frames_per_symbol ||
           a.max_frames_per_symbol != b.max_frames_per_symbol ||
           a.n_mels != b.n_mels;
}

std::vector<real> symbol_frame(const SymbolTemplate& tmpl, int n_mels) {
    std::vector<real> frame(static_cast<std::size_t>(n_mels));
    for (int b = 0; b < n_mels; ++b) {
        const double rel = (tmpl.center_bin - b) / tmpl.bandwidth;
        const double pos =
            n_mels > 1 ? static_cast<double>(b) / (n_mels - 1) - 0.5 : 0.0;
        frame[static_cast<std::size_t>(b)] = static_cast<real>(
            -1.0 + 2.5 * std::exp(-0.5 * rel * rel) + tmpl.tilt * pos);
    }
    return frame;
}

std::vector<data::Utterance> synth_generate(const SyntheticDomainSpec& spec,
                                            int n_utts) {
    spec.validate();
    check(n_utts >= 1, ErrorCode::kConfig, "n_utts must be >= 1");

    double total_weight = 0.0;
    for (const auto& s : spec.symbols) total_weight += s.weight;

    Rng master(spec.seed);
    std::vector<data::Utterance> utts;
    utts.reserve(static_cast<std::size_t>(n_utts));
    for (int u = 0; u < n_utts; ++u) {
        Rng rng = master.fork(static_cast<std::uint64_t>(u));
        const int n_symbols =
            spec.min_symbols +
            static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(
                spec.max_symbols - spec.min_symbols + 1)));

        std::string transcript;
        std::vector<std::vector<real>> rows;
        for (int s = 0; s < n_symbols; ++s) {
            double pick = rng.uniform() * total_weight;
            std::size_t idx = 0;
            for (; idx + 1 < spec.symbols.size(); ++idx) {
                pick -= spec.symbols[idx].weight;
                if (pick < 0.0) break;
            }
            const auto& tmpl = spec.symbols[idx];
            transcript.push_back(tmpl.symbol);

            const int frames =
                spec.min_frames_per_symbol +
                static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(
                    spec.max_frames_per_symbol - spec.min_frames_per_symbol +
                    1)));
            const auto base = symbol_frame(tmpl, spec.n_mels);
            for (int f = 0; f < frames; ++f) {
                auto row = base;
                if (spec.noise_level > 0.0)
                    for (auto& v : row)
                        v += static_cast<real>(spec.noise_level *
                                               rng.normal());
                rows.push_back(std::move(row));
            }
        }

        data::Utterance utt;
        char suffix[16];
        std::snprintf(suffix, sizeof(suffix), "_%05d", u);
        utt.id = spec.domain_id + suffix;
        utt.features =
            make_tensor({static_cast<int>(rows.size()), spec.n_mels});
        for (std::size_t t = 0; t < rows.size(); ++t)
            std::copy(rows[t].begin(), rows[t].end(),
                      utt.features->data.begin() +
                          t * static_cast<std::size_t>(spec.n_mels));
        utt.transcript = text::tokenize(transcript);
        utts.push_back(std::move(utt));
    }
    return utts;
}

std::string write_synth_corpus(const std::string& dir,
                               const SyntheticDomainSpec& spec, int n_utts) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const auto utts = synth_generate(spec, n_utts);

    std::vector<data::ManifestRecord> records;
    records.reserve(utts.size());
    for (const auto& u : utts) {
        const std::string feat_name = u.id + ".feat";
        data::save_features((fs::path(dir) / feat_name).string(), u.features);
        records.push_back({u.id, feat_name, text::detokenize(u.transcript)});
    }
    const std::string manifest = (fs::path(dir) / "manifest.tsv").string();
    data::write_manifest(manifest, records);

    std::ofstream side((fs::path(dir) / "spec.txt").string());
    check(static_cast<bool>(side), ErrorCode::kCorruptFile,
          "cannot write spec sidecar in " + dir);
    side << "domain_id=" << spec.domain_id << '\n'
         << "noise_level=" << spec.noise_level << '\n'
         << "min_symbols=" << spec.min_symbols << '\n'
         << "max_symbols=" << spec.max_symbols << '\n'
         << "min_frames_per_symbol=" << spec.min_frames_per_symbol << '\n'
         << "max_frames_per_symbol=" << spec.max_frames_per_symbol << '\n'
         << "n_mels=" << spec.n_mels << '\n'
         << "seed=" << spec.seed << '\n'
         << "n_utts=" << n_utts << '\n';
    for (const auto& s : spec.symbols)
        side << "symbol=" << s.symbol << " weight=" << s.weight
             << " center_bin=" << s.center_bin << " bandwidth=" << s.bandwidth
             << " tilt=" << s.tilt << '\n';
    check(static_cast<bool>(side), ErrorCode::kCorruptFile,
          "short write to spec sidecar in " + dir);
    return manifest;
}

SyntheticDomainSpec default_source_spec(std::uint64_t seed) {
    SyntheticDomainSpec spec;
    spec.domain_id = "source";
    spec.seed = seed;
    const char symbols[] = {'a', 'b', 'c', 'd', 'e'};
    for (int i = 0; i < 5; ++i) {
        SymbolTemplate t;
        t.symbol = symbols[i];
        t.weight = 1.0;
        t.center_bin = 8.0 + 16.0 * i;
        t.bandwidth = 4.0;
        t.tilt = 0.6;
        spec.symbols.push_back(t);
    }
    return spec;
}

SyntheticDomainSpec default_target_spec(std::uint64_t seed) {
    SyntheticDomainSpec spec = default_source_spec(seed);
    spec.domain_id = "target";
    for (std::size_t i = 0; i < spec.symbols.size(); ++i) {
        spec.symbols[i].center_bin += 5.0;
        spec.symbols[i].tilt = -0.6;
    }
    spec.symbols.front().weight = 2.0;
    spec.symbols.back().weight = 2.0;
    return spec;
}

}  // namespace draft::synth
