#include "draftlab/data.hpp"

#include "draftlab/audio.hpp"
#include "draftlab/error.hpp"
#include "draftlab/rng.hpp"
#include "draftlab/text.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>

namespace draft::data {

namespace {

constexpr char kFeatMagic[4] = {'D', 'F', 'E', 'A'};
constexpr std::uint32_t kFeatVersion = 1;

void put_u32(std::ofstream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>(v >> (8 * i));
    out.write(b, 4);
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) |
           static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 |
           static_cast<std::uint32_t>(p[3]) << 24;
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

std::vector<ManifestRecord> load_manifest(const std::string& path) {
    std::ifstream in(path);
    check(static_cast<bool>(in), ErrorCode::kCorruptFile,
          "cannot open manifest " + path);
    std::vector<ManifestRecord> records;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::size_t tab1 = line.find('\t');
        check(tab1 != std::string::npos, ErrorCode::kCorruptFile,
              path + ":" + std::to_string(line_no) +
                  ": expected id<TAB>path<TAB>transcript");
        const std::size_t tab2 = line.find('\t', tab1 + 1);
        check(tab2 != std::string::npos, ErrorCode::kCorruptFile,
              path + ":" + std::to_string(line_no) +
                  ": missing transcript field (may be empty, tab required)");
        ManifestRecord r;
        r.id = line.substr(0, tab1);
        r.path = line.substr(tab1 + 1, tab2 - tab1 - 1);
        r.transcript = line.substr(tab2 + 1);
        check(!r.id.empty(), ErrorCode::kCorruptFile,
              path + ":" + std::to_string(line_no) + ": empty id");
        check(!r.path.empty(), ErrorCode::kCorruptFile,
              path + ":" + std::to_string(line_no) + ": empty path");
        records.push_back(std::move(r));
    }
    return records;
}

void write_manifest(const std::string& path,
                    const std::vector<ManifestRecord>& records) {
    std::ofstream out(path);
    check(static_cast<bool>(out), ErrorCode::kCorruptFile,
          "cannot write manifest " + path);
    for (const auto& r : records)
        out << r.id << '\t' << r.path << '\t' << r.transcript << '\n';
    check(static_cast<bool>(out), ErrorCode::kCorruptFile,
          "short write to " + path);
}

void save_features(const std::string& path, const TensorPtr& features) {
    check(features && features->rank() == 2, ErrorCode::kRank,
          "save_features needs a rank-2 tensor");
    std::ofstream out(path, std::ios::binary);
    check(static_cast<bool>(out), ErrorCode::kCorruptFile,
          "cannot write " + path);
    out.write(kFeatMagic, 4);
    put_u32(out, kFeatVersion);
    put_u32(out, static_cast<std::uint32_t>(features->rows()));
    put_u32(out, static_cast<std::uint32_t>(features->cols()));
    for (real v : features->data) {
        const float f = static_cast<float>(v);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32(out, bits);
    }
    check(static_cast<bool>(out), ErrorCode::kCorruptFile,
          "short write to " + path);
}

TensorPtr load_features(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    check(static_cast<bool>(in), ErrorCode::kCorruptFile,
          "cannot open " + path);
    std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in),
                                     std::istreambuf_iterator<char>()};
    check(bytes.size() >= 16, ErrorCode::kCorruptFile,
          path + ": shorter than a feature header");
    check(std::memcmp(bytes.data(), kFeatMagic, 4) == 0,
          ErrorCode::kUnsupportedFormat, path + ": not a feature file");
    const std::uint32_t version = get_u32(bytes.data() + 4);
    check(version == kFeatVersion, ErrorCode::kUnsupportedFormat,
          path + ": feature file version " + std::to_string(version) +
              " is not " + std::to_string(kFeatVersion));
    const std::uint32_t rows = get_u32(bytes.data() + 8);
    const std::uint32_t cols = get_u32(bytes.data() + 12);
    check(rows >= 1 && cols >= 1, ErrorCode::kCorruptFile,
          path + ": empty feature matrix");
    const std::size_t need =
        16 + 4ull * static_cast<std::size_t>(rows) * cols;
    check(bytes.size() == need, ErrorCode::kCorruptFile,
          path + ": payload holds " + std::to_string(bytes.size() - 16) +
              " bytes, header declares " + std::to_string(need - 16));
    auto out =
        make_tensor({static_cast<int>(rows), static_cast<int>(cols)});
    for (std::size_t i = 0; i < out->data.size(); ++i) {
        const std::uint32_t bits = get_u32(bytes.data() + 16 + 4 * i);
        float f;
        std::memcpy(&f, &bits, 4);
        out->data[i] = static_cast<real>(f);
    }
    return out;
}

Utterance load_utterance(const ManifestRecord& record,
                         const std::string& base_dir,
                         const features::FeatureConfig& cfg) {
    namespace fs = std::filesystem;
    fs::path p(record.path);
    if (p.is_relative() && !base_dir.empty()) p = fs::path(base_dir) / p;

    Utterance utt;
    utt.id = record.id;
    if (ends_with(record.path, ".wav")) {
        auto wav = audio::read_wav(p.string());
        check(wav.sample_rate == cfg.sample_rate, ErrorCode::kConfig,
              p.string() + ": sample rate " +
                  std::to_string(wav.sample_rate) + " differs from configured " +
                  std::to_string(cfg.sample_rate));
        utt.features = features::log_mel(wav.samples, cfg);
    } else if (ends_with(record.path, ".feat")) {
        utt.features = load_features(p.string());
        check(utt.features->cols() == cfg.n_mels, ErrorCode::kDimension,
              p.string() + ": " + std::to_string(utt.features->cols()) +
                  " feature dims, configured " + std::to_string(cfg.n_mels));
    } else {
        fail(ErrorCode::kUnsupportedFormat,
             record.path + ": unknown extension (expected .wav or .feat)");
    }
    utt.transcript = text::tokenize(record.transcript);
    return utt;
}

std::vector<Utterance> load_corpus(const std::string& manifest_path,
                                   const features::FeatureConfig& cfg) {
    const auto records = load_manifest(manifest_path);
    const std::string base =
        std::filesystem::path(manifest_path).parent_path().string();
    std::vector<Utterance> utts;
    utts.reserve(records.size());
    for (const auto& r : records) utts.push_back(load_utterance(r, base, cfg));
    return utts;
}

std::vector<Batch> make_batches(const std::vector<Utterance>& utts,
                                int batch_size, std::uint64_t seed,
                                bool sort_by_length) {
    check(!utts.empty(), ErrorCode::kConfig, "cannot batch an empty corpus");
    check(batch_size >= 1, ErrorCode::kConfig, "batch_size must be >= 1");
    const int dim = utts.front().features->cols();
    for (const auto& u : utts)
        check(u.features->cols() == dim, ErrorCode::kDimension,
              "utterance " + u.id + " has " +
                  std::to_string(u.features->cols()) +
                  " feature dims, corpus uses " + std::to_string(dim));

    std::vector<std::size_t> order(utts.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.uniform_index(i)]);
    if (sort_by_length)
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) {
                             return utts[a].features->rows() <
                                    utts[b].features->rows();
                         });

    std::vector<Batch> batches;
    for (std::size_t at = 0; at < order.size();
         at += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(
            order.size(), at + static_cast<std::size_t>(batch_size));
        const int b = static_cast<int>(end - at);
        int t_max = 0, l_max = 0;
        for (std::size_t i = at; i < end; ++i) {
            t_max = std::max(t_max, utts[order[i]].features->rows());
            l_max = std::max(
                l_max, static_cast<int>(utts[order[i]].transcript.size()));
        }

        Batch batch;
        batch.features = make_tensor({b, t_max, dim});
        batch.feature_lengths.resize(static_cast<std::size_t>(b));
        batch.token_cols = l_max;
        batch.tokens.assign(static_cast<std::size_t>(b) *
                                static_cast<std::size_t>(l_max),
                            0);
        batch.token_lengths.resize(static_cast<std::size_t>(b));
        batch.padding_mask.assign(static_cast<std::size_t>(b) *
                                      static_cast<std::size_t>(t_max),
                                  0);
        for (int i = 0; i < b; ++i) {
            const auto& u = utts[order[at + static_cast<std::size_t>(i)]];
            const int t_len = u.features->rows();
            batch.ids.push_back(u.id);
            batch.feature_lengths[static_cast<std::size_t>(i)] = t_len;
            std::copy(u.features->data.begin(), u.features->data.end(),
                      batch.features->data.begin() +
                          static_cast<std::size_t>(i) * t_max * dim);
            for (int t = 0; t < t_len; ++t)
                batch.padding_mask[static_cast<std::size_t>(i) * t_max +
                                   static_cast<std::size_t>(t)] = 1;
            batch.token_lengths[static_cast<std::size_t>(i)] =
                static_cast<int>(u.transcript.size());
            std::copy(u.transcript.begin(), u.transcript.end(),
                      batch.tokens.begin() +
                          static_cast<std::size_t>(i) * l_max);
        }
        batches.push_back(std::move(batch));
    }
    return batches;
}

TensorPtr batch_item_features(const Batch& batch, int i) {
    const int b = batch.features->shape[0];
    check(i >= 0 && i < b, ErrorCode::kDimension,
          "batch item " + std::to_string(i) + " out of range");
    const int t_max = batch.features->shape[1];
    const int dim = batch.features->shape[2];
    const int len = batch.feature_lengths[static_cast<std::size_t>(i)];
    auto out = make_tensor({len, dim});
    std::copy_n(batch.features->data.begin() +
                    static_cast<std::size_t>(i) * t_max * dim,
                static_cast<std::size_t>(len) * dim, out->data.begin());
    return out;
}

std::vector<int> batch_item_tokens(const Batch& batch, int i) {
    const int b = static_cast<int>(batch.token_lengths.size());
    check(i >= 0 && i < b, ErrorCode::kDimension,
          "batch item " + std::to_string(i) + " out of range");
    const int len = batch.token_lengths[static_cast<std::size_t>(i)];
    const auto begin = batch.tokens.begin() +
                       static_cast<std::size_t>(i) * batch.token_cols;
    return std::vector<int>(begin, begin + len);
}

}  // namespace draft::data
