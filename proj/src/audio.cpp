#include "draftlab/audio.hpp"

#include "draftlab/error.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

namespace draft::audio {

namespace {

std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) |
           static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 |
           static_cast<std::uint32_t>(p[3]) << 24;
}

std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] |
                                      static_cast<std::uint16_t>(p[1]) << 8);
}

bool tag_is(const unsigned char* p, const char* tag) {
    return std::memcmp(p, tag, 4) == 0;
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
}

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
}

}  // namespace

WavData read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    check(static_cast<bool>(in), ErrorCode::kCorruptFile,
          "cannot open " + path);
    std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in),
                                     std::istreambuf_iterator<char>()};

    check(bytes.size() >= 12, ErrorCode::kCorruptFile,
          path + ": shorter than a RIFF header");
    check(tag_is(bytes.data(), "RIFF"), ErrorCode::kUnsupportedFormat,
          path + ": RIFF tag missing");
    check(tag_is(bytes.data() + 8, "WAVE"), ErrorCode::kUnsupportedFormat,
          path + ": WAVE tag missing");

    bool have_fmt = false;
    int sample_rate = 0;
    std::size_t data_at = 0, data_len = 0;
    bool have_data = false;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const unsigned char* hdr = bytes.data() + pos;
        const std::size_t body = pos + 8;
        const std::uint32_t size = read_u32(hdr + 4);
        if (tag_is(hdr, "fmt ")) {
            check(size >= 16 && body + 16 <= bytes.size(),
                  ErrorCode::kCorruptFile, path + ": fmt chunk truncated");
            const unsigned char* f = bytes.data() + body;
            const std::uint16_t audio_format = read_u16(f);
            check(audio_format == 1, ErrorCode::kUnsupportedFormat,
                  path + ": audio_format " + std::to_string(audio_format) +
                      " is not PCM");
            const std::uint16_t num_channels = read_u16(f + 2);
            check(num_channels == 1, ErrorCode::kUnsupportedFormat,
                  path + ": num_channels " + std::to_string(num_channels) +
                      " is not mono");
            sample_rate = static_cast<int>(read_u32(f + 4));
            const std::uint16_t bits_per_sample = read_u16(f + 14);
            check(bits_per_sample == 16, ErrorCode::kUnsupportedFormat,
                  path + ": bits_per_sample " +
                      std::to_string(bits_per_sample) + " is not 16");
            have_fmt = true;
        } else if (tag_is(hdr, "data")) {
            check(body + size <= bytes.size(), ErrorCode::kCorruptFile,
                  path + ": data chunk declares " + std::to_string(size) +
                      " bytes but only " + std::to_string(bytes.size() - body) +
                      " remain");
            data_at = body;
            data_len = size;
            have_data = true;
        }
        // Chunks are word-aligned: odd sizes carry one pad byte.
        pos = body + size + (size & 1);
    }

    check(have_fmt, ErrorCode::kCorruptFile, path + ": no fmt chunk");
    check(have_data, ErrorCode::kCorruptFile, path + ": no data chunk");
    check(data_len % 2 == 0, ErrorCode::kCorruptFile,
          path + ": data chunk holds an odd byte count for 16-bit samples");
    check(sample_rate > 0, ErrorCode::kCorruptFile,
          path + ": sample_rate is zero");

    WavData wav;
    wav.sample_rate = sample_rate;
    wav.samples.resize(data_len / 2);
    for (std::size_t i = 0; i < wav.samples.size(); ++i) {
        const unsigned char* p = bytes.data() + data_at + 2 * i;
        const std::int16_t v = static_cast<std::int16_t>(
            static_cast<std::uint16_t>(p[0]) |
            static_cast<std::uint16_t>(p[1]) << 8);
        wav.samples[i] = static_cast<real>(v / 32768.0);
    }
    return wav;
}

void write_wav(const std::string& path, const std::vector<real>& samples,
               int sample_rate) {
    check(sample_rate > 0, ErrorCode::kConfig, "sample_rate must be positive");
    const std::uint32_t data_len =
        static_cast<std::uint32_t>(samples.size() * 2);

    std::string out;
    out.reserve(44 + data_len);
    out += "RIFF";
    put_u32(out, 36 + data_len);
    out += "WAVE";
    out += "fmt ";
    put_u32(out, 16);
    put_u16(out, 1);  // PCM
    put_u16(out, 1);  // mono
    put_u32(out, static_cast<std::uint32_t>(sample_rate));
    put_u32(out, static_cast<std::uint32_t>(sample_rate) * 2);  // byte rate
    put_u16(out, 2);   // block align
    put_u16(out, 16);  // bits per sample
    out += "data";
    put_u32(out, data_len);
    for (real s : samples) {
        double v = static_cast<double>(s);
        if (v > 1.0) v = 1.0;
        if (v < -1.0) v = -1.0;
        const std::int16_t q =
            static_cast<std::int16_t>(std::lrint(v * 32767.0));
        put_u16(out, static_cast<std::uint16_t>(q));
    }

    std::ofstream f(path, std::ios::binary);
    check(static_cast<bool>(f), ErrorCode::kCorruptFile,
          "cannot write " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    check(static_cast<bool>(f), ErrorCode::kCorruptFile,
          "short write to " + path);
}

}  // namespace draft::audio
