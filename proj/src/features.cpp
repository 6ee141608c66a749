#include "draftlab/features.hpp"

#include "draftlab/error.hpp"
#include "draftlab/rng.hpp"

#include <algorithm>
#include <cmath>

namespace draft::features {

namespace {

constexpr double kPi = 3.14159265358979323846;

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
    return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

}  // namespace

int FeatureConfig::window_samples() const {
    return static_cast<int>(std::lround(window * sample_rate));
}

int FeatureConfig::hop_samples() const {
    return static_cast<int>(std::lround(hop * sample_rate));
}

int FeatureConfig::fft_size() const {
    int n = 1;
    while (n < window_samples()) n *= 2;
    return n;
}

void FeatureConfig::validate() const {
    check(sample_rate > 0, ErrorCode::kConfig, "sample_rate must be positive");
    check(hop > 0.0, ErrorCode::kConfig, "hop must be positive");
    check(window >= hop, ErrorCode::kConfig, "window must be >= hop");
    check(n_mels >= 1, ErrorCode::kConfig, "n_mels must be >= 1");
    check(mel_floor > 0.0, ErrorCode::kConfig, "mel_floor must be positive");
    check(window_samples() >= 2, ErrorCode::kConfig,
          "window shorter than two samples");
}

void fft_inplace(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    check(n > 0 && (n & (n - 1)) == 0, ErrorCode::kState,
          "fft size must be a power of two, got " + std::to_string(n));

    // Bit-reversal permutation.
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }

    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double angle = -2.0 * kPi / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(angle), std::sin(angle));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

std::vector<double> mel_edges(int n_mels, int sample_rate) {
    const double mel_max = hz_to_mel(sample_rate / 2.0);
    std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
    for (int i = 0; i < n_mels + 2; ++i)
        edges[static_cast<std::size_t>(i)] =
            mel_to_hz(mel_max * i / (n_mels + 1));
    return edges;
}

std::vector<std::vector<double>> mel_filterbank(int n_mels, int fft_size,
                                                int sample_rate) {
    const int n_bins = fft_size / 2 + 1;
    const auto edges = mel_edges(n_mels, sample_rate);
    std::vector<std::vector<double>> bank(
        static_cast<std::size_t>(n_mels),
        std::vector<double>(static_cast<std::size_t>(n_bins), 0.0));
    for (int m = 0; m < n_mels; ++m) {
        const double lo = edges[static_cast<std::size_t>(m)];
        const double mid = edges[static_cast<std::size_t>(m) + 1];
        const double hi = edges[static_cast<std::size_t>(m) + 2];
        for (int k = 0; k < n_bins; ++k) {
            const double f = static_cast<double>(k) * sample_rate / fft_size;
            double w = 0.0;
            if (f > lo && f < mid)
                w = (f - lo) / (mid - lo);
            else if (f >= mid && f < hi)
                w = (hi - f) / (hi - mid);
            bank[static_cast<std::size_t>(m)][static_cast<std::size_t>(k)] = w;
        }
    }
    return bank;
}

TensorPtr log_mel(const std::vector<real>& samples, const FeatureConfig& cfg) {
    cfg.validate();
    const int win = cfg.window_samples();
    const int hop = cfg.hop_samples();
    const int nfft = cfg.fft_size();
    const int n_bins = nfft / 2 + 1;
    const auto n = static_cast<long long>(samples.size());
    check(n >= win, ErrorCode::kSequenceTooShort,
          "signal holds " + std::to_string(n) + " samples, window needs " +
              std::to_string(win));
    const int frames = 1 + static_cast<int>((n - win) / hop);

    std::vector<double> hann(static_cast<std::size_t>(win));
    for (int i = 0; i < win; ++i)
        hann[static_cast<std::size_t>(i)] =
            0.5 - 0.5 * std::cos(2.0 * kPi * i / (win - 1));

    const auto bank = mel_filterbank(cfg.n_mels, nfft, cfg.sample_rate);

    auto out = make_tensor({frames, cfg.n_mels});
    std::vector<std::complex<double>> buf(static_cast<std::size_t>(nfft));
    std::vector<double> power(static_cast<std::size_t>(n_bins));
    for (int t = 0; t < frames; ++t) {
        const std::size_t start = static_cast<std::size_t>(t) *
                                  static_cast<std::size_t>(hop);
        for (int i = 0; i < win; ++i)
            buf[static_cast<std::size_t>(i)] = {
                static_cast<double>(samples[start + static_cast<std::size_t>(
                                                        i)]) *
                    hann[static_cast<std::size_t>(i)],
                0.0};
        for (int i = win; i < nfft; ++i) buf[static_cast<std::size_t>(i)] = 0;
        fft_inplace(buf);
        for (int k = 0; k < n_bins; ++k)
            power[static_cast<std::size_t>(k)] =
                std::norm(buf[static_cast<std::size_t>(k)]);
        for (int m = 0; m < cfg.n_mels; ++m) {
            double e = 0.0;
            const auto& row = bank[static_cast<std::size_t>(m)];
            for (int k = 0; k < n_bins; ++k)
                e += row[static_cast<std::size_t>(k)] *
                     power[static_cast<std::size_t>(k)];
            out->at(t, m) = static_cast<real>(std::log(cfg.mel_floor + e));
        }
    }
    return out;
}

TensorPtr spec_augment(const TensorPtr& features, int n_time_masks,
                       int max_time_width, int n_freq_masks,
                       int max_freq_width, std::uint64_t seed) {
    check(features && features->rank() == 2, ErrorCode::kRank,
          "spec_augment needs a rank-2 feature tensor");
    check(n_time_masks >= 0 && n_freq_masks >= 0, ErrorCode::kConfig,
          "mask counts must be >= 0");
    check(max_time_width >= 0 && max_freq_width >= 0, ErrorCode::kConfig,
          "mask widths must be >= 0");
    const int t_len = features->rows();
    const int f_len = features->cols();

    auto out = make_tensor(features->shape, features->data);
    if ((n_time_masks == 0 || max_time_width == 0) &&
        (n_freq_masks == 0 || max_freq_width == 0))
        return out;

    double mean = 0.0;
    for (real v : features->data) mean += static_cast<double>(v);
    mean /= static_cast<double>(features->data.size());
    const real fill = static_cast<real>(mean);

    Rng rng(seed);
    for (int i = 0; i < n_time_masks; ++i) {
        const int limit = std::min(max_time_width, t_len);
        const int width = static_cast<int>(
            rng.uniform_index(static_cast<std::uint64_t>(limit) + 1));
        const int start = static_cast<int>(rng.uniform_index(
            static_cast<std::uint64_t>(t_len - width) + 1));
        for (int t = start; t < start + width; ++t)
            for (int f = 0; f < f_len; ++f) out->at(t, f) = fill;
    }
    for (int i = 0; i < n_freq_masks; ++i) {
        const int limit = std::min(max_freq_width, f_len);
        const int width = static_cast<int>(
            rng.uniform_index(static_cast<std::uint64_t>(limit) + 1));
        const int start = static_cast<int>(rng.uniform_index(
            static_cast<std::uint64_t>(f_len - width) + 1));
        for (int f = start; f < start + width; ++f)
            for (int t = 0; t < t_len; ++t) out->at(t, f) = fill;
    }
    return out;
}

TensorPtr speed_perturb(const TensorPtr& features, double factor) {
    check(features && features->rank() == 2, ErrorCode::kRank,
          "speed_perturb needs a rank-2 feature tensor");
    check(factor > 0.0, ErrorCode::kConfig,
          "speed factor must be positive, got " + std::to_string(factor));
    const int t_in = features->rows();
    const int dim = features->cols();
    if (factor == 1.0) return make_tensor(features->shape, features->data);

    const int t_out = std::max(
        1, static_cast<int>(std::lround(static_cast<double>(t_in) / factor)));
    auto out = make_tensor({t_out, dim});
    for (int t = 0; t < t_out; ++t) {
        const double src =
            t_out == 1 ? 0.0
                       : static_cast<double>(t) * (t_in - 1) / (t_out - 1);
        const int lo = static_cast<int>(src);
        const int hi = std::min(lo + 1, t_in - 1);
        const double frac = src - lo;
        for (int d = 0; d < dim; ++d)
            out->at(t, d) = static_cast<real>(
                (1.0 - frac) * static_cast<double>(features->at(lo, d)) +
                frac * static_cast<double>(features->at(hi, d)));
    }
    return out;
}

}  // namespace draft::features
