#pragma once

#include "draftlab/common.hpp"
#include "draftlab/tensor.hpp"

#include <complex>
#include <cstdint>
#include <vector>

namespace draft::features {

struct FeatureConfig {
    int sample_rate = 16000;
    double window = 0.025;  // seconds
    double hop = 0.010;     // seconds
    int n_mels = 80;
    double mel_floor = 1e-10;

    int window_samples() const;
    int hop_samples() const;
    int fft_size() const;  // smallest power of two holding the window
    void validate() const;
};

// In-place iterative radix-2 transform; size must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& a);

// Triangular filterbank on the HTK mel scale, evenly spaced between 0 Hz and
// Nyquist. Row m holds the weight of each magnitude-spectrum bin
// (fft_size/2 + 1 of them) in band m.
std::vector<std::vector<double>> mel_filterbank(int n_mels, int fft_size,
                                                int sample_rate);

// Band edges in Hz, n_mels + 2 values; edge m+1 is band m's peak frequency.
std::vector<double> mel_edges(int n_mels, int sample_rate);

// Frames the signal (Hann window), takes the power spectrum, applies the mel
// filterbank, and returns log(mel_floor + energy) per band. T = 1 +
// floor((N - window) / hop); shorter input raises a sequence error.
TensorPtr log_mel(const std::vector<real>& samples, const FeatureConfig& cfg);

// Replaces up to n_time_masks row spans and n_freq_masks column spans with
// the per-utterance mean; widths are drawn uniformly in [0, max] and clamped
// to the axis, so oversized limits never error. All unmasked cells are
// bit-identical to the input.
TensorPtr spec_augment(const TensorPtr& features, int n_time_masks,
                       int max_time_width, int n_freq_masks,
                       int max_freq_width, std::uint64_t seed);

// Linear interpolation along the frame axis onto round(T / factor) frames,
// keeping the first and last frames fixed. Factor 1 returns a bit-identical
// copy; factor <= 0 is a configuration error.
TensorPtr speed_perturb(const TensorPtr& features, double factor);

}  // namespace draft::features
