#pragma once

#include "draftlab/tensor.hpp"

#include <cstdint>
#include <vector>

namespace draft::kmeans {

// Frozen frame-clustering codebook that turns feature frames into
// pseudo-labels for the masked-prediction objective.
struct Codebook {
    int k = 0;
    TensorPtr centroids;   // [k, dim]
    int iterations = 0;    // Lloyd rounds actually run
    double inertia = 0.0;  // final sum of squared distances
};

// Seeded k-means++ initialization followed by Lloyd rounds, stopping early
// once assignments are stable. The inertia is checked to be non-increasing
// after every round. Same seed and frames give bit-identical centroids.
Codebook fit(const TensorPtr& frames, int k, int max_iterations,
             std::uint64_t seed);

// Nearest centroid per input row, ties broken toward the lowest index.
std::vector<int> assign(const Codebook& book, const TensorPtr& frames);

}  // namespace draft::kmeans
