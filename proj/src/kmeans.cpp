#include "draftlab/kmeans.hpp"

#include "draftlab/error.hpp"
#include "draftlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace draft::kmeans {

namespace {

double sq_dist(const real* a, const real* b, int dim) {
    double s = 0.0;
    for (int i = 0; i < dim; ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        s += d * d;
    }
    return s;
}

// Nearest centroid for every frame; strict less keeps ties at the lowest
// index. Frames are independent, so the loop parallelizes without changing
// any result.
void assign_rows(const TensorPtr& frames, const TensorPtr& centroids, int k,
                 std::vector<int>& labels, std::vector<double>* dist2) {
    const int n = frames->rows();
    const int dim = frames->cols();
    labels.assign(static_cast<std::size_t>(n), 0);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const real* row = frames->data.data() + static_cast<std::size_t>(i) * dim;
        int best = 0;
        double best_d = sq_dist(row, centroids->data.data(), dim);
        for (int c = 1; c < k; ++c) {
            const double d = sq_dist(
                row, centroids->data.data() + static_cast<std::size_t>(c) * dim,
                dim);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        labels[static_cast<std::size_t>(i)] = best;
        if (dist2) (*dist2)[static_cast<std::size_t>(i)] = best_d;
    }
}

}  // namespace

Codebook fit(const TensorPtr& frames, int k, int max_iterations,
             std::uint64_t seed) {
    check(frames && frames->rank() == 2, ErrorCode::kDimension,
          "k-means expects a [frames x dim] tensor");
    const int n = frames->rows();
    const int dim = frames->cols();
    check(k >= 2, ErrorCode::kConfig,
          "k must be >= 2, got " + std::to_string(k));
    check(max_iterations >= 1, ErrorCode::kConfig,
          "max_iterations must be >= 1, got " + std::to_string(max_iterations));
    check(n >= k, ErrorCode::kConfig,
          "k = " + std::to_string(k) + " exceeds the " + std::to_string(n) +
              " available frames");

    Rng rng(seed);
    auto centroids = make_tensor({k, dim});
    const auto copy_frame = [&](int frame, int slot) {
        std::copy_n(frames->data.data() + static_cast<std::size_t>(frame) * dim,
                    dim,
                    centroids->data.data() + static_cast<std::size_t>(slot) * dim);
    };

    // k-means++ seeding: first centroid uniform, each later one drawn with
    // probability proportional to the squared distance to the nearest chosen
    // centroid. All-duplicate corner cases fall back to a uniform draw.
    copy_frame(static_cast<int>(rng.uniform_index(static_cast<std::size_t>(n))),
               0);
    std::vector<double> d2(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i)
        d2[static_cast<std::size_t>(i)] =
            sq_dist(frames->data.data() + static_cast<std::size_t>(i) * dim,
                    centroids->data.data(), dim);
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (double v : d2) total += v;
        int pick;
        if (total <= 0.0) {
            pick = static_cast<int>(
                rng.uniform_index(static_cast<std::size_t>(n)));
        } else {
            const double r = rng.uniform() * total;
            double cum = 0.0;
            pick = n - 1;
            for (int i = 0; i < n; ++i) {
                cum += d2[static_cast<std::size_t>(i)];
                if (r < cum) {
                    pick = i;
                    break;
                }
            }
        }
        copy_frame(pick, c);
        const real* cen =
            centroids->data.data() + static_cast<std::size_t>(c) * dim;
        for (int i = 0; i < n; ++i) {
            const double d = sq_dist(
                frames->data.data() + static_cast<std::size_t>(i) * dim, cen,
                dim);
            d2[static_cast<std::size_t>(i)] =
                std::min(d2[static_cast<std::size_t>(i)], d);
        }
    }

    Codebook book;
    book.k = k;
    book.centroids = centroids;

    std::vector<int> labels;
    std::vector<double> dist(static_cast<std::size_t>(n), 0.0);
    assign_rows(frames, centroids, k, labels, &dist);
    double inertia = 0.0;
    for (double v : dist) inertia += v;

    std::vector<double> sums(static_cast<std::size_t>(k) * dim);
    std::vector<int> counts(static_cast<std::size_t>(k));
    std::vector<int> prev_labels;
    for (int it = 0; it < max_iterations; ++it) {
        // Means in double; a cluster that lost every frame keeps its centroid.
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (int i = 0; i < n; ++i) {
            const int c = labels[static_cast<std::size_t>(i)];
            ++counts[static_cast<std::size_t>(c)];
            const real* row =
                frames->data.data() + static_cast<std::size_t>(i) * dim;
            double* acc = sums.data() + static_cast<std::size_t>(c) * dim;
            for (int j = 0; j < dim; ++j) acc[j] += static_cast<double>(row[j]);
        }
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] == 0) continue;
            real* cen =
                centroids->data.data() + static_cast<std::size_t>(c) * dim;
            const double inv = 1.0 / counts[static_cast<std::size_t>(c)];
            const double* acc = sums.data() + static_cast<std::size_t>(c) * dim;
            for (int j = 0; j < dim; ++j)
                cen[j] = static_cast<real>(acc[j] * inv);
        }

        prev_labels = labels;
        assign_rows(frames, centroids, k, labels, &dist);
        double now = 0.0;
        for (double v : dist) now += v;
        // Lloyd rounds cannot raise the objective; allow only rounding jitter.
        check(now <= inertia + 1e-9 * std::max(1.0, inertia), ErrorCode::kState,
              "inertia increased at iteration " + std::to_string(it + 1));
        inertia = now;
        book.iterations = it + 1;
        if (labels == prev_labels) break;
    }
    book.inertia = inertia;
    return book;
}

std::vector<int> assign(const Codebook& book, const TensorPtr& frames) {
    check(book.k >= 1 && book.centroids, ErrorCode::kState,
          "codebook has no centroids");
    check(frames && frames->rank() == 2 &&
              frames->cols() == book.centroids->cols(),
          ErrorCode::kDimension,
          "frames must be [n x " + std::to_string(book.centroids->cols()) +
              "] to match the codebook");
    std::vector<int> labels;
    assign_rows(frames, book.centroids, book.k, labels, nullptr);
    return labels;
}

}  // namespace draft::kmeans
