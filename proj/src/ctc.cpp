#include "draftlab/ctc.hpp"

#include "draftlab/error.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace draft::ctc {

namespace {

constexpr double kLogZero = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
    if (a == kLogZero) return b;
    if (b == kLogZero) return a;
    if (a < b) std::swap(a, b);
    return a + std::log1p(std::exp(b - a));
}

}  // namespace

int min_frames(const std::vector<int>& labels) {
    int n = static_cast<int>(labels.size());
    for (std::size_t i = 1; i < labels.size(); ++i)
        if (labels[i] == labels[i - 1]) ++n;
    return n;
}

double forward_backward(const double* logp, int t, int vocab,
                        const std::vector<int>& labels,
                        std::vector<double>* grad_out) {
    check(t >= 1, ErrorCode::kDimension, "ctc needs at least one frame");
    check(vocab >= 2, ErrorCode::kDimension,
          "ctc needs a blank plus at least one symbol");
    for (int lab : labels)
        check(lab >= 1 && lab < vocab, ErrorCode::kDimension,
              "ctc label " + std::to_string(lab) + " outside [1, " +
                  std::to_string(vocab) + ")");
    check(t >= min_frames(labels), ErrorCode::kInfeasibleAlignment,
          "label sequence needs at least " +
              std::to_string(min_frames(labels)) + " frames, got " +
              std::to_string(t));

    // Extended state sequence: blank, l1, blank, l2, ..., blank.
    int len = static_cast<int>(labels.size());
    int states = 2 * len + 1;
    auto sym = [&](int s) { return (s % 2 == 0) ? 0 : labels[s / 2]; };
    auto score = [&](int frame, int s) {
        return logp[static_cast<std::size_t>(frame) * vocab + sym(s)];
    };
    // A skip s-2 -> s is legal only between different non-blank symbols.
    auto can_skip = [&](int s) {
        return s >= 2 && sym(s) != 0 && sym(s) != sym(s - 2);
    };

    std::vector<double> alpha(static_cast<std::size_t>(t) * states, kLogZero);
    alpha[0] = score(0, 0);
    if (states > 1) alpha[1] = score(0, 1);
    for (int frame = 1; frame < t; ++frame) {
        const double* prev = &alpha[static_cast<std::size_t>(frame - 1) * states];
        double* cur = &alpha[static_cast<std::size_t>(frame) * states];
        for (int s = 0; s < states; ++s) {
            double acc = prev[s];
            if (s >= 1) acc = log_add(acc, prev[s - 1]);
            if (can_skip(s)) acc = log_add(acc, prev[s - 2]);
            if (acc != kLogZero) cur[s] = acc + score(frame, s);
        }
    }

    double log_prob = alpha[static_cast<std::size_t>(t - 1) * states + states - 1];
    if (states > 1)
        log_prob = log_add(
            log_prob,
            alpha[static_cast<std::size_t>(t - 1) * states + states - 2]);
    check(log_prob != kLogZero, ErrorCode::kInfeasibleAlignment,
          "no feasible ctc alignment");
    double loss = -log_prob;

    if (!grad_out) return loss;

    // beta[t][s] excludes the emission at t, so alpha + beta is the log mass
    // of all paths that occupy state s at frame t.
    std::vector<double> beta(static_cast<std::size_t>(t) * states, kLogZero);
    beta[static_cast<std::size_t>(t - 1) * states + states - 1] = 0.0;
    if (states > 1)
        beta[static_cast<std::size_t>(t - 1) * states + states - 2] = 0.0;
    for (int frame = t - 2; frame >= 0; --frame) {
        const double* next = &beta[static_cast<std::size_t>(frame + 1) * states];
        double* cur = &beta[static_cast<std::size_t>(frame) * states];
        for (int s = 0; s < states; ++s) {
            double acc = (next[s] == kLogZero)
                             ? kLogZero
                             : next[s] + score(frame + 1, s);
            if (s + 1 < states && next[s + 1] != kLogZero)
                acc = log_add(acc, next[s + 1] + score(frame + 1, s + 1));
            if (s + 2 < states && can_skip(s + 2) &&
                next[s + 2] != kLogZero)
                acc = log_add(acc, next[s + 2] + score(frame + 1, s + 2));
            cur[s] = acc;
        }
    }

    grad_out->assign(static_cast<std::size_t>(t) * vocab, 0.0);
    for (int frame = 0; frame < t; ++frame) {
        for (int s = 0; s < states; ++s) {
            double a = alpha[static_cast<std::size_t>(frame) * states + s];
            double b = beta[static_cast<std::size_t>(frame) * states + s];
            if (a == kLogZero || b == kLogZero) continue;
            (*grad_out)[static_cast<std::size_t>(frame) * vocab + sym(s)] -=
                std::exp(a + b - log_prob);
        }
    }
    return loss;
}

std::vector<int> greedy_decode(const real* logp, int t, int vocab) {
    check(t >= 1 && vocab >= 2, ErrorCode::kDimension,
          "greedy decode needs frames and a vocabulary");
    std::vector<int> out;
    int previous = 0;
    for (int frame = 0; frame < t; ++frame) {
        const real* row = logp + static_cast<std::size_t>(frame) * vocab;
        int best = 0;
        for (int v = 1; v < vocab; ++v)
            if (row[v] > row[best]) best = v;  // ties keep the lower id
        if (best != 0 && best != previous) out.push_back(best);
        previous = best;
    }
    return out;
}

}  // namespace draft::ctc
