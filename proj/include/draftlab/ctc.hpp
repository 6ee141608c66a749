#pragma once

#include "draftlab/common.hpp"

#include <vector>

// CTC in the log domain. The core works in double no matter how the library
// element type is configured, so the float build loses precision only at the
// boundary where the loss and gradient re-enter the graph.

namespace draft::ctc {

// Fewest frames that can emit `labels`: the label count plus one separating
// blank per adjacent repeat.
int min_frames(const std::vector<int>& labels);

// Negative log probability of `labels` (non-blank ids in [1, vocab)) under
// the per-frame log scores logp[t*vocab + v], with blank = 0. When grad_out
// is non-null it is resized to t*vocab and filled with d(loss)/d(logp),
// which is minus the state-occupancy posterior summed per symbol. Throws
// kInfeasibleAlignment when t < min_frames(labels).
double forward_backward(const double* logp, int t, int vocab,
                        const std::vector<int>& labels,
                        std::vector<double>* grad_out);

// Best-path decode: per-frame argmax (ties to the lowest id), collapse
// repeats, drop blanks.
std::vector<int> greedy_decode(const real* logp, int t, int vocab);

}  // namespace draft::ctc
