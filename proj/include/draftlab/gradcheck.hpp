#pragma once

#include "draftlab/param_store.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

namespace draft {

struct FdReport {
    std::string param;
    std::string status;  // "checked", "frozen"
    double max_rel_error = 0.0;
    bool pass = true;
};

// Default central-difference step: scaled to the element magnitude, with the
// base chosen for the build's element type (h ~ sqrt of the precision's
// round-off keeps the truncation and cancellation errors balanced).
inline double fd_step(double x) {
#ifdef DRAFT_PRECISION_DOUBLE
    const double base = 1e-6;
#else
    const double base = 1e-3;
#endif
    return base * std::max(1.0, std::abs(x));
}

// Compares autodiff gradients of f (a scalar loss re-evaluated per probe)
// against central finite differences on the named parameter. Frozen
// parameters are reported as skipped rather than failing, matching the
// trainer's contract that they receive no gradient at all. max_coords
// bounds the probing work on large tensors; coordinates are taken evenly
// spaced across the flat buffer.
inline FdReport finite_difference_check(
    ParamStore& store, const std::string& param,
    const std::function<TensorPtr()>& f, double tol, int max_coords = 64) {
    FdReport report;
    report.param = param;
    const ParamEntry& entry = store.entry(param);
    if (!entry.trainable) {
        report.status = "frozen";
        return report;
    }
    report.status = "checked";

    store.zero_grads();
    TensorPtr loss = f();
    backward(loss);
    std::vector<real> analytic = entry.tensor->grad;
    if (analytic.empty()) analytic.assign(entry.tensor->data.size(), real(0));

    std::int64_t n = entry.tensor->numel();
    std::int64_t probes = std::min<std::int64_t>(n, max_coords);
    for (std::int64_t p = 0; p < probes; ++p) {
        std::int64_t i = (probes == n) ? p : p * n / probes;
        real saved = entry.tensor->data[i];
        double h = fd_step(saved);
        entry.tensor->data[i] = static_cast<real>(saved + h);
        double plus = f()->scalar();
        entry.tensor->data[i] = static_cast<real>(saved - h);
        double minus = f()->scalar();
        entry.tensor->data[i] = saved;
        double fd = (plus - minus) / (2.0 * h);
        double ad = static_cast<double>(analytic[i]);
        double rel = std::abs(fd - ad) /
                     std::max({1.0, std::abs(fd), std::abs(ad)});
        report.max_rel_error = std::max(report.max_rel_error, rel);
    }
    report.pass = report.max_rel_error <= tol;
    return report;
}

}  // namespace draft
