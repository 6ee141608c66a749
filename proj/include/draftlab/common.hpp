#pragma once

#include <cstddef>
#include <cstdint>

namespace draft {

// Library-wide element type. The default build uses float; defining
// DRAFT_PRECISION_DOUBLE (the draft64 target) switches every tensor to
// double so gradient checks can run at 1e-6 tolerance.
#ifdef DRAFT_PRECISION_DOUBLE
using real = double;
#else
using real = float;
#endif

}  // namespace draft
