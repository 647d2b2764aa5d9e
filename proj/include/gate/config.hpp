#pragma once

// Scalar precision of the whole library. The default build is single
// precision; defining GATE_DOUBLE=1 builds the 64-bit variant used by the
// gradient checks. Each variant lives in its own inline namespace so both can
// be linked into one binary.

#if defined(GATE_DOUBLE) && GATE_DOUBLE
#define GATE_NAMESPACE_BEGIN \
  namespace gate {           \
  inline namespace f64 {
#else
#define GATE_NAMESPACE_BEGIN \
  namespace gate {           \
  inline namespace f32 {
#endif
#define GATE_NAMESPACE_END \
  }                        \
  }

GATE_NAMESPACE_BEGIN

#if defined(GATE_DOUBLE) && GATE_DOUBLE
using Real = double;
#else
using Real = float;
#endif

inline constexpr bool kDoublePrecision = sizeof(Real) == 8;

GATE_NAMESPACE_END
