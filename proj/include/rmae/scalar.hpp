#pragma once

// Element type of every tensor. The default build stores f32; defining
// RMAE_USE_F64 switches the whole library to f64 for tight gradient checks.
// The two builds live in distinct inline namespaces so both can be linked
// into one executable.

#ifdef RMAE_USE_F64
#define RMAE_ABI f64
#else
#define RMAE_ABI f32
#endif

namespace rmae::inline RMAE_ABI {

#ifdef RMAE_USE_F64
using Scalar = double;
#else
using Scalar = float;
#endif

}  // namespace rmae::inline RMAE_ABI
