#pragma once

#include <cstdint>

#include "priornet/objectives.hpp"

// Canned finite-difference checks shared by the CLI and the test suites.
// All run in double precision.
namespace priornet {

inline constexpr double kGradcheckTolerance = 1e-4;
// All checks use the five-point stencil so that roundoff, not truncation,
// bounds the error on near-zero gradient entries. The network is only
// piecewise smooth (ReLU, max-pool), so its step shrinks whenever an
// activation pattern changes inside the stencil.
inline constexpr double kSmoothStep = 1e-3;
inline constexpr double kKinkedStep = 1e-4;

// Scalar sum(r * csam_apply(f1, csam_weights(f1, f2))) over random 4^3 x 8
// maps, differentiated with respect to f1 and f2.
GradcheckResult csam_gradcheck(std::uint64_t seed);

// Soft Dice loss of a random two-item batch (4^3, K = 3) with respect to
// the logits.
GradcheckResult dice_gradcheck(std::uint64_t seed);

// Full Prior-Net forward plus soft Dice on an 8^3 target, with respect to
// the target intensities.
GradcheckResult network_gradcheck(std::uint64_t seed);

struct GradcheckSuite {
  GradcheckResult csam, dice, network;

  bool passed(double tolerance = kGradcheckTolerance) const {
    return csam.max_relative_error < tolerance && dice.max_relative_error < tolerance &&
           network.max_relative_error < tolerance;
  }
};

GradcheckSuite run_gradchecks(std::uint64_t seed);

}  // namespace priornet
