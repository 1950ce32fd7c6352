// SPDX-License-Identifier: MIT
//
// Central numeric tolerances for snapforge.
//
// Every comparison threshold used by the library, the verification oracles,
// and the test suite lives here.  Nothing else in the tree is allowed to
// hard-code a tolerance: if a kernel or a test needs a new one, it gets a
// named constant in this file so reviewers can see the full accuracy budget
// in one screen.

#pragma once

namespace snapforge::tol {

// --- angular basis -------------------------------------------------------

// |a|^2 + |b|^2 must equal 1 after the 3-sphere projection.
inline constexpr double kUnitNorm = 1e-14;

// Per-row unit-norm defect of the rotation matrices built by the recursion.
inline constexpr double kUnitarity = 1e-12;

// Column orthogonality of the coupling-coefficient table.
inline constexpr double kCgOrthogonality = 1e-12;

// Recursion vs. closed-form rotation matrices (small orders only).
inline constexpr double kWignerVsDirect = 1e-10;

// --- derivatives ---------------------------------------------------------

// Central-difference step for gradient checks, as a fraction of Rcut.
inline constexpr double kFdStepFraction = 1e-6;

// Analytic da/db vs. finite differences of the 3-sphere map.
inline constexpr double kMapGradFd = 1e-6;

// Analytic du vs. finite differences of fc(r) * u.
inline constexpr double kWignerGradFd = 1e-5;

// Analytic forces vs. central differences of the total energy.
inline constexpr double kForceFd = 1e-5;

// --- descriptor pipeline -------------------------------------------------

// Imaginary residue allowed on bispectrum components (they are real by
// construction; anything above this indicates an indexing defect).
inline constexpr double kBImagResidue = 1e-11;

// Baseline-Z pipeline vs. adjoint pipeline, relative max-norm.
inline constexpr double kCrossPipeline = 1e-10;

// Per-atom bispectrum invariance under rigid rotation.
inline constexpr double kRotationInvariance = 1e-9;

// Force invariance under rigid translation, relative to max |F|.
inline constexpr double kTranslationInvariance = 1e-10;

// Newton third-law residue of the force sum, relative to max |F|.
inline constexpr double kNewtonSum = 1e-10;

// Smoothness at the cutoff: |F| just inside r = Rcut, relative to the force
// magnitude at 0.9 * Rcut.
inline constexpr double kCutoffSmoothness = 1e-6;

// --- execution variants --------------------------------------------------

// Any two built-in variants, benchmark scheduling, relative max-norm.
inline constexpr double kVariantAgreement = 1e-8;

// Any two built-in variants under deterministic (serialized) scheduling.
inline constexpr double kDeterministicAgreement = 1e-12;

// Fused force kernel vs. the staged evaluation it replaces.
inline constexpr double kFusedVsStaged = 1e-12;

// Atomic read-modify-write accumulation vs. privatized buffers.
inline constexpr double kRmwVsPrivatized = 1e-8;

// --- comparison plumbing -------------------------------------------------

// Absolute floor used by relative max-norm comparisons so that quantities
// that are exactly (or nearly) zero do not blow up the relative error.
inline constexpr double kAbsFloor = 1e-14;

}  // namespace snapforge::tol
