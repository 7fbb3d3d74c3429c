#pragma once

namespace decreg::defaults {

// Single table for every tolerance and default threshold in the library.
// Operations take these as defaulted parameters or config fields, so any
// of them can be overridden per call.

// --- geometry ---
inline constexpr double kRotationTolerance = 1e-9;  // ||R^T R - I||_inf and |det R - 1|
inline constexpr double kDegeneracyRatio = 1e-12;   // sigma_2 < ratio * sigma_1 => degenerate
inline constexpr double kVoxelSize = 0.05;          // meters

// --- correspondences / hypotheses ---
inline constexpr double kTauSc = 0.10;    // first-order compatibility gate, meters
inline constexpr double kTauIn = 0.10;    // inlier residual gate, meters
inline constexpr int kHypothesisCount = 100;
inline constexpr double kDedupReDeg = 1.0;   // duplicate suppression: rotation gap
inline constexpr double kDedupTe = 0.03;     // duplicate suppression: translation gap
inline constexpr int kAttemptBudgetFactor = 20;  // sampling attempts per requested hypothesis

// --- metrics ---
inline constexpr double kTauOv = 0.10;    // overlap ratio gate, meters
inline constexpr double kTauC = 0.30;     // chamfer truncation, meters
inline constexpr double kSvcGrid = 0.05;  // free-space grid, meters
inline constexpr double kSvcMaxViolation = 0.05;
inline constexpr double kSuccessMaxReDeg = 15.0;
inline constexpr double kSuccessMaxTe = 0.30;

// --- scoring ---
inline constexpr int kTagMixingNeighbors = 10;
inline constexpr double kScoreThreshold = 0.6;   // truncation threshold in the scan
inline constexpr double kDecisionThreshold = 0.5;
inline constexpr double kScaleIndoor = 1.0;
inline constexpr double kScaleOutdoor = 0.4;

// --- dataset construction ---
inline constexpr double kSplitOverlap = 0.30;  // large- vs small-overlap boundary
inline constexpr double kSplitReDeg = 45.0;    // large- vs small-error boundary
inline constexpr int kPerCategoryCap = 2;
inline constexpr double kMinPairOverlap = 0.10;  // admission rule for training pairs
inline constexpr double kTrainFraction = 0.8;

// --- training ---
inline constexpr double kLearningRate = 0.5;
inline constexpr double kL2Penalty = 1e-4;
inline constexpr int kEpochs = 500;

}  // namespace decreg::defaults
