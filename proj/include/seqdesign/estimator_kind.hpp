#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace seqdesign {

enum class EstimatorKind {
  NoControl,            // pooled y ~ (1, z)
  DirectControl,        // pooled y ~ (1, z, x)
  PropensityScore,      // per-period logistic e(x), then pooled y ~ (1, z, e)
  FixedEffects,         // pooled y ~ (1, z, 1{t = t1})
  NoiseControl,         // pooled y ~ (1, z, u) with fresh standard-normal u
  ColliderConditioned,  // t2 rows: y2 ~ (1, z2, y1) — deliberate trap, see docs
  DiffInMeansT1,        // period-1 group-mean difference (Welch se)
  DiffInMeansT2,        // period-2 group-mean difference (Welch se)
  NaiveT2,              // t2 rows: y2 ~ (1, z2, x2)
  CarryoverControlT2,   // t2 rows: y2 ~ (1, z2, z1, x2)
};

inline constexpr const char* to_token(EstimatorKind k) noexcept {
  switch (k) {
    case EstimatorKind::NoControl: return "no_control";
    case EstimatorKind::DirectControl: return "direct_control";
    case EstimatorKind::PropensityScore: return "propensity_score";
    case EstimatorKind::FixedEffects: return "fixed_effects";
    case EstimatorKind::NoiseControl: return "noise_control";
    case EstimatorKind::ColliderConditioned: return "collider";
    case EstimatorKind::DiffInMeansT1: return "diff_means_t1";
    case EstimatorKind::DiffInMeansT2: return "diff_means_t2";
    case EstimatorKind::NaiveT2: return "naive_t2";
    case EstimatorKind::CarryoverControlT2: return "carryover_control_t2";
  }
  return "unknown";
}

inline std::optional<EstimatorKind> estimator_from_token(std::string_view s) noexcept {
  for (EstimatorKind k :
       {EstimatorKind::NoControl, EstimatorKind::DirectControl,
        EstimatorKind::PropensityScore, EstimatorKind::FixedEffects,
        EstimatorKind::NoiseControl, EstimatorKind::ColliderConditioned,
        EstimatorKind::DiffInMeansT1, EstimatorKind::DiffInMeansT2,
        EstimatorKind::NaiveT2, EstimatorKind::CarryoverControlT2})
    if (s == to_token(k)) return k;
  return std::nullopt;
}

inline const std::array<EstimatorKind, 10>& all_estimators() noexcept {
  static const std::array<EstimatorKind, 10> kAll = {
      EstimatorKind::NoControl,       EstimatorKind::DirectControl,
      EstimatorKind::PropensityScore, EstimatorKind::FixedEffects,
      EstimatorKind::NoiseControl,    EstimatorKind::ColliderConditioned,
      EstimatorKind::DiffInMeansT1,   EstimatorKind::DiffInMeansT2,
      EstimatorKind::NaiveT2,         EstimatorKind::CarryoverControlT2};
  return kAll;
}

} // namespace seqdesign
