#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "seqdesign/detail/format.hpp"
#include "seqdesign/dgp.hpp"
#include "seqdesign/estimators.hpp"
#include "seqdesign/model.hpp"
#include "seqdesign/stats.hpp"

// Practical design checks that run on observed data alone: Fisher's exact
// test on period-1 data, and the two-period effect-gap heuristic. A washout
// preview rescales a DGP's direct carryover for what-if comparisons.
//
// Caveat that belongs next to any use of the gap heuristic: agreement between
// the period-1 and period-2 estimates is neither necessary nor sufficient for
// unbiasedness — offsetting biases can hide in a small gap, and a large gap
// can reflect benign between-period differences rather than carryover.

namespace seqdesign {

struct SplitRule {
  enum class Kind { Median, FixedCut };
  Kind kind = Kind::Median;
  double cut = 0.0;  // read only by FixedCut
};

struct FisherT1Result {
  double p = 1.0;
  // counts[z][h]: units with z_t1 = z and dichotomized outcome h (1 = high)
  std::array<std::array<long long, 2>, 2> counts{};
  std::string dichotomizer;
};

// Fisher's exact test of z_t1 against dichotomized y_t1, period-1 data only
// (exited units still contribute — they have period-1 outcomes). Median rule:
// strictly-above-median counts as high, ties go low; the rule text is
// recorded in the result so the analysis is auditable.
inline FisherT1Result fisher_t1(const Panel& panel, SplitRule split = {}) {
  validate_panel(panel);
  long long n0 = 0, n1 = 0;
  for (const PanelRow& r : panel.rows) (r.z_t1 == 1 ? n1 : n0)++;
  if (n0 < 2 || n1 < 2)
    throw stats::DegenerateOutcome("fisher_t1: need >= 2 units per treatment group at t1");

  double cut = split.cut;
  std::string rule;
  if (split.kind == SplitRule::Kind::Median) {
    std::vector<double> ys;
    ys.reserve(panel.rows.size());
    for (const PanelRow& r : panel.rows) ys.push_back(r.y_t1);
    std::sort(ys.begin(), ys.end());
    if (ys.front() == ys.back())
      throw stats::DegenerateOutcome("fisher_t1: all period-1 outcomes identical");
    const std::size_t n = ys.size();
    cut = n % 2 == 1 ? ys[n / 2] : 0.5 * (ys[n / 2 - 1] + ys[n / 2]);
    rule = "median_split(cut=" + detail::format_double(cut) + ",ties_low)";
  } else {
    rule = "fixed_cut(" + detail::format_double(cut) + ",ties_low)";
  }

  FisherT1Result out;
  out.dichotomizer = rule;
  for (const PanelRow& r : panel.rows) {
    const int high = r.y_t1 > cut ? 1 : 0;
    ++out.counts[static_cast<std::size_t>(r.z_t1)][static_cast<std::size_t>(high)];
  }
  out.p = stats::fisher_exact_2x2(out.counts[1][1], out.counts[1][0],
                                  out.counts[0][1], out.counts[0][0])
              .p_two_sided;
  return out;
}

struct DiagnosticReport {
  double fisher_p = 1.0;
  std::string dichotomizer;
  double tau_t1_hat = 0.0;
  double tau_t2_hat = 0.0;
  double gap = 0.0;     // tau_t1_hat - tau_t2_hat
  double gap_se = 0.0;  // sqrt(se1^2 + se2^2), periods treated as independent
  double gap_z = 0.0;
  bool warn = false;
  double threshold = 1.96;
};

// The two-period gap heuristic plus the Fisher check, bundled into one
// report. The gap se treats the periods as independent samples; under a
// counterbalanced design the same units appear in both periods, so this is an
// approximation (a paired version is deliberately not offered). See the
// header caveat: passing this check proves nothing by itself.
inline DiagnosticReport heuristic_gap(const Panel& panel, double threshold = 1.96,
                                      SplitRule split = {}) {
  validate_panel(panel);
  rng::Stream unused(0);  // diff-in-means estimators never touch the stream
  const EstimateResult t1 = estimate(panel, EstimatorKind::DiffInMeansT1, unused);
  const EstimateResult t2 = estimate(panel, EstimatorKind::DiffInMeansT2, unused);

  DiagnosticReport rep;
  rep.threshold = threshold;
  rep.tau_t1_hat = t1.tau_hat;
  rep.tau_t2_hat = t2.tau_hat;
  rep.gap = t1.tau_hat - t2.tau_hat;
  rep.gap_se = std::sqrt(t1.se * t1.se + t2.se * t2.se);
  if (rep.gap_se > 0.0)
    rep.gap_z = rep.gap / rep.gap_se;
  else
    rep.gap_z = rep.gap == 0.0 ? 0.0 : std::copysign(INFINITY, rep.gap);
  rep.warn = std::abs(rep.gap_z) > threshold;

  const FisherT1Result fisher = fisher_t1(panel, split);
  rep.fisher_p = fisher.p;
  rep.dichotomizer = fisher.dichotomizer;
  return rep;
}

// A washout period is modeled as multiplicative decay of the DIRECT carryover
// magnitude only: gamma for the interaction/compounding kinds, C for the
// constant kind. Covariate-mediated drift is deliberately untouched — time
// off treatment does not undo treatment-caused covariate changes. Note the
// config coupling: gamma also parameterizes TreatmentShift drift, so for the
// unusual pairing of a direct carryover kind WITH TreatmentShift drift,
// scaling gamma necessarily rescales that drift as well.
inline DgpConfig washout_preview(const DgpConfig& cfg, double decay) {
  if (!(decay >= 0.0 && decay <= 1.0))
    throw std::invalid_argument("washout_preview: decay must be in [0, 1]");
  DgpConfig out = cfg;
  switch (cfg.carryover.model) {
    case CarryoverModel::AdditiveInteraction:
    case CarryoverModel::Compounding:
      out.gamma = cfg.gamma * (1.0 - decay);
      break;
    case CarryoverModel::ConstantSymmetric:
      out.carryover.c = cfg.carryover.c * (1.0 - decay);
      break;
    case CarryoverModel::None:
    case CarryoverModel::CovariateMediated:
      break;  // nothing direct to decay
  }
  return out;
}

} // namespace seqdesign
