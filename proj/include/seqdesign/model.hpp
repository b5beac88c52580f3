#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "seqdesign/rng.hpp"

// Potential-outcomes data model for two-period, two-arm sequential designs:
// per-unit counterfactual tables, the assignment mechanisms, the observation
// identity mapping counterfactuals to data, carryover extraction, oracle
// estimands, and ground-truth assumption checks.

namespace seqdesign {

enum class DesignKind {
  BetweenSubjects,          // one-period reference design (single exposure)
  Cwsd,                     // counterbalanced: z_t2 = 1 - z_t1
  PrePost,                  // everyone control at t1, randomized at t2
  SequentialRandomization,  // independent Bernoulli(0.5) in both periods
  SelectiveSeqRand,         // treated-at-t1 units exit before t2
};

inline constexpr const char* to_token(DesignKind d) noexcept {
  switch (d) {
    case DesignKind::BetweenSubjects: return "between_subjects";
    case DesignKind::Cwsd: return "cwsd";
    case DesignKind::PrePost: return "pre_post";
    case DesignKind::SequentialRandomization: return "seq_rand";
    case DesignKind::SelectiveSeqRand: return "selective";
  }
  return "unknown";
}

inline std::optional<DesignKind> design_from_token(std::string_view s) noexcept {
  if (s == "between_subjects") return DesignKind::BetweenSubjects;
  if (s == "cwsd") return DesignKind::Cwsd;
  if (s == "pre_post") return DesignKind::PrePost;
  if (s == "seq_rand") return DesignKind::SequentialRandomization;
  if (s == "selective") return DesignKind::SelectiveSeqRand;
  return std::nullopt;
}

inline const std::array<DesignKind, 5>& all_designs() noexcept {
  static const std::array<DesignKind, 5> kAll = {
      DesignKind::BetweenSubjects, DesignKind::Cwsd, DesignKind::PrePost,
      DesignKind::SequentialRandomization, DesignKind::SelectiveSeqRand};
  return kAll;
}

// Complete per-unit ground truth: both period-1 arms, all four period-2
// (z1, z2) arms, and the two no-prior-exposure period-2 arms (what the unit
// would show if first recruited at t2 — never observed in a two-period run).
// Immutable by convention after generation; nothing downstream may write it.
struct PotentialOutcomeTable {
  double y_t1_0 = 0.0;
  double y_t1_1 = 0.0;
  std::array<double, 4> y_t2_arm{};  // indexed by arm_index(z1, z2)
  double y_t2_noprior_0 = 0.0;
  double y_t2_noprior_1 = 0.0;

  static constexpr int arm_index(int z1, int z2) noexcept { return 2 * z1 + z2; }

  double y_t1(int z) const noexcept { return z ? y_t1_1 : y_t1_0; }
  double y_t2(int z1, int z2) const noexcept { return y_t2_arm[arm_index(z1, z2)]; }
  double y_t2_noprior(int z) const noexcept {
    return z ? y_t2_noprior_1 : y_t2_noprior_0;
  }

  bool all_finite() const noexcept {
    for (double v : {y_t1_0, y_t1_1, y_t2_arm[0], y_t2_arm[1], y_t2_arm[2],
                     y_t2_arm[3], y_t2_noprior_0, y_t2_noprior_1})
      if (!std::isfinite(v)) return false;
    return true;
  }
};

struct Assignment {
  int z_t1 = 0;
  std::optional<int> z_t2;  // absent iff exited
  bool exited = false;
};

// Draw order is fixed (at most two Bernoulli(0.5) per unit, z_t1 first) so
// assignment sequences are reproducible from the stream alone.
inline std::vector<Assignment> assign(DesignKind design, int n, rng::Stream& rs) {
  if (n < 1) throw std::invalid_argument("assign: n must be >= 1");
  std::vector<Assignment> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Assignment a;
    switch (design) {
      case DesignKind::BetweenSubjects:
        a.z_t1 = rng::bernoulli(rs, 0.5);
        a.z_t2 = a.z_t1;  // single-exposure semantics
        break;
      case DesignKind::Cwsd:
        a.z_t1 = rng::bernoulli(rs, 0.5);
        a.z_t2 = 1 - a.z_t1;
        break;
      case DesignKind::PrePost:
        a.z_t1 = 0;
        a.z_t2 = rng::bernoulli(rs, 0.5);
        break;
      case DesignKind::SequentialRandomization:
        a.z_t1 = rng::bernoulli(rs, 0.5);
        a.z_t2 = rng::bernoulli(rs, 0.5);
        break;
      case DesignKind::SelectiveSeqRand:
        a.z_t1 = rng::bernoulli(rs, 0.5);
        if (a.z_t1 == 1)
          a.exited = true;  // treated units leave before t2
        else
          a.z_t2 = rng::bernoulli(rs, 0.5);
        break;
    }
    out.push_back(a);
  }
  return out;
}

struct Observation {
  double y_t1 = 0.0;
  std::optional<double> y_t2;
};

// The observation identity: data are the counterfactual arms selected by the
// realized assignment, nothing more.
inline Observation observe(const PotentialOutcomeTable& po, const Assignment& a) {
  Observation obs{po.y_t1(a.z_t1), std::nullopt};
  if (!a.exited) {
    if (!a.z_t2.has_value())
      throw std::invalid_argument("observe: non-exited assignment lacks z_t2");
    obs.y_t2 = po.y_t2(a.z_t1, *a.z_t2);
  }
  return obs;
}

// Unit-level carryover of the (z1 -> z2) sequence: the gap between the arm
// actually reachable in period 2 and the no-prior-exposure counterfactual.
inline double carryover(const PotentialOutcomeTable& po, int z1, int z2) noexcept {
  return po.y_t2(z1, z2) - po.y_t2_noprior(z2);
}

struct PanelRow {
  int unit_id = 0;
  double x_t1 = 0.0;
  double x_t2 = 0.0;
  int z_t1 = 0;
  std::optional<int> z_t2;
  double y_t1 = 0.0;
  std::optional<double> y_t2;
  bool exited = false;
};

struct PanelMeta {
  DesignKind design = DesignKind::SequentialRandomization;
  std::uint64_t seed = 0;
  std::string dgp_fingerprint;
};

struct Panel {
  std::vector<PanelRow> rows;
  PanelMeta meta;
};

// Structural checks: dense ids, y_t2 absent iff exited, and the z pattern the
// design promises. Throws std::invalid_argument naming the first bad row.
inline void validate_panel(const Panel& panel) {
  const auto bad = [](int unit, const char* what) {
    throw std::invalid_argument("panel row " + std::to_string(unit) + ": " + what);
  };
  for (std::size_t i = 0; i < panel.rows.size(); ++i) {
    const PanelRow& r = panel.rows[i];
    if (r.unit_id != static_cast<int>(i)) bad(static_cast<int>(i), "unit_id not dense from 0");
    if (r.z_t1 != 0 && r.z_t1 != 1) bad(r.unit_id, "z_t1 not binary");
    if (r.z_t2 && *r.z_t2 != 0 && *r.z_t2 != 1) bad(r.unit_id, "z_t2 not binary");
    if (r.exited != !r.y_t2.has_value()) bad(r.unit_id, "y_t2 must be absent iff exited");
    if (r.exited != !r.z_t2.has_value() && panel.meta.design == DesignKind::SelectiveSeqRand)
      bad(r.unit_id, "z_t2 must be absent iff exited");
    switch (panel.meta.design) {
      case DesignKind::BetweenSubjects:
        if (r.exited || !r.z_t2 || *r.z_t2 != r.z_t1) bad(r.unit_id, "between_subjects requires z_t2 == z_t1");
        break;
      case DesignKind::Cwsd:
        if (r.exited || !r.z_t2 || *r.z_t2 != 1 - r.z_t1) bad(r.unit_id, "cwsd requires z_t2 == 1 - z_t1");
        break;
      case DesignKind::PrePost:
        if (r.exited || !r.z_t2 || r.z_t1 != 0) bad(r.unit_id, "pre_post requires z_t1 == 0 and z_t2 present");
        break;
      case DesignKind::SequentialRandomization:
        if (r.exited || !r.z_t2) bad(r.unit_id, "seq_rand requires z_t2 present");
        break;
      case DesignKind::SelectiveSeqRand:
        if (r.exited != (r.z_t1 == 1)) bad(r.unit_id, "selective requires exited exactly when z_t1 == 1");
        break;
    }
  }
}

struct Estimands {
  double tau = 0.0;            // period-1 ATE
  double tau_t1 = 0.0;         // identical to tau by definition
  double tau_t2_design = 0.0;  // E[y_t2(0,1) - y_t2(1,0)]
  double tau_sequence = 0.0;   // alias of tau_t2_design
  double tau_prepost = 0.0;    // E[y_t2(0,1) - y_t2(0,0)]
};

inline Estimands oracle_estimands(const std::vector<PotentialOutcomeTable>& pos) {
  if (pos.empty()) throw std::invalid_argument("oracle_estimands: empty input");
  Estimands e;
  for (const PotentialOutcomeTable& po : pos) {
    e.tau += po.y_t1_1 - po.y_t1_0;
    e.tau_t2_design += po.y_t2(0, 1) - po.y_t2(1, 0);
    e.tau_prepost += po.y_t2(0, 1) - po.y_t2(0, 0);
  }
  const double inv_n = 1.0 / static_cast<double>(pos.size());
  e.tau *= inv_n;
  e.tau_t2_design *= inv_n;
  e.tau_prepost *= inv_n;
  e.tau_t1 = e.tau;
  e.tau_sequence = e.tau_t2_design;
  return e;
}

struct AssumptionReport {
  double mean_carryover_01 = 0.0;
  double mean_carryover_10 = 0.0;
  bool simple_carryover_holds = false;
  double simple_carryover_gap = 0.0;
  bool controlled_carryover_holds = false;
  double controlled_max_abs_violation = 0.0;
  bool parallel_trends_holds = false;
  double parallel_max_deviation = 0.0;
  double trend_constant_c = 0.0;
  double tol = 0.0;
};

// Ground-truth assumption oracle over full counterfactual tables. Because
// counterfactual noise is shared within a unit, the structural checks are
// exact; the default tol is therefore tight (see check_assumptions default).
inline AssumptionReport check_assumptions(const std::vector<PotentialOutcomeTable>& pos,
                                          double tol = 1e-9) {
  if (pos.empty()) throw std::invalid_argument("check_assumptions: empty input");
  if (!(tol > 0.0)) throw std::invalid_argument("check_assumptions: tol must be > 0");

  AssumptionReport rep;
  rep.tol = tol;
  const double inv_n = 1.0 / static_cast<double>(pos.size());

  for (const PotentialOutcomeTable& po : pos) {
    rep.mean_carryover_01 += carryover(po, 0, 1);
    rep.mean_carryover_10 += carryover(po, 1, 0);
    for (int z1 : {0, 1})
      for (int z2 : {0, 1})
        rep.controlled_max_abs_violation =
            std::max(rep.controlled_max_abs_violation, std::abs(carryover(po, z1, z2)));
  }
  rep.mean_carryover_01 *= inv_n;
  rep.mean_carryover_10 *= inv_n;
  rep.simple_carryover_gap = std::abs(rep.mean_carryover_01 - rep.mean_carryover_10);

  // Parallel trends: y_t2_noprior(z) - y_t1(z) should be one shared constant.
  double c_hat = 0.0;
  for (const PotentialOutcomeTable& po : pos)
    for (int z : {0, 1}) c_hat += po.y_t2_noprior(z) - po.y_t1(z);
  c_hat *= inv_n * 0.5;
  rep.trend_constant_c = c_hat;
  for (const PotentialOutcomeTable& po : pos)
    for (int z : {0, 1})
      rep.parallel_max_deviation =
          std::max(rep.parallel_max_deviation,
                   std::abs((po.y_t2_noprior(z) - po.y_t1(z)) - c_hat));

  rep.simple_carryover_holds = rep.simple_carryover_gap <= tol;
  rep.controlled_carryover_holds = rep.controlled_max_abs_violation <= tol;
  rep.parallel_trends_holds = rep.parallel_max_deviation <= tol;
  return rep;
}

} // namespace seqdesign
