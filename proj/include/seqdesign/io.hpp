#pragma once

#include <json.hpp>

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "seqdesign/detail/format.hpp"
#include "seqdesign/dgp.hpp"
#include "seqdesign/diagnostics.hpp"
#include "seqdesign/estimators.hpp"
#include "seqdesign/harness.hpp"
#include "seqdesign/model.hpp"

// Serialization: panel CSV (+ sidecar metadata JSON), strict DGP and sweep
// configuration JSON, sweep result CSV, and JSON forms of the result types.
// All floating-point text uses shortest round-trip formatting, so files are
// byte-stable across runs and platforms given the same seed.

namespace seqdesign::io {

using nlohmann::json;

// Bad user-supplied files or flag values (maps to CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write file: " + path);
  out << content;
  if (!out) throw ConfigError("write failed: " + path);
}

inline double parse_double_strict(const std::string& s, const std::string& what) {
  if (s.empty()) throw ConfigError(what + ": empty number");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE)
    throw ConfigError(what + ": bad number '" + s + "'");
  return v;
}

inline long long parse_int_strict(const std::string& s, const std::string& what) {
  if (s.empty()) throw ConfigError(what + ": empty integer");
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size() || errno == ERANGE)
    throw ConfigError(what + ": bad integer '" + s + "'");
  return v;
}

// ---------------------------------------------------------------- panel CSV

inline constexpr const char* kPanelCsvHeader =
    "unit_id,x_t1,x_t2,z_t1,z_t2,y_t1,y_t2,exited";

inline std::string panel_to_csv(const Panel& panel) {
  using detail::format_double;
  std::string out = kPanelCsvHeader;
  out += "\n";
  for (const PanelRow& r : panel.rows) {
    out += std::to_string(r.unit_id);
    out += ",";
    out += format_double(r.x_t1);
    out += ",";
    out += format_double(r.x_t2);
    out += ",";
    out += std::to_string(r.z_t1);
    out += ",";
    if (r.z_t2) out += std::to_string(*r.z_t2);
    out += ",";
    out += format_double(r.y_t1);
    out += ",";
    if (r.y_t2) out += format_double(*r.y_t2);
    out += ",";
    out += r.exited ? "1" : "0";
    out += "\n";
  }
  return out;
}

namespace detail_csv {

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

inline std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

} // namespace detail_csv

// Parses rows only; metadata comes from the sidecar (see read_panel_files).
inline std::vector<PanelRow> panel_rows_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || detail_csv::strip_cr(line) != kPanelCsvHeader)
    throw ConfigError("panel csv: bad or missing header (want '" +
                      std::string(kPanelCsvHeader) + "')");
  std::vector<PanelRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail_csv::strip_cr(line);
    if (line.empty()) continue;
    const auto f = detail_csv::split_fields(line);
    const std::string where = "panel csv line " + std::to_string(lineno);
    if (f.size() != 8) throw ConfigError(where + ": expected 8 fields");
    PanelRow r;
    r.unit_id = static_cast<int>(parse_int_strict(f[0], where + " unit_id"));
    r.x_t1 = parse_double_strict(f[1], where + " x_t1");
    r.x_t2 = parse_double_strict(f[2], where + " x_t2");
    r.z_t1 = static_cast<int>(parse_int_strict(f[3], where + " z_t1"));
    if (!f[4].empty())
      r.z_t2 = static_cast<int>(parse_int_strict(f[4], where + " z_t2"));
    r.y_t1 = parse_double_strict(f[5], where + " y_t1");
    if (!f[6].empty()) r.y_t2 = parse_double_strict(f[6], where + " y_t2");
    const long long exited = parse_int_strict(f[7], where + " exited");
    if (exited != 0 && exited != 1) throw ConfigError(where + ": exited must be 0/1");
    r.exited = exited == 1;
    rows.push_back(r);
  }
  return rows;
}

// Fallback when no sidecar metadata exists. Precedence is documented and
// deterministic; ambiguous small panels resolve to the earliest match.
inline DesignKind infer_design(const std::vector<PanelRow>& rows) {
  bool any_exited = false, all_z1_zero = true, all_equal = true, all_flipped = true;
  for (const PanelRow& r : rows) {
    any_exited |= r.exited;
    all_z1_zero &= r.z_t1 == 0;
    if (!r.z_t2) { all_equal = all_flipped = false; continue; }
    all_equal &= *r.z_t2 == r.z_t1;
    all_flipped &= *r.z_t2 == 1 - r.z_t1;
  }
  if (any_exited) return DesignKind::SelectiveSeqRand;
  if (all_z1_zero) return DesignKind::PrePost;
  if (all_equal) return DesignKind::BetweenSubjects;
  if (all_flipped) return DesignKind::Cwsd;
  return DesignKind::SequentialRandomization;
}

inline json panel_meta_to_json(const PanelMeta& meta) {
  return json{{"design", to_token(meta.design)},
              {"seed", meta.seed},
              {"dgp", meta.dgp_fingerprint}};
}

namespace detail_json {

inline void require_keys(const json& j, std::initializer_list<const char*> required,
                         std::initializer_list<const char*> optional,
                         const std::string& ctx) {
  if (!j.is_object()) throw ConfigError(ctx + ": expected a JSON object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : required) known |= item.key() == k;
    for (const char* k : optional) known |= item.key() == k;
    if (!known) throw ConfigError(ctx + ": unknown field '" + item.key() + "'");
  }
  for (const char* k : required)
    if (!j.contains(k)) throw ConfigError(ctx + ": missing field '" + k + "'");
}

inline double num_field(const json& j, const char* key, const std::string& ctx) {
  const json& v = j.at(key);
  if (!v.is_number()) throw ConfigError(ctx + ": field '" + key + "' must be a number");
  return v.get<double>();
}

inline long long int_field(const json& j, const char* key, const std::string& ctx) {
  const json& v = j.at(key);
  if (!v.is_number_integer() && !v.is_number_unsigned())
    throw ConfigError(ctx + ": field '" + key + "' must be an integer");
  return v.get<long long>();
}

inline std::string str_field(const json& j, const char* key, const std::string& ctx) {
  const json& v = j.at(key);
  if (!v.is_string()) throw ConfigError(ctx + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

} // namespace detail_json

inline PanelMeta panel_meta_from_json(const json& j) {
  const std::string ctx = "panel meta";
  detail_json::require_keys(j, {"design", "seed", "dgp"}, {}, ctx);
  PanelMeta meta;
  const std::string token = detail_json::str_field(j, "design", ctx);
  const auto design = design_from_token(token);
  if (!design) throw ConfigError(ctx + ": unknown design '" + token + "'");
  meta.design = *design;
  const json& seed = j.at("seed");
  if (!seed.is_number_integer() && !seed.is_number_unsigned())
    throw ConfigError(ctx + ": field 'seed' must be an integer");
  meta.seed = seed.get<std::uint64_t>();
  meta.dgp_fingerprint = detail_json::str_field(j, "dgp", ctx);
  return meta;
}

inline std::string meta_sidecar_path(const std::string& csv_path) {
  return csv_path + ".meta.json";
}

inline void write_panel_files(const Panel& panel, const std::string& csv_path) {
  write_text_file(csv_path, panel_to_csv(panel));
  write_text_file(meta_sidecar_path(csv_path),
                  panel_meta_to_json(panel.meta).dump(2) + "\n");
}

inline Panel read_panel_files(const std::string& csv_path) {
  Panel panel;
  panel.rows = panel_rows_from_csv(read_text_file(csv_path));
  std::ifstream sidecar(meta_sidecar_path(csv_path));
  if (sidecar) {
    json j;
    try {
      sidecar >> j;
    } catch (const json::exception& e) {
      throw ConfigError("panel meta: invalid JSON: " + std::string(e.what()));
    }
    panel.meta = panel_meta_from_json(j);
  } else {
    panel.meta.design = infer_design(panel.rows);
  }
  try {
    validate_panel(panel);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("panel csv: " + std::string(e.what()));
  }
  return panel;
}

// ----------------------------------------------------------- DGP config JSON

inline json carryover_to_json(const CarryoverKind& k) {
  return json{{"kind", to_token(k.model)}, {"c", k.c}};
}

inline CarryoverKind carryover_from_json(const json& j) {
  const std::string ctx = "dgp config field 'carryover'";
  CarryoverKind out;
  std::string token;
  if (j.is_string()) {
    token = j.get<std::string>();
  } else {
    detail_json::require_keys(j, {"kind"}, {"c"}, ctx);
    token = detail_json::str_field(j, "kind", ctx);
    if (j.contains("c")) out.c = detail_json::num_field(j, "c", ctx);
  }
  const auto model = carryover_from_token(token);
  if (!model) throw ConfigError(ctx + ": unknown kind '" + token + "'");
  out.model = *model;
  return out;
}

inline json dgp_config_to_json(const DgpConfig& cfg) {
  return json{{"alpha0", cfg.alpha0},
              {"alpha1", cfg.alpha1},
              {"alpha2", cfg.alpha2},
              {"beta0", cfg.beta0},
              {"beta1", cfg.beta1},
              {"beta2", cfg.beta2},
              {"gamma", cfg.gamma},
              {"carryover", carryover_to_json(cfg.carryover)},
              {"covariate_drift", to_token(cfg.covariate_drift)},
              {"noise_sd", cfg.noise_sd},
              {"time_shift_c", cfg.time_shift_c},
              {"n", cfg.n}};
}

// Strict schema: every field required, unknown fields rejected, so a typo in
// a config cannot silently fall back to a default.
inline DgpConfig dgp_config_from_json(const json& j) {
  const std::string ctx = "dgp config";
  detail_json::require_keys(j,
                            {"alpha0", "alpha1", "alpha2", "beta0", "beta1",
                             "beta2", "gamma", "carryover", "covariate_drift",
                             "noise_sd", "time_shift_c", "n"},
                            {}, ctx);
  DgpConfig cfg;
  cfg.alpha0 = detail_json::num_field(j, "alpha0", ctx);
  cfg.alpha1 = detail_json::num_field(j, "alpha1", ctx);
  cfg.alpha2 = detail_json::num_field(j, "alpha2", ctx);
  cfg.beta0 = detail_json::num_field(j, "beta0", ctx);
  cfg.beta1 = detail_json::num_field(j, "beta1", ctx);
  cfg.beta2 = detail_json::num_field(j, "beta2", ctx);
  cfg.gamma = detail_json::num_field(j, "gamma", ctx);
  cfg.carryover = carryover_from_json(j.at("carryover"));
  const std::string drift = detail_json::str_field(j, "covariate_drift", ctx);
  const auto d = drift_from_token(drift);
  if (!d) throw ConfigError(ctx + ": unknown covariate_drift '" + drift + "'");
  cfg.covariate_drift = *d;
  cfg.noise_sd = detail_json::num_field(j, "noise_sd", ctx);
  cfg.time_shift_c = detail_json::num_field(j, "time_shift_c", ctx);
  cfg.n = static_cast<int>(detail_json::int_field(j, "n", ctx));
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string(e.what()));
  }
  return cfg;
}

// --------------------------------------------------------- sweep config JSON

inline json sweep_config_to_json(const SweepConfig& cfg) {
  json estimators = json::array();
  for (EstimatorKind k : cfg.estimators) estimators.push_back(to_token(k));
  return json{{"gamma_grid",
               {{"start", cfg.gamma_grid.start},
                {"stop", cfg.gamma_grid.stop},
                {"count", cfg.gamma_grid.count}}},
              {"reps", cfg.reps},
              {"n", cfg.n},
              {"design", to_token(cfg.design)},
              {"dgp", dgp_config_to_json(cfg.dgp)},
              {"estimators", estimators},
              {"master_seed", cfg.master_seed},
              {"note", cfg.note}};
}

inline SweepConfig sweep_config_from_json(const json& j) {
  const std::string ctx = "sweep config";
  detail_json::require_keys(
      j, {"gamma_grid", "reps", "n", "design", "dgp", "estimators", "master_seed"},
      {"note"}, ctx);
  SweepConfig cfg;

  const json& grid = j.at("gamma_grid");
  detail_json::require_keys(grid, {"start", "stop", "count"}, {}, ctx + " gamma_grid");
  cfg.gamma_grid.start = detail_json::num_field(grid, "start", ctx);
  cfg.gamma_grid.stop = detail_json::num_field(grid, "stop", ctx);
  cfg.gamma_grid.count = static_cast<int>(detail_json::int_field(grid, "count", ctx));

  cfg.reps = static_cast<int>(detail_json::int_field(j, "reps", ctx));
  cfg.n = static_cast<int>(detail_json::int_field(j, "n", ctx));

  const std::string design = detail_json::str_field(j, "design", ctx);
  const auto dk = design_from_token(design);
  if (!dk) throw ConfigError(ctx + ": unknown design '" + design + "'");
  cfg.design = *dk;

  cfg.dgp = dgp_config_from_json(j.at("dgp"));

  const json& ests = j.at("estimators");
  if (!ests.is_array()) throw ConfigError(ctx + ": field 'estimators' must be an array");
  for (const json& e : ests) {
    if (!e.is_string()) throw ConfigError(ctx + ": estimators entries must be strings");
    const auto k = estimator_from_token(e.get<std::string>());
    if (!k) throw ConfigError(ctx + ": unknown estimator '" + e.get<std::string>() + "'");
    cfg.estimators.push_back(*k);
  }

  const json& seed = j.at("master_seed");
  if (!seed.is_number_integer() && !seed.is_number_unsigned())
    throw ConfigError(ctx + ": field 'master_seed' must be an integer");
  cfg.master_seed = seed.get<std::uint64_t>();

  if (j.contains("note")) cfg.note = detail_json::str_field(j, "note", ctx);

  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string(e.what()));
  }
  return cfg;
}

// ---------------------------------------------------------- sweep result CSV

inline constexpr const char* kSweepCsvHeader =
    "gamma,estimator,mean,min,max,mc_se,reps,failures";

inline std::string sweep_result_to_csv(const SweepResult& result) {
  using detail::format_double;
  std::string out = kSweepCsvHeader;
  out += "\n";
  for (const SweepRow& r : result.rows) {
    out += format_double(r.gamma);
    out += ",";
    out += to_token(r.estimator);
    out += ",";
    // Rows where every replication failed carry no summaries.
    if (r.reps > 0) {
      out += format_double(r.mean);
      out += ",";
      out += format_double(r.min);
      out += ",";
      out += format_double(r.max);
      out += ",";
      out += format_double(r.mc_se);
    } else {
      out += ",,,";
    }
    out += ",";
    out += std::to_string(r.reps);
    out += ",";
    out += std::to_string(r.failures);
    out += "\n";
  }
  return out;
}

inline json sweep_meta_to_json(const SweepMeta& meta) {
  return json{{"config", meta.config_fingerprint},
              {"code_version", meta.code_version},
              {"wall_seconds", meta.wall_seconds},
              {"workers", meta.workers},
              {"note", meta.note}};
}

// -------------------------------------------------------------- result JSON

inline json estimate_result_to_json(const EstimateResult& r) {
  return json{{"estimator", to_token(r.estimator)},
              {"tau_hat", r.tau_hat},
              {"se", r.se},
              {"n_used", r.n_used}};
}

inline json fwl_to_json(const FwlDecomposition& d) {
  return json{{"tau_pooled", d.tau_pooled},
              {"q", d.q},
              {"tau_t1", d.tau_t1_component},
              {"tau_t2", d.tau_t2_component},
              {"identity_residual", d.identity_residual()}};
}

inline json diagnostic_report_to_json(const DiagnosticReport& r) {
  return json{{"fisher_p", r.fisher_p},
              {"dichotomizer", r.dichotomizer},
              {"tau_t1_hat", r.tau_t1_hat},
              {"tau_t2_hat", r.tau_t2_hat},
              {"gap", r.gap},
              {"gap_se", r.gap_se},
              {"gap_z", r.gap_z},
              {"warn", r.warn},
              {"threshold", r.threshold}};
}

} // namespace seqdesign::io
