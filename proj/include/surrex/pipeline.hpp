#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "surrex/crossval.hpp"
#include "surrex/matching.hpp"
#include "surrex/models.hpp"
#include "surrex/survival.hpp"

namespace surrex::pipeline {

struct CurveInput {
  std::string arm_id;
  std::string endpoint;  // PFS | OS
  std::string file;
  std::string risk_file;  // optional
  int n_start = 0;
  std::optional<int> total_events;
};

struct Scenario {
  std::string name;
  ClassFilter classes;
};

struct PipelineConfig {
  std::string studies_file;
  std::string arms_file;      // optional: single-arm studies to match
  std::string rct_arms_file;  // optional: threshold derivation
  std::string covariates_file;
  std::vector<CurveInput> curves;
  std::optional<double> matching_threshold;  // explicit override

  std::vector<Scenario> scenarios;
  std::vector<models::ModelKind> model_list;
  mcmc::SamplerConfig sampler;
  bool cv_enabled = true;
  long cv_iterations = 30000;  // desk-scale fold budget
  long cv_burn_in = 10000;
  models::FitOptions fit_options;
  std::string prior_preset = "default";
  std::string output_dir = "out";

  void validate() const;
};

PipelineConfig load_pipeline_config(const std::string& path);
PipelineConfig parse_pipeline_config(const std::string& text,
                                     const std::string& context,
                                     const std::string& base_dir);

struct RunManifest {
  std::string version;
  std::string config_hash;
  std::uint64_t seed = 0;
  // sampler and fold budgets actually used, since defaults are artifact
  // choices rather than published values
  long iterations = 0;
  long burn_in = 0;
  int chains = 0;
  long thin = 1;
  bool cv_enabled = false;
  long cv_iterations = 0;
  long cv_burn_in = 0;
  std::vector<std::pair<std::string, double>> stage_seconds;
  std::vector<std::string> warnings;
  std::string status;  // ok | error: ...
};

struct ScatterData {
  struct Row {
    std::string study_id;
    std::string cls;
    double y1, se1, y2, se2;
  };
  std::vector<Row> rows;
  double lambda0 = 0.0;  // posterior means of the fitted line
  double lambda1 = 0.0;
};

ScatterData make_scatter_data(const EvidenceBase& base,
                              const models::SurrogacyFit& dh_fit);
std::string scatter_csv_text(const ScatterData& data);
std::string scatter_line_csv_text(const ScatterData& data);

// Runs matching -> reconstruction -> per-scenario fits -> cross-validation and
// writes all output files under config.output_dir. Scenario directories are
// staged and renamed, so a failed stage leaves no partial scenario directory.
RunManifest run_pipeline(const PipelineConfig& config);

std::string manifest_json_text(const RunManifest& manifest);

}  // namespace surrex::pipeline
