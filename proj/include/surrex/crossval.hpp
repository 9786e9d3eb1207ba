#pragma once

#include <span>
#include <string>
#include <vector>

#include "surrex/models.hpp"

namespace surrex::crossval {

struct CVRecord {
  std::string study_id;
  double observed_y2 = 0.0;
  double obs_lo = 0.0;  // y2 - 1.96 se2
  double obs_hi = 0.0;
  double predicted_mean = 0.0;
  double pred_lo = 0.0;
  double pred_hi = 0.0;
  double abs_discrepancy = 0.0;
  double width_ratio = 0.0;  // predicted width / observed CI width
  bool covered = false;
};

struct CVSummary {
  std::string label;
  models::ModelKind kind = models::ModelKind::DanielsHughes;
  std::vector<CVRecord> records;
  double discrepancy_median = 0.0;
  double discrepancy_lo = 0.0, discrepancy_hi = 0.0;  // range over folds
  double width_ratio_median = 0.0;
  double width_ratio_lo = 0.0, width_ratio_hi = 0.0;
  double coverage_fraction = 0.0;
};

// For each study, refit with its final-outcome effect treated as missing at
// random (its surrogate effect stays in the fold likelihood) and predict the
// hidden effect. Fold RNG streams derive from the fold index, so results are
// reproducible and independent of execution order.
CVSummary take_one_out(const EvidenceBase& base, models::ModelKind kind,
                       const models::FitOptions& options,
                       const mcmc::SamplerConfig& fold_config,
                       const std::string& label = "");

struct CvComparison {
  std::vector<CVSummary> scenarios;  // ordered as given
};

// Side-by-side medians/ranges; presentation only, no verdict logic.
CvComparison compare_cv(std::span<const CVSummary> summaries);

// study_id,observed_y2,obs_lo,obs_hi,pred_mean,pred_lo,pred_hi,
// abs_discrepancy,width_ratio,covered
std::string cv_csv_text(const CVSummary& summary);
std::string comparison_csv_text(const CvComparison& comparison);

// Figure-2-style forest data on the hazard-ratio scale: observed PFS and OS
// intervals plus the cross-validated predicted OS interval per study.
std::string forest_csv_text(const EvidenceBase& base, const CVSummary& summary);

}  // namespace surrex::crossval
