#include "surrex/crossval.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <thread>

#include "surrex/csv.hpp"

namespace surrex::crossval {

namespace {

CVRecord run_fold(const EvidenceBase& base, models::ModelKind kind,
                  const models::FitOptions& options,
                  const mcmc::SamplerConfig& fold_config, std::size_t fold) {
  std::vector<bool> missing(base.size(), false);
  missing[fold] = true;

  mcmc::SamplerConfig cfg = fold_config;
  cfg.stream_tag += "/fold:" + std::to_string(fold);
  models::FitOptions opt = options;
  opt.compute_summaries = false;

  const auto fit = models::fit_model(kind, base, cfg, opt, missing);

  const auto& held = base.studies[fold];
  const auto pred = models::predict_final_effect(
      fit, held.effects.y1, held.effects.se1, held.effects.se2,
      held.evidence.cls);

  CVRecord rec;
  rec.study_id = held.study_id;
  rec.observed_y2 = held.effects.y2;
  rec.obs_lo = held.effects.y2 - 1.96 * held.effects.se2;
  rec.obs_hi = held.effects.y2 + 1.96 * held.effects.se2;
  rec.predicted_mean = pred.mean;
  rec.pred_lo = pred.lo;
  rec.pred_hi = pred.hi;
  rec.abs_discrepancy = std::fabs(rec.observed_y2 - rec.predicted_mean);
  rec.width_ratio = (rec.pred_hi - rec.pred_lo) / (rec.obs_hi - rec.obs_lo);
  rec.covered =
      rec.observed_y2 >= rec.pred_lo && rec.observed_y2 <= rec.pred_hi;
  return rec;
}

void finalize_summary(CVSummary& summary) {
  std::vector<double> disc, ratio;
  int covered = 0;
  for (const auto& r : summary.records) {
    disc.push_back(r.abs_discrepancy);
    ratio.push_back(r.width_ratio);
    if (r.covered) ++covered;
  }
  summary.discrepancy_median = median_of(disc);
  summary.discrepancy_lo = *std::min_element(disc.begin(), disc.end());
  summary.discrepancy_hi = *std::max_element(disc.begin(), disc.end());
  summary.width_ratio_median = median_of(ratio);
  summary.width_ratio_lo = *std::min_element(ratio.begin(), ratio.end());
  summary.width_ratio_hi = *std::max_element(ratio.begin(), ratio.end());
  summary.coverage_fraction =
      static_cast<double>(covered) / static_cast<double>(summary.records.size());
}

}  // namespace

CVSummary take_one_out(const EvidenceBase& base, models::ModelKind kind,
                       const models::FitOptions& options,
                       const mcmc::SamplerConfig& fold_config,
                       const std::string& label) {
  if (base.size() < 4)
    throw ValidationError(
        "take-one-out needs at least 4 studies so each fold keeps 3");
  fold_config.validate();

  CVSummary summary;
  summary.label = label.empty() ? models::to_string(kind) : label;
  summary.kind = kind;
  summary.records.resize(base.size());

  // folds are independent; run a bounded batch of them concurrently while
  // each fold keeps its chains sequential enough for 2-4 core boxes
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t batch =
      std::max<std::size_t>(1, hw / static_cast<unsigned>(fold_config.n_chains));

  std::size_t next = 0;
  while (next < base.size()) {
    const std::size_t end = std::min(base.size(), next + batch);
    std::vector<std::future<CVRecord>> futures;
    for (std::size_t fold = next; fold < end; ++fold)
      futures.push_back(std::async(std::launch::async, [&, fold] {
        try {
          return run_fold(base, kind, options, fold_config, fold);
        } catch (const std::exception& e) {
          throw NumericError("cross-validation fold for study '" +
                             base.studies[fold].study_id + "' failed: " +
                             e.what());
        }
      }));
    for (std::size_t fold = next; fold < end; ++fold)
      summary.records[fold] = futures[fold - next].get();
    next = end;
  }
  finalize_summary(summary);
  return summary;
}

CvComparison compare_cv(std::span<const CVSummary> summaries) {
  if (summaries.size() < 2)
    throw ValidationError("compare_cv needs at least 2 summaries");
  CvComparison cmp;
  cmp.scenarios.assign(summaries.begin(), summaries.end());
  return cmp;
}

std::string cv_csv_text(const CVSummary& summary) {
  std::string out =
      "study_id,observed_y2,obs_lo,obs_hi,pred_mean,pred_lo,pred_hi,"
      "abs_discrepancy,width_ratio,covered\n";
  for (const auto& r : summary.records)
    out += csv::join_row(
        {r.study_id, format_double(r.observed_y2), format_double(r.obs_lo),
         format_double(r.obs_hi), format_double(r.predicted_mean),
         format_double(r.pred_lo), format_double(r.pred_hi),
         format_double(r.abs_discrepancy), format_double(r.width_ratio),
         r.covered ? "1" : "0"});
  return out;
}

std::string comparison_csv_text(const CvComparison& comparison) {
  std::string out =
      "scenario,n_folds,discrepancy_median,discrepancy_lo,discrepancy_hi,"
      "width_ratio_median,width_ratio_lo,width_ratio_hi,coverage_fraction,"
      "delta_discrepancy_median,delta_width_ratio_median\n";
  const auto& first = comparison.scenarios.front();
  for (const auto& s : comparison.scenarios) {
    out += csv::join_row(
        {s.label, std::to_string(s.records.size()),
         format_double(s.discrepancy_median), format_double(s.discrepancy_lo),
         format_double(s.discrepancy_hi), format_double(s.width_ratio_median),
         format_double(s.width_ratio_lo), format_double(s.width_ratio_hi),
         format_double(s.coverage_fraction),
         format_double(s.discrepancy_median - first.discrepancy_median),
         format_double(s.width_ratio_median - first.width_ratio_median)});
  }
  return out;
}

std::string forest_csv_text(const EvidenceBase& base,
                            const CVSummary& summary) {
  std::string out =
      "study_id,label,class,pfs_hr,pfs_lo,pfs_hi,os_hr,os_lo,os_hi,"
      "pred_os_hr,pred_os_lo,pred_os_hi\n";
  for (const auto& r : base.studies) {
    const CVRecord* rec = nullptr;
    for (const auto& c : summary.records)
      if (c.study_id == r.study_id) rec = &c;
    const auto& e = r.effects;
    std::vector<std::string> fields = {
        r.study_id,
        r.label,
        to_string(r.evidence.cls),
        format_double(std::exp(e.y1)),
        format_double(std::exp(e.y1 - 1.96 * e.se1)),
        format_double(std::exp(e.y1 + 1.96 * e.se1)),
        format_double(std::exp(e.y2)),
        format_double(std::exp(e.y2 - 1.96 * e.se2)),
        format_double(std::exp(e.y2 + 1.96 * e.se2))};
    if (rec) {
      fields.push_back(format_double(std::exp(rec->predicted_mean)));
      fields.push_back(format_double(std::exp(rec->pred_lo)));
      fields.push_back(format_double(std::exp(rec->pred_hi)));
    } else {
      fields.insert(fields.end(), {"", "", ""});
    }
    out += csv::join_row(fields);
  }
  return out;
}

}  // namespace surrex::crossval
