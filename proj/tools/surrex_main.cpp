// surrex: surrogate-endpoint validation from randomized and real-world
// evidence. Subcommands cover the full pipeline plus its individual stages.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "surrex/crossval.hpp"
#include "surrex/csv.hpp"
#include "surrex/matching.hpp"
#include "surrex/models.hpp"
#include "surrex/pipeline.hpp"
#include "surrex/survival.hpp"

namespace {

using namespace surrex;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

struct CommonOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<long> iterations;
  std::optional<long> burn_in;
  std::optional<std::string> out;
};

void apply(const CommonOverrides& ov, mcmc::SamplerConfig& cfg) {
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.iterations) cfg.iterations = *ov.iterations;
  if (ov.burn_in) cfg.burn_in = *ov.burn_in;
}

void add_common(CLI::App* cmd, CommonOverrides& ov) {
  cmd->add_option("--seed", ov.seed, "RNG seed override");
  cmd->add_option("--iterations", ov.iterations, "sampler iterations override");
  cmd->add_option("--burn-in", ov.burn_in, "sampler burn-in override");
  cmd->add_option("--out", ov.out, "output directory override");
}

ClassFilter parse_scenario_classes(const std::string& csv_list) {
  ClassFilter filter;
  std::string token;
  for (char c : csv_list + ",") {
    if (c == ',') {
      if (!token.empty()) filter.insert(study_class_from_string(token));
      token.clear();
    } else {
      token += c;
    }
  }
  if (filter.empty()) throw ValidationError("empty scenario class list");
  return filter;
}

int cmd_run(const std::string& config_path, const CommonOverrides& ov) {
  auto config = pipeline::load_pipeline_config(config_path);
  apply(ov, config.sampler);
  if (ov.out) config.output_dir = *ov.out;
  const auto manifest = pipeline::run_pipeline(config);
  std::cout << "pipeline ok: " << config.output_dir << " ("
            << manifest.warnings.size() << " warnings)\n";
  for (const auto& w : manifest.warnings) std::cout << "  warning: " << w << "\n";
  return kExitOk;
}

int cmd_match(const std::string& arms_path, const std::string& rct_arms_path,
              const std::string& covariates_path,
              std::optional<double> threshold, const std::string& out_path) {
  const auto specs = covariates_path.empty()
                         ? default_covariate_panel()
                         : read_covariate_json(covariates_path);
  const auto arms = read_arm_csv(arms_path, specs);
  double thr = 0.0;
  if (threshold) {
    thr = *threshold;
  } else {
    if (rct_arms_path.empty())
      throw ValidationError("provide --rct-arms or an explicit --threshold");
    const auto rct_arms = read_arm_csv(rct_arms_path, specs);
    thr = derive_threshold(group_arm_pairs(rct_arms), specs);
  }
  std::vector<ArmSummary> treatment, control;
  for (const auto& a : arms) {
    if (a.role == ArmSummary::Role::Treatment) treatment.push_back(a);
    else control.push_back(a);
  }
  const auto result = match_studies(treatment, control, specs, thr);
  write_match_report(out_path, treatment, control, specs, result);
  std::cout << "threshold " << format_double(thr) << ", "
            << result.candidate_count << " candidates, " << result.pairs.size()
            << " final pairs -> " << out_path << "\n";
  return kExitOk;
}

struct ReconstructArgs {
  std::string study_id, label, treatment_study, control_study;
  std::string pfs_treatment, pfs_control, os_treatment, os_control;
  std::string pfs_treatment_risk, pfs_control_risk, os_treatment_risk,
      os_control_risk;
  int treatment_n = 0, control_n = 0;
  std::optional<int> pfs_treatment_events, pfs_control_events,
      os_treatment_events, os_control_events;
  std::string out;
};

int cmd_reconstruct(const ReconstructArgs& a) {
  const auto load = [](const std::string& curve_file,
                       const std::string& risk_file, int n_start,
                       std::optional<int> events) {
    EndpointArm arm;
    if (!curve_file.empty())
      arm.curve = read_curve_csv(curve_file, n_start, events);
    if (!risk_file.empty()) arm.risk = read_risk_csv(risk_file);
    return arm;
  };
  EndpointPair pfs{load(a.pfs_treatment, a.pfs_treatment_risk, a.treatment_n,
                        a.pfs_treatment_events),
                   load(a.pfs_control, a.pfs_control_risk, a.control_n,
                        a.pfs_control_events)};
  EndpointPair os{load(a.os_treatment, a.os_treatment_risk, a.treatment_n,
                       a.os_treatment_events),
                  load(a.os_control, a.os_control_risk, a.control_n,
                       a.os_control_events)};
  std::vector<std::string> warnings;
  StudyRecord rec;
  rec.study_id = a.study_id;
  rec.label = a.label.empty() ? a.study_id : a.label;
  rec.evidence.cls = StudyClass::MatchedSrwe;
  rec.evidence.source_treatment =
      a.treatment_study.empty() ? a.study_id : a.treatment_study;
  rec.evidence.source_control =
      a.control_study.empty() ? a.study_id : a.control_study;
  rec.source = "reconstructed";
  rec.effects = derive_effect_pair(pfs, os, &warnings);
  write_study_csv(a.out, std::vector<StudyRecord>{rec});
  for (const auto& w : warnings) std::cout << "warning: " << w << "\n";
  std::cout << "y1=" << format_double(rec.effects.y1)
            << " se1=" << format_double(rec.effects.se1)
            << " y2=" << format_double(rec.effects.y2)
            << " se2=" << format_double(rec.effects.se2) << " -> " << a.out
            << "\n";
  return kExitOk;
}

int cmd_fit(const std::string& studies_path, const std::string& model_name,
            const std::string& scenario_classes, const std::string& priors,
            const CommonOverrides& ov) {
  const auto records = read_study_csv(studies_path);
  const auto base =
      build_evidence_base(records, parse_scenario_classes(scenario_classes));
  mcmc::SamplerConfig cfg;
  cfg.stream_tag = "cli-fit";
  apply(ov, cfg);
  auto options = models::FitOptions::preset(priors);
  const auto kind = models::model_kind_from_string(model_name);
  const auto fit = models::fit_model(kind, base, cfg, options);
  const auto verdict = models::evaluate_surrogacy(fit.summaries, options, kind);

  const std::string out_dir = ov.out.value_or("out");
  std::filesystem::create_directories(out_dir);
  csv::write_file(out_dir + "/" + model_name + "_summary.csv",
                  models::fit_summary_csv_text(fit));
  csv::write_file(out_dir + "/" + model_name + "_verdict.json",
                  models::verdict_json_text(verdict, fit));
  csv::write_file(out_dir + "/" + model_name + "_diagnostics.csv",
                  mcmc::summary_csv_text(fit.summaries));
  csv::write_file(out_dir + "/" + model_name + "_trace.csv",
                  mcmc::trace_csv_text(fit.sample));
  csv::write_file(out_dir + "/" + model_name + "_autocorr.csv",
                  mcmc::autocorr_csv_text(fit.sample));
  std::cout << "fit " << model_name << " on " << base.size()
            << " studies: " << verdict.overall << " -> " << out_dir << "\n";
  return kExitOk;
}

int cmd_cv(const std::string& studies_path, const std::string& model_name,
           const std::string& scenario_classes, const CommonOverrides& ov) {
  const auto records = read_study_csv(studies_path);
  const auto base =
      build_evidence_base(records, parse_scenario_classes(scenario_classes));
  mcmc::SamplerConfig cfg;
  cfg.iterations = 30000;
  cfg.burn_in = 10000;
  cfg.stream_tag = "cli-cv";
  apply(ov, cfg);
  const auto kind = models::model_kind_from_string(model_name);
  const auto cv = crossval::take_one_out(base, kind, models::FitOptions{}, cfg);

  const std::string out_dir = ov.out.value_or("out");
  std::filesystem::create_directories(out_dir);
  csv::write_file(out_dir + "/" + model_name + "_cv.csv",
                  crossval::cv_csv_text(cv));
  csv::write_file(out_dir + "/" + model_name + "_forest.csv",
                  crossval::forest_csv_text(base, cv));
  std::cout << "cv " << model_name << ": discrepancy median "
            << format_double(cv.discrepancy_median) << ", width ratio median "
            << format_double(cv.width_ratio_median) << ", coverage "
            << format_double(cv.coverage_fraction) << " -> " << out_dir << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"surrogate endpoint validation from RCT and real-world evidence"};
  app.require_subcommand(1);

  std::string config_path;
  CommonOverrides run_ov;
  auto* run = app.add_subcommand("run", "run the full pipeline from a config");
  run->add_option("--config", config_path, "pipeline config JSON")->required();
  add_common(run, run_ov);

  std::string arms_path, rct_arms_path, covariates_path, match_out;
  std::optional<double> threshold;
  auto* match = app.add_subcommand("match", "match single-arm studies");
  match->add_option("--arms", arms_path, "single-arm study arms CSV")
      ->required();
  match->add_option("--rct-arms", rct_arms_path, "RCT arms CSV for threshold");
  match->add_option("--covariates", covariates_path, "covariate spec JSON");
  match->add_option("--threshold", threshold, "explicit distance threshold");
  match->add_option("--out", match_out, "match report CSV")->required();

  ReconstructArgs rec;
  auto* reconstruct = app.add_subcommand(
      "reconstruct", "reconstruct IPD from digitised curves and fit logHRs");
  reconstruct->add_option("--id", rec.study_id, "matched study id")->required();
  reconstruct->add_option("--label", rec.label, "display label");
  reconstruct->add_option("--treatment-study", rec.treatment_study,
                          "source treatment study id");
  reconstruct->add_option("--control-study", rec.control_study,
                          "source control study id");
  reconstruct->add_option("--pfs-treatment", rec.pfs_treatment,
                          "PFS treatment curve CSV");
  reconstruct->add_option("--pfs-control", rec.pfs_control,
                          "PFS control curve CSV");
  reconstruct->add_option("--os-treatment", rec.os_treatment,
                          "OS treatment curve CSV");
  reconstruct->add_option("--os-control", rec.os_control,
                          "OS control curve CSV");
  reconstruct->add_option("--pfs-treatment-risk", rec.pfs_treatment_risk,
                          "PFS treatment risk-table CSV");
  reconstruct->add_option("--pfs-control-risk", rec.pfs_control_risk,
                          "PFS control risk-table CSV");
  reconstruct->add_option("--os-treatment-risk", rec.os_treatment_risk,
                          "OS treatment risk-table CSV");
  reconstruct->add_option("--os-control-risk", rec.os_control_risk,
                          "OS control risk-table CSV");
  reconstruct->add_option("--treatment-n", rec.treatment_n,
                          "treatment arm size")->required();
  reconstruct->add_option("--control-n", rec.control_n, "control arm size")
      ->required();
  reconstruct->add_option("--pfs-treatment-events", rec.pfs_treatment_events,
                          "PFS treatment total events");
  reconstruct->add_option("--pfs-control-events", rec.pfs_control_events,
                          "PFS control total events");
  reconstruct->add_option("--os-treatment-events", rec.os_treatment_events,
                          "OS treatment total events");
  reconstruct->add_option("--os-control-events", rec.os_control_events,
                          "OS control total events");
  reconstruct->add_option("--out", rec.out, "output study CSV")->required();

  std::string fit_studies, fit_model_name, fit_scenario = "RCT,cRWE,sRWE";
  std::string fit_priors = "default";
  CommonOverrides fit_ov;
  auto* fit = app.add_subcommand("fit", "fit one surrogacy model");
  fit->add_option("--studies", fit_studies, "study CSV")->required();
  fit->add_option("--model", fit_model_name, "dh|pnf|pnf-bias")->required();
  fit->add_option("--scenario", fit_scenario,
                  "comma-separated classes, e.g. RCT,cRWE");
  fit->add_option("--priors", fit_priors, "default|wide|narrow");
  add_common(fit, fit_ov);

  std::string cv_studies, cv_model_name, cv_scenario = "RCT,cRWE,sRWE";
  CommonOverrides cv_ov;
  auto* cv = app.add_subcommand("cv", "take-one-out cross-validation");
  cv->add_option("--studies", cv_studies, "study CSV")->required();
  cv->add_option("--model", cv_model_name, "dh|pnf|pnf-bias")->required();
  cv->add_option("--scenario", cv_scenario, "comma-separated classes");
  add_common(cv, cv_ov);

  try {
    app.parse(argc, argv);
    if (run->parsed()) return cmd_run(config_path, run_ov);
    if (match->parsed())
      return cmd_match(arms_path, rct_arms_path, covariates_path, threshold,
                       match_out);
    if (reconstruct->parsed()) return cmd_reconstruct(rec);
    if (fit->parsed())
      return cmd_fit(fit_studies, fit_model_name, fit_scenario, fit_priors,
                     fit_ov);
    if (cv->parsed()) return cmd_cv(cv_studies, cv_model_name, cv_scenario, cv_ov);
    return kExitValidation;
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitValidation;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
