#include "surrex/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>

#include <json.hpp>

#include "surrex/csv.hpp"

namespace fs = std::filesystem;

namespace surrex::pipeline {

namespace {

std::string resolve(const std::string& base_dir, const std::string& path) {
  if (path.empty()) return path;
  const fs::path p(path);
  if (p.is_absolute() || base_dir.empty()) return path;
  return (fs::path(base_dir) / p).string();
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

class StageTimer {
 public:
  explicit StageTimer(RunManifest& manifest) : manifest_(manifest) {}

  template <typename F>
  auto run(const std::string& name, F&& fn) {
    const auto start = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      record(name, start);
    } else {
      auto result = fn();
      record(name, start);
      return result;
    }
  }

 private:
  void record(const std::string& name,
              std::chrono::steady_clock::time_point start) {
    const std::chrono::duration<double> dt =
        std::chrono::steady_clock::now() - start;
    manifest_.stage_seconds.emplace_back(name, dt.count());
  }

  RunManifest& manifest_;
};

}  // namespace

void PipelineConfig::validate() const {
  if (studies_file.empty())
    throw ValidationError("pipeline config: inputs.studies is required");
  if (scenarios.empty())
    throw ValidationError("pipeline config: scenarios must be non-empty");
  if (model_list.empty())
    throw ValidationError("pipeline config: models must be non-empty");
  for (const auto& s : scenarios) {
    if (s.name.empty())
      throw ValidationError("pipeline config: scenario without a name");
    if (s.classes.empty())
      throw ValidationError("pipeline config: scenario '" + s.name +
                            "' has no classes");
  }
  sampler.validate();
  if (cv_enabled && (cv_iterations <= 0 || cv_burn_in < 0 ||
                     cv_burn_in >= cv_iterations))
    throw ValidationError("pipeline config: invalid cv budgets");
  if (!arms_file.empty() && rct_arms_file.empty() && !matching_threshold)
    throw ValidationError(
        "pipeline config: matching needs inputs.rct_arms or an explicit "
        "matching.threshold");
}

PipelineConfig parse_pipeline_config(const std::string& text,
                                     const std::string& context,
                                     const std::string& base_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(context + ": invalid JSON: " + e.what());
  }
  PipelineConfig cfg;
  const auto inputs = j.value("inputs", nlohmann::json::object());
  cfg.studies_file = resolve(base_dir, inputs.value("studies", ""));
  cfg.arms_file = resolve(base_dir, inputs.value("arms", ""));
  cfg.rct_arms_file = resolve(base_dir, inputs.value("rct_arms", ""));
  cfg.covariates_file = resolve(base_dir, inputs.value("covariates", ""));
  if (inputs.contains("curves")) {
    for (const auto& c : inputs["curves"]) {
      CurveInput ci;
      ci.arm_id = c.at("arm_id").get<std::string>();
      ci.endpoint = c.at("endpoint").get<std::string>();
      ci.file = resolve(base_dir, c.at("file").get<std::string>());
      if (c.contains("risk_file"))
        ci.risk_file = resolve(base_dir, c["risk_file"].get<std::string>());
      ci.n_start = c.at("n_start").get<int>();
      if (c.contains("total_events"))
        ci.total_events = c["total_events"].get<int>();
      if (ci.endpoint != "PFS" && ci.endpoint != "OS")
        throw ValidationError(context + ": curve endpoint must be PFS or OS");
      cfg.curves.push_back(std::move(ci));
    }
  }
  if (j.contains("matching") && j["matching"].contains("threshold"))
    cfg.matching_threshold = j["matching"]["threshold"].get<double>();

  for (const auto& s : j.value("scenarios", nlohmann::json::array())) {
    Scenario sc;
    sc.name = s.at("name").get<std::string>();
    for (const auto& c : s.at("classes"))
      sc.classes.insert(study_class_from_string(c.get<std::string>()));
    cfg.scenarios.push_back(std::move(sc));
  }
  for (const auto& m : j.value("models", nlohmann::json::array()))
    cfg.model_list.push_back(
        models::model_kind_from_string(m.get<std::string>()));

  if (j.contains("sampler"))
    cfg.sampler = mcmc::sampler_config_from_json_text(j["sampler"].dump(),
                                                      context + " sampler");
  if (j.contains("cv")) {
    const auto& cv = j["cv"];
    cfg.cv_enabled = cv.value("enabled", true);
    cfg.cv_iterations = cv.value("iterations", cfg.cv_iterations);
    cfg.cv_burn_in = cv.value("burn_in", cfg.cv_burn_in);
  }
  cfg.prior_preset = j.value("priors", "default");
  cfg.fit_options = models::FitOptions::preset(cfg.prior_preset);
  if (j.contains("prior_overrides")) {
    const auto& po = j["prior_overrides"];
    cfg.fit_options.normal_prior_variance =
        po.value("normal_variance", cfg.fit_options.normal_prior_variance);
    cfg.fit_options.psi2_upper =
        po.value("psi2_upper", cfg.fit_options.psi2_upper);
    cfg.fit_options.tau_upper = po.value("tau_upper", cfg.fit_options.tau_upper);
    if (cfg.fit_options.normal_prior_variance <= 0.0 ||
        cfg.fit_options.psi2_upper <= 0.0 || cfg.fit_options.tau_upper <= 0.0)
      throw ValidationError(context + ": prior overrides must be positive");
  }
  if (j.contains("bounds")) {
    cfg.fit_options.cond_var_bound =
        j["bounds"].value("cond_var", cfg.fit_options.cond_var_bound);
    cfg.fit_options.iqwig_bound =
        j["bounds"].value("iqwig", cfg.fit_options.iqwig_bound);
  }
  cfg.output_dir = resolve(base_dir, j.value("output", "out"));
  cfg.validate();
  return cfg;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  const std::string base_dir = fs::path(path).parent_path().string();
  return parse_pipeline_config(csv::read_text_file(path), path, base_dir);
}

ScatterData make_scatter_data(const EvidenceBase& base,
                              const models::SurrogacyFit& dh_fit) {
  if (dh_fit.sample.chains.empty() || dh_fit.sample.n_retained() == 0)
    throw ValidationError("scatter data needs a fitted model with draws");
  ScatterData data;
  data.lambda0 = mean_of(dh_fit.sample.pooled("lambda0"));
  data.lambda1 = mean_of(dh_fit.sample.pooled("lambda1"));
  for (const auto& r : base.studies)
    data.rows.push_back({r.study_id, to_string(r.evidence.cls), r.effects.y1,
                         r.effects.se1, r.effects.y2, r.effects.se2});
  return data;
}

std::string scatter_csv_text(const ScatterData& data) {
  std::string out = "study_id,class,y1,se1,y2,se2\n";
  for (const auto& r : data.rows)
    out += csv::join_row({r.study_id, r.cls, format_double(r.y1),
                          format_double(r.se1), format_double(r.y2),
                          format_double(r.se2)});
  return out;
}

std::string scatter_line_csv_text(const ScatterData& data) {
  return "lambda0,lambda1\n" +
         csv::join_row({format_double(data.lambda0), format_double(data.lambda1)});
}

std::string manifest_json_text(const RunManifest& manifest) {
  nlohmann::json j;
  j["version"] = manifest.version;
  j["config_hash"] = manifest.config_hash;
  j["seed"] = manifest.seed;
  j["sampler"] = {{"iterations", manifest.iterations},
                  {"burn_in", manifest.burn_in},
                  {"chains", manifest.chains},
                  {"thin", manifest.thin}};
  j["cv"] = {{"enabled", manifest.cv_enabled},
             {"iterations", manifest.cv_iterations},
             {"burn_in", manifest.cv_burn_in}};
  j["status"] = manifest.status;
  j["warnings"] = manifest.warnings;
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& [name, secs] : manifest.stage_seconds)
    stages.push_back({{"stage", name}, {"seconds", secs}});
  j["stages"] = stages;
  return j.dump(2) + "\n";
}

namespace {

struct MatchingOutput {
  std::vector<StudyRecord> reconstructed;
  std::string report;
  std::vector<std::string> warnings;
};

const CurveInput* find_curve(const PipelineConfig& cfg,
                             const std::string& arm_id,
                             const std::string& endpoint) {
  for (const auto& c : cfg.curves)
    if (c.arm_id == arm_id && c.endpoint == endpoint) return &c;
  return nullptr;
}

EndpointArm load_endpoint_arm(const PipelineConfig& cfg,
                              const std::string& arm_id,
                              const std::string& endpoint) {
  const auto* ci = find_curve(cfg, arm_id, endpoint);
  if (!ci)
    throw ValidationError("no " + endpoint + " curve configured for arm '" +
                          arm_id + "'");
  EndpointArm arm;
  arm.curve = read_curve_csv(ci->file, ci->n_start, ci->total_events);
  if (!ci->risk_file.empty()) arm.risk = read_risk_csv(ci->risk_file);
  return arm;
}

MatchingOutput run_matching(const PipelineConfig& cfg) {
  const auto specs = cfg.covariates_file.empty()
                         ? default_covariate_panel()
                         : read_covariate_json(cfg.covariates_file);
  const auto arms = read_arm_csv(cfg.arms_file, specs);

  double threshold = 0.0;
  if (cfg.matching_threshold) {
    threshold = *cfg.matching_threshold;
  } else {
    const auto rct_arms = read_arm_csv(cfg.rct_arms_file, specs);
    const auto pairs = group_arm_pairs(rct_arms);
    threshold = derive_threshold(pairs, specs);
  }

  std::vector<ArmSummary> treatment, control;
  for (const auto& a : arms) {
    if (a.role == ArmSummary::Role::Treatment) treatment.push_back(a);
    else control.push_back(a);
  }
  const auto result = match_studies(treatment, control, specs, threshold);

  MatchingOutput out;
  out.report = match_report_text(treatment, control, specs, result);

  const auto study_of = [&arms](const std::string& arm_id) -> std::string {
    for (const auto& a : arms)
      if (a.arm_id == arm_id) return a.study_id;
    return arm_id;
  };

  for (const auto& p : result.pairs) {
    EndpointPair pfs{load_endpoint_arm(cfg, p.treatment_arm, "PFS"),
                     load_endpoint_arm(cfg, p.control_arm, "PFS")};
    EndpointPair os{load_endpoint_arm(cfg, p.treatment_arm, "OS"),
                    load_endpoint_arm(cfg, p.control_arm, "OS")};
    StudyRecord rec;
    rec.evidence.cls = StudyClass::MatchedSrwe;
    rec.evidence.source_treatment = study_of(p.treatment_arm);
    rec.evidence.source_control = study_of(p.control_arm);
    rec.study_id =
        rec.evidence.source_treatment + "_vs_" + rec.evidence.source_control;
    rec.label = rec.study_id;
    rec.source = "reconstructed";
    rec.effects = derive_effect_pair(pfs, os, &out.warnings);
    out.reconstructed.push_back(std::move(rec));
  }
  return out;
}

struct ScenarioFiles {
  std::map<std::string, std::string> files;  // name -> content
};

// Cheap schema check before anything lands on disk: CSVs must have a header
// and rectangular rows, JSON must parse.
void validate_output_schema(const std::string& fname,
                            const std::string& content) {
  if (fname.size() > 4 && fname.substr(fname.size() - 4) == ".csv") {
    const auto table = csv::parse(content);
    if (table.header.empty())
      throw NumericError("output file " + fname + " has no header");
    for (const auto& row : table.rows)
      if (row.size() != table.header.size())
        throw NumericError("output file " + fname + " has a ragged row");
    return;
  }
  if (fname.size() > 5 && fname.substr(fname.size() - 5) == ".json") {
    if (!nlohmann::json::accept(content))
      throw NumericError("output file " + fname + " is not valid JSON");
  }
}

void write_scenario(const fs::path& scenarios_dir, const std::string& name,
                    const ScenarioFiles& files) {
  for (const auto& [fname, content] : files.files)
    validate_output_schema(fname, content);
  const fs::path tmp = scenarios_dir / (name + ".partial");
  const fs::path final_dir = scenarios_dir / name;
  std::error_code ec;
  fs::remove_all(tmp, ec);
  fs::create_directories(tmp);
  for (const auto& [fname, content] : files.files)
    csv::write_file((tmp / fname).string(), content);
  fs::remove_all(final_dir, ec);
  fs::rename(tmp, final_dir);
}

std::string convergence_csv_text(const mcmc::ConvergenceReport& report) {
  std::string out = "param,pass,message\n";
  for (const auto& e : report.entries)
    out += csv::join_row({e.param, e.pass ? "1" : "0", e.message});
  return out;
}

}  // namespace

RunManifest run_pipeline(const PipelineConfig& config) {
  config.validate();
  RunManifest manifest;
  manifest.version = kVersion;
  manifest.seed = config.sampler.seed;
  manifest.iterations = config.sampler.iterations;
  manifest.burn_in = config.sampler.burn_in;
  manifest.chains = config.sampler.n_chains;
  manifest.thin = config.sampler.thin;
  manifest.cv_enabled = config.cv_enabled;
  manifest.cv_iterations = config.cv_iterations;
  manifest.cv_burn_in = config.cv_burn_in;
  manifest.status = "ok";

  nlohmann::json hash_source;
  hash_source["studies"] = config.studies_file;
  hash_source["seed"] = config.sampler.seed;
  hash_source["iterations"] = config.sampler.iterations;
  hash_source["burn_in"] = config.sampler.burn_in;
  hash_source["models"] = config.model_list.size();
  hash_source["scenarios"] = config.scenarios.size();
  manifest.config_hash = hex64(fnv1a(hash_source.dump()));

  const fs::path out_dir(config.output_dir);
  fs::create_directories(out_dir);
  StageTimer timer(manifest);

  try {
    auto records = timer.run("load-studies", [&] {
      return read_study_csv(config.studies_file);
    });

    if (!config.arms_file.empty()) {
      auto matched = timer.run("match-and-reconstruct", [&] {
        return run_matching(config);
      });
      for (auto& w : matched.warnings) manifest.warnings.push_back(w);
      fs::create_directories(out_dir / "matching");
      csv::write_file((out_dir / "matching" / "report.csv").string(),
                      matched.report);
      if (!matched.reconstructed.empty())
        write_study_csv((out_dir / "reconstructed_studies.csv").string(),
                        matched.reconstructed);
      for (auto& r : matched.reconstructed) records.push_back(std::move(r));
    }

    const fs::path scenarios_dir = out_dir / "scenarios";
    fs::create_directories(scenarios_dir);

    std::map<std::string, std::vector<crossval::CVSummary>> cv_by_model;

    for (const auto& scenario : config.scenarios) {
      ScenarioFiles files;
      const auto base = build_evidence_base(records, scenario.classes);

      for (const auto kind : config.model_list) {
        if (kind == models::ModelKind::PnfBias) {
          bool any_rwe = false;
          for (const auto& s : base.studies)
            if (s.evidence.cls != StudyClass::Rct) any_rwe = true;
          if (!any_rwe) {
            manifest.warnings.push_back("scenario '" + scenario.name +
                                        "': skipping pnf-bias (RCT-only base)");
            continue;
          }
        }
        const std::string model_name = models::to_string(kind);
        const std::string stage =
            "fit:" + scenario.name + ":" + model_name;

        mcmc::SamplerConfig cfg = config.sampler;
        cfg.stream_tag = "scenario:" + scenario.name + "/model:" + model_name;
        auto fit = timer.run(stage, [&] {
          return models::fit_model(kind, base, cfg, config.fit_options);
        });

        files.files[model_name + "_summary.csv"] =
            models::fit_summary_csv_text(fit);
        const auto verdict = models::evaluate_surrogacy(
            fit.summaries, config.fit_options, kind);
        files.files[model_name + "_verdict.json"] =
            models::verdict_json_text(verdict, fit);
        files.files[model_name + "_diagnostics.csv"] =
            mcmc::summary_csv_text(fit.summaries);
        files.files[model_name + "_convergence.csv"] =
            convergence_csv_text(fit.convergence);
        files.files[model_name + "_trace.csv"] =
            mcmc::trace_csv_text(fit.sample);
        files.files[model_name + "_autocorr.csv"] =
            mcmc::autocorr_csv_text(fit.sample);
        for (const auto& e : fit.convergence.entries)
          if (!e.pass)
            manifest.warnings.push_back("scenario '" + scenario.name + "' " +
                                        model_name + " " + e.param + ": " +
                                        e.message);

        if (kind == models::ModelKind::DanielsHughes) {
          const auto scatter = make_scatter_data(base, fit);
          files.files["scatter.csv"] = scatter_csv_text(scatter);
          files.files["scatter_line.csv"] = scatter_line_csv_text(scatter);
        }

        if (config.cv_enabled && base.size() >= 4) {
          mcmc::SamplerConfig fold_cfg = cfg;
          fold_cfg.iterations = config.cv_iterations;
          fold_cfg.burn_in = config.cv_burn_in;
          auto cv = timer.run("cv:" + scenario.name + ":" + model_name, [&] {
            return crossval::take_one_out(base, kind, config.fit_options,
                                          fold_cfg, scenario.name);
          });
          files.files[model_name + "_cv.csv"] = crossval::cv_csv_text(cv);
          files.files[model_name + "_forest.csv"] =
              crossval::forest_csv_text(base, cv);
          cv_by_model[model_name].push_back(std::move(cv));
        }
      }
      write_scenario(scenarios_dir, scenario.name, files);
    }

    for (const auto& [model_name, summaries] : cv_by_model) {
      if (summaries.size() < 2) continue;
      const auto cmp = crossval::compare_cv(summaries);
      csv::write_file((out_dir / (model_name + "_cv_comparison.csv")).string(),
                      crossval::comparison_csv_text(cmp));
    }
  } catch (const std::exception& e) {
    manifest.status = std::string("error: ") + e.what();
    csv::write_file((out_dir / "manifest.json").string(),
                    manifest_json_text(manifest));
    throw;
  }

  csv::write_file((out_dir / "manifest.json").string(),
                  manifest_json_text(manifest));
  return manifest;
}

}  // namespace surrex::pipeline
