#include "wss/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <spdlog/spdlog.h>

#include "wss/cli/dataset.hpp"
#include "wss/cli/json_schema.hpp"
#include "wss/cli/output.hpp"
#include "wss/error.hpp"
#include "wss/estimators.hpp"
#include "wss/mcpmod.hpp"
#include "wss/wald.hpp"

#ifndef WSS_VERSION
#define WSS_VERSION "0.0.0"
#endif

namespace wss::cli {

using nlohmann::json;

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kParse:
    case ErrorCode::kIo: return kExitParse;
    default: return kExitInvalidInput;
  }
}

std::string software_version() { return WSS_VERSION; }

StudyConfig effective_config(StudyConfig config, const RunOptions& options) {
  if (options.out_dir) config.output_dir = *options.out_dir;
  if (options.seed) config.seed = *options.seed;
  if (options.format) config.format = *options.format;
  if (options.data) config.fit.data = *options.data;
  return config;
}

namespace {

using Clock = std::chrono::steady_clock;

class Run {
 public:
  Run(const StudyConfig& config, const RunOptions& options)
      : config_(effective_config(config, options)),
        workers_(options.workers),
        started_(std::chrono::system_clock::now()),
        t0_(Clock::now()) {}

  const StudyConfig& config() const { return config_; }
  int workers() const { return workers_; }

  void write(const std::string& file, const std::string& text) {
    const std::string path = join_path(config_.output_dir, file);
    write_text(path, text);
    result_.outputs.push_back(path);
    spdlog::debug("wrote {}", path);
  }

  CommandResult finish(std::string summary) {
    Manifest m;
    m.config_hash = config_hash(config_);
    m.seed = config_.seed;
    m.version = software_version();
    m.started_at = iso8601_utc(started_);
    m.wall_time = std::chrono::duration<double>(Clock::now() - t0_).count();
    m.mode = to_string(config_.mode);
    m.workers = workers_;
    for (const auto& p : result_.outputs) m.outputs.push_back(p);
    write("manifest.json", dump_json(manifest_json(m)));
    result_.summary = std::move(summary);
    return result_;
  }

 private:
  StudyConfig config_;
  int workers_;
  std::chrono::system_clock::time_point started_;
  Clock::time_point t0_;
  CommandResult result_;
};

Matrix to_matrix(const std::vector<std::vector<double>>& rows, const char* what) {
  if (rows.empty()) return Matrix(0, 0);
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) {
      throw Error(ErrorCode::kParse, std::string(what) + ": rows have different lengths");
    }
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(json_number(m(i, j)));
    rows.push_back(r);
  }
  return rows;
}

json vector_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(json_number(v(i)));
  return a;
}

std::string status_of(const FitResult& f) {
  return f.converged ? "converged" : "not converged: " + f.diagnostics.reason;
}

ContrastSpec fit_contrast(const FitBlock& fb, Eigen::Index p) {
  if (!fb.c.empty()) {
    const Matrix c = to_matrix(fb.c, "fit.c");
    const Vector beta0 = fb.beta0.empty() ? Vector::Zero(p) : to_vector(fb.beta0);
    ContrastSpec cs{c, beta0};
    cs.validate(p);
    return cs;
  }
  if (fb.q < 1 || fb.q > p) {
    throw Error(ErrorCode::kInvalidArgument, "fit.q must satisfy 1 <= q <= p");
  }
  Vector null1 = Vector::Zero(fb.q);
  if (!fb.null_values.empty()) {
    if (static_cast<int>(fb.null_values.size()) != fb.q) {
      throw Error(ErrorCode::kInvalidArgument, "fit.null_values must have q entries");
    }
    null1 = to_vector(fb.null_values);
  }
  return ContrastSpec::leading_subset(p, null1);
}

// The data carry no censoring times for observed failures; the common
// type I time is taken at the largest censored observation.
double common_censor_time(const Dataset& d) {
  double log_l = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < d.sample.size(); ++i)
    if (d.sample.delta(i) < 0.5) log_l = std::max(log_l, d.sample.y(i));
  return std::isfinite(log_l) ? std::exp(log_l) : std::numeric_limits<double>::infinity();
}

}  // namespace

CommandResult cmd_fit(const StudyConfig& config, const RunOptions& options) {
  Run run(config, options);
  const StudyConfig& c = run.config();
  if (c.fit.data.empty()) throw Error(ErrorCode::kParse, "fit: no dataset given (fit.data or --data)");
  const Dataset data = read_dataset_csv(c.fit.data);
  const ModelSpec spec(CovariateDesign(data.x), c.fit.sigma,
                       CensoringScheme::type_i(common_censor_time(data), data.x.rows()));
  const ContrastSpec contrast = fit_contrast(c.fit, spec.p());
  spdlog::info("fit: n = {}, p = {}, sigma = {}", spec.n(), spec.p(), spec.sigma);

  const FitResult mle = fit_mle(spec, data.sample);
  FitResult bce;
  try {
    bce = bias_corrected_from(spec, mle);
  } catch (const Error& e) {
    bce.kind = EstimatorKind::kBce;
    bce.diagnostics.reason = e.what();
  }
  FitOptions firth_opts;
  if (mle.converged) firth_opts.init = mle.beta;
  const FitResult firth = fit_firth(spec, data.sample, firth_opts);

  struct TestRow {
    WaldVariant variant;
    std::string status;
    std::optional<WaldResult> result;
  };
  std::vector<TestRow> tests;
  auto add_test = [&](const FitResult& f, CovarianceChoice choice) {
    TestRow row{wald_variant(f.kind, choice), "ok", std::nullopt};
    if (!f.converged) {
      row.status = "unavailable: estimator not converged";
    } else if (choice == CovarianceChoice::kSecond && !f.cov_second) {
      row.status = "unavailable: no second-order covariance";
    } else {
      try {
        row.result = wald_test(f, choice, contrast);
      } catch (const Error& e) {
        row.status = std::string("unavailable: ") + e.what();
      }
    }
    tests.push_back(std::move(row));
  };
  add_test(mle, CovarianceChoice::kFirst);
  add_test(mle, CovarianceChoice::kSecond);
  add_test(bce, CovarianceChoice::kFirst);
  add_test(bce, CovarianceChoice::kSecond);
  add_test(firth, CovarianceChoice::kFirst);

  const std::vector<const FitResult*> fits = {&mle, &bce, &firth};
  if (c.format == OutputFormat::kJson) {
    json est = json::array();
    for (const auto* f : fits) {
      json e = {{"estimator", to_string(f->kind)},
                {"status", status_of(*f)},
                {"iterations", f->iterations},
                {"beta", f->converged ? vector_json(f->beta) : json(nullptr)},
                {"cov_first", f->converged ? matrix_json(f->cov_first) : json(nullptr)},
                {"cov_second", f->converged && f->cov_second ? matrix_json(*f->cov_second)
                                                             : json(nullptr)},
                {"cov_second_pd", f->cov_second_pd}};
      est.push_back(e);
    }
    json tj = json::array();
    for (const auto& t : tests) {
      json x = {{"variant", to_string(t.variant)}, {"status", t.status}};
      if (t.result) {
        x["statistic"] = json_number(t.result->statistic);
        x["df"] = t.result->df;
        x["p_value"] = json_number(t.result->p_value);
      } else {
        x["statistic"] = nullptr;
        x["p_value"] = nullptr;
      }
      tj.push_back(x);
    }
    json report = {{"schema_version", kReportSchemaVersion},
                   {"kind", "fit"},
                   {"n", static_cast<int>(spec.n())},
                   {"p", static_cast<int>(spec.p())},
                   {"sigma", spec.sigma},
                   {"censored_fraction", data.sample.censored_fraction()},
                   {"estimators", est},
                   {"tests", tj}};
    require_valid(report, report_schema(ReportKind::kFit), "fit report");
    run.write("fit_report.json", dump_json(report));
  } else {
    CsvTable est({"estimator", "status", "coefficient", "estimate", "se_first", "se_second"});
    CsvTable cov({"matrix", "row", "col", "value"});
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto* f : fits) {
      for (Eigen::Index j = 0; j < spec.p(); ++j) {
        est.cell(to_string(f->kind)).cell(status_of(*f)).cell(static_cast<int>(j + 1));
        if (f->converged) {
          est.cell(f->beta(j)).cell(std::sqrt(f->cov_first(j, j)));
          est.cell(f->cov_second && (*f->cov_second)(j, j) >= 0.0
                       ? std::sqrt((*f->cov_second)(j, j))
                       : nan);
        } else {
          est.cell(nan).cell(nan).cell(nan);
        }
        est.end_row();
      }
      if (!f->converged) continue;
      auto emit = [&](const std::string& name, const Matrix& m) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
          for (Eigen::Index j = 0; j < m.cols(); ++j) {
            cov.cell(name).cell(static_cast<int>(i + 1)).cell(static_cast<int>(j + 1)).cell(m(i, j));
            cov.end_row();
          }
      };
      emit(std::string(to_string(f->kind)) + "_inverse_information", f->cov_first);
      if (f->cov_second) emit(std::string(to_string(f->kind)) + "_second_order", *f->cov_second);
    }
    CsvTable tt({"variant", "status", "statistic", "df", "p_value"});
    for (const auto& t : tests) {
      tt.cell(to_string(t.variant)).cell(t.status);
      if (t.result) {
        tt.cell(t.result->statistic).cell(t.result->df).cell(t.result->p_value);
      } else {
        tt.cell(nan).cell(static_cast<int>(contrast.m())).cell(nan);
      }
      tt.end_row();
    }
    run.write("fit_estimates.csv", est.str());
    run.write("fit_covariances.csv", cov.str());
    run.write("fit_tests.csv", tt.str());
  }
  return run.finish(std::string("fit: MLE ") + status_of(mle) + ", Firth " + status_of(firth));
}

CommandResult cmd_simulate(const StudyConfig& config, const RunOptions& options) {
  Run run(config, options);
  const StudyConfig& c = run.config();
  if (c.mode == Mode::kSimRegression) {
    std::vector<RegressionReport> reports;
    for (int n : c.regression.n) {
      for (double rate : c.regression.censor_rate) {
        RegressionScenario sc;
        sc.p = c.regression.p;
        sc.n = n;
        sc.sigma = c.regression.sigma;
        sc.censor_rate = rate;
        sc.replicates = c.replicates;
        sc.q = c.regression.q;
        sc.alpha = c.regression.alpha;
        sc.psi = c.regression.psi;
        spdlog::info("regression cell {} ({} replicates)", scenario_label(sc), sc.replicates);
        reports.push_back(run_regression_study(sc, c.seed, run.workers()));
      }
    }
    if (c.format == OutputFormat::kJson) {
      run.write("regression_report.json", dump_json(regression_report_json(reports, c.seed)));
    } else {
      run.write("regression_estimators.csv", regression_estimator_table(reports).str());
      run.write("regression_tests.csv", regression_test_table(reports).str());
      run.write("regression_distances.csv", regression_distance_table(reports).str());
    }
    return run.finish("regression study: " + std::to_string(reports.size()) + " cells");
  }
  if (c.mode == Mode::kSimMcpMod) {
    std::vector<McpModReport> reports;
    const auto candidates = c.mcpmod.candidate_models();
    for (const auto& truth : c.mcpmod.truth) {
      for (int n : c.mcpmod.n_per_dose) {
        for (double rate : c.mcpmod.censor_rate) {
          McpModScenario sc;
          sc.truth = truth;
          sc.doses = to_vector(c.mcpmod.doses);
          sc.n_per_dose = n;
          sc.sigma = c.mcpmod.sigma;
          sc.censor_rate = rate;
          sc.delta = c.mcpmod.delta;
          sc.alpha = c.mcpmod.alpha;
          sc.replicates = c.replicates;
          sc.strategies = strategies_of(c);
          sc.candidates = candidates;
          sc.sampler_seed = c.mcpmod.sampler_seed;
          sc.sampler_draws = c.mcpmod.sampler_draws;
          spdlog::info("MCP-Mod cell truth={} n={} censoring={}", truth, n, rate);
          reports.push_back(run_mcpmod_study(sc, c.seed, run.workers()));
        }
      }
    }
    if (c.format == OutputFormat::kJson) {
      run.write("oc_report.json", dump_json(mcpmod_report_json(reports, c.seed)));
    } else {
      run.write("oc_table.csv", oc_table(reports).str());
    }
    return run.finish("MCP-Mod study: " + std::to_string(reports.size()) + " cells");
  }
  throw Error(ErrorCode::kParse, std::string("simulate needs mode sim-regression or sim-mcpmod, got ") +
                                     to_string(c.mode));
}

CommandResult cmd_contrasts(const StudyConfig& config, const RunOptions& options) {
  Run run(config, options);
  const ContrastsBlock& k = run.config().contrasts;
  const Vector doses = to_vector(k.doses);
  const auto d = doses.size();
  Matrix s;
  if (!k.s.empty()) {
    s = to_matrix(k.s, "contrasts.s");
  } else if (!k.s_diagonal.empty()) {
    s = to_vector(k.s_diagonal).asDiagonal();
  } else {
    s = Matrix::Identity(d, d) * (k.sigma * k.sigma / k.n_per_dose);
  }
  if (s.rows() != d || s.cols() != d) {
    throw Error(ErrorCode::kDimensionMismatch, "contrasts: S must be D x D with D = number of doses");
  }
  std::vector<std::string> names = k.candidates;
  if (names.empty()) names = {"linear", "emax", "exponential", "logistic", "beta"};
  std::vector<Vector> mu0;
  for (const auto& n : names) mu0.push_back(reference_model(n).evaluate_standardized(doses));
  const OptimalContrasts oc = optimal_contrasts(mu0, s);

  if (run.config().format == OutputFormat::kJson) {
    json report = {{"schema_version", kReportSchemaVersion},
                   {"kind", "contrasts"},
                   {"doses", vector_json(doses)},
                   {"models", names},
                   {"contrasts", matrix_json(oc.contrasts)},
                   {"correlation", matrix_json(oc.correlation)}};
    require_valid(report, report_schema(ReportKind::kContrasts), "contrasts report");
    run.write("contrasts.json", dump_json(report));
  } else {
    std::vector<std::string> header = {"model"};
    for (Eigen::Index j = 0; j < d; ++j) header.push_back("dose_" + format_number(doses(j)));
    CsvTable ct(header);
    std::vector<std::string> corr_header = {"model"};
    corr_header.insert(corr_header.end(), names.begin(), names.end());
    CsvTable rt(corr_header);
    for (std::size_t m = 0; m < names.size(); ++m) {
      const auto mi = static_cast<Eigen::Index>(m);
      ct.cell(names[m]);
      for (Eigen::Index j = 0; j < d; ++j) ct.cell(oc.contrasts(mi, j));
      ct.end_row();
      rt.cell(names[m]);
      for (std::size_t l = 0; l < names.size(); ++l)
        rt.cell(oc.correlation(mi, static_cast<Eigen::Index>(l)));
      rt.end_row();
    }
    run.write("contrasts.csv", ct.str());
    run.write("contrast_correlation.csv", rt.str());
  }
  return run.finish("contrasts: " + std::to_string(names.size()) + " candidate models");
}

CommandResult cmd_med(const StudyConfig& config, const RunOptions& options) {
  Run run(config, options);
  const MedBlock& mb = run.config().med;
  DoseDesign design;
  design.doses = to_vector(mb.doses);
  design.validate();
  std::vector<ModelConfig> models = mb.models;
  if (models.empty()) {
    for (const char* n : {"linear", "emax", "exponential", "logistic", "beta"}) {
      ModelConfig m;
      m.reference = n;
      models.push_back(m);
    }
  }
  struct Row {
    std::string name;
    MedEstimate med;
  };
  std::vector<Row> rows;
  for (const auto& m : models) {
    const DoseResponseModel model = m.to_model();
    const std::string name = m.reference.empty() ? m.family : m.reference;
    rows.push_back({name, estimate_med(model, mb.delta, design)});
  }
  auto status = [](const MedEstimate& e) {
    return !e.reached() ? "not-reached" : e.clamped ? "clamped" : "reached";
  };
  if (run.config().format == OutputFormat::kJson) {
    json rj = json::array();
    for (const auto& r : rows) {
      rj.push_back({{"model", r.name},
                    {"status", status(r.med)},
                    {"med", r.med.med ? json(*r.med.med) : json(nullptr)}});
    }
    json report = {{"schema_version", kReportSchemaVersion},
                   {"kind", "med"},
                   {"delta", mb.delta},
                   {"rows", rj}};
    require_valid(report, report_schema(ReportKind::kMed), "MED report");
    run.write("med.json", dump_json(report));
  } else {
    CsvTable t({"model", "delta", "status", "med"});
    for (const auto& r : rows) {
      t.cell(r.name).cell(mb.delta).cell(status(r.med));
      t.cell(r.med.med ? *r.med.med : std::numeric_limits<double>::quiet_NaN());
      t.end_row();
    }
    run.write("med.csv", t.str());
  }
  return run.finish("med: " + std::to_string(rows.size()) + " models");
}

}  // namespace wss::cli
