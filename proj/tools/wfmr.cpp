// wfmr: command-line front end for wavelet-based functional mixture regression.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wfmr/error.hpp"
#include "wfmr/fit.hpp"
#include "wfmr/io.hpp"
#include "wfmr/parallel.hpp"
#include "wfmr/simulate.hpp"
#include "wfmr/tune.hpp"
#include "wfmr/wavelet.hpp"

namespace {

using json = nlohmann::json;
using namespace wfmr;

constexpr int kUsage = 2;
constexpr int kData = 3;
constexpr int kNumerical = 4;

int exit_code(Errc code) {
  switch (code) {
    case Errc::InvalidArgument:
    case Errc::InvalidDepth:
    case Errc::InvalidPenalty:
    case Errc::InvalidTarget:
      return kUsage;
    case Errc::NumericalFailure:
    case Errc::DegenerateComponent:
    case Errc::UndefinedMetric:
      return kNumerical;
    default:
      return kData;
  }
}

void report_error(std::string_view code, const std::string& message, int status) {
  const json j = {{"error", {{"code", code}, {"message", message}, {"exit", status}}}};
  std::cerr << j.dump() << '\n';
}

std::uint64_t fresh_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

// Seed given on the command line, or a fresh one that the caller reports.
struct SeedOption {
  std::uint64_t value = 0;
  CLI::Option* opt = nullptr;

  void add(CLI::App* app) { opt = app->add_option("--seed", value, "RNG seed (generated and reported if absent)"); }
  std::uint64_t resolve() {
    if (opt->count() == 0) value = fresh_seed();
    return value;
  }
  bool generated() const { return opt->count() == 0; }
};

struct DataOptions {
  std::string in;
  std::size_t resample = 0;

  void add(CLI::App* app) {
    app->add_option("--in", in, "input curve CSV")->required();
    app->add_option("--resample", resample, "linearly interpolate curves onto this many points (power of two)");
  }

  CurveTable load(bool allow_missing_response) const {
    CurveTable table = read_curve_table(in, allow_missing_response);
    if (table.size() == 0) raise(Errc::InvalidShape, "no usable rows in " + in);
    if (resample > 0) return wfmr::resample(table, resample);
    if (!is_dyadic(table.grid.size())) {
      raise(Errc::InvalidLength, "curve length " + std::to_string(table.grid.size()) +
                                     " is not a power of two; pass --resample");
    }
    return table;
  }
};

json rejected_json(const CurveTable& table) {
  json out = json::array();
  for (const auto& r : table.rejected) out.push_back({{"id", r.id}, {"reason", r.reason}});
  return out;
}

std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path);
  if (!out) raise(Errc::IoError, "cannot open " + path + " for writing");
  return out;
}

json record_json(const TuneRecord& r) {
  json j = {{"C", r.components}, {"j0", r.j0}, {"lambda", r.lambda}, {"ok", r.ok}};
  if (r.ok) {
    j["criterion"] = r.criterion;
    j["q0"] = r.q0;
    j["n_iters"] = r.n_iters;
    j["converged"] = r.converged;
  } else {
    j["failure"] = r.failure;
  }
  return j;
}

// ---------------------------------------------------------------------------

struct TransformCmd {
  DataOptions data;
  std::string out;
  std::string wavelet = "sym8";
  int j0 = 0;

  void add(CLI::App& root) {
    auto* cmd = root.add_subcommand("transform", "write the wavelet design matrix of each curve");
    data.add(cmd);
    cmd->add_option("--out", out, "output CSV")->required();
    cmd->add_option("--wavelet", wavelet, "haar, sym4 or sym8")->capture_default_str();
    cmd->add_option("--j0", j0, "coarsest level")->capture_default_str();
    cmd->callback([this] { run(); });
  }

  void run() const {
    const CurveTable table = data.load(true);
    const auto spec = WaveletSpec::parse(wavelet, j0);
    const DesignMatrix z = build_design(table.values, spec);
    auto csv = open_csv(out);
    csv << "id,response";
    for (Eigen::Index q = 0; q < z.cols(); ++q) csv << ",z_" << q;
    csv << '\n';
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      const auto& resp = table.responses[static_cast<std::size_t>(i)];
      csv << table.ids[static_cast<std::size_t>(i)] << ',' << (resp ? format_double(*resp) : "");
      for (Eigen::Index q = 0; q < z.cols(); ++q) csv << ',' << format_double(z(i, q));
      csv << '\n';
    }
    std::cout << json{{"rows", z.rows()}, {"columns", z.cols()}, {"wavelet", spec.name()}, {"j0", j0},
                      {"rejected", rejected_json(table)}, {"out", out}}
                     .dump()
              << '\n';
  }
};

struct SimulateCmd {
  std::string family = "smooth";
  std::size_t n_points = 128;
  std::size_t n = 100;
  double r2 = 0.9;
  std::vector<double> mixing{0.5, 0.5};
  std::vector<double> intercepts;
  SeedOption seed;
  std::string out;
  std::string labels_out;

  void add(CLI::App& root) {
    auto* cmd = root.add_subcommand("simulate", "generate a two-component simulated dataset");
    cmd->add_option("--family", family, "smooth or bumpy")->capture_default_str();
    cmd->add_option("--N", n_points, "points per curve")->capture_default_str();
    cmd->add_option("--n", n, "number of observations")->capture_default_str();
    cmd->add_option("--r2", r2, "target mixture R^2")->capture_default_str();
    cmd->add_option("--mixing", mixing, "mixing proportions")->delimiter(',')->capture_default_str();
    cmd->add_option("--intercepts", intercepts, "per-component intercepts")->delimiter(',');
    seed.add(cmd);
    cmd->add_option("--out", out, "output CSV")->required();
    cmd->add_option("--labels-out", labels_out, "CSV of true component labels");
    cmd->callback([this] { run(); });
  }

  void run() {
    SimSetting setting;
    setting.family = parse_family(family);
    setting.n_points = n_points;
    setting.n = n;
    setting.r2 = r2;
    setting.mixing = mixing;
    setting.intercepts = intercepts;
    setting.seed = seed.resolve();
    const SimDataset ds = generate_dataset(setting);

    CurveTable table;
    table.grid = ds.grid;
    table.values = ds.curves;
    for (Eigen::Index i = 0; i < ds.responses.size(); ++i) {
      table.ids.push_back("s" + std::to_string(i + 1));
      table.responses.emplace_back(ds.responses(i));
    }
    write_curve_table(out, table);
    if (!labels_out.empty()) {
      auto csv = open_csv(labels_out);
      csv << "id,label\n";
      for (std::size_t i = 0; i < ds.labels.size(); ++i) csv << table.ids[i] << ',' << ds.labels[i] << '\n';
    }
    std::cout << json{{"seed", setting.seed}, {"seed_generated", seed.generated()}, {"sigma", ds.sigma},
                      {"family", to_string(setting.family)}, {"n", n}, {"N", n_points}, {"out", out}}
                     .dump()
              << '\n';
  }
};

struct FitOptions {
  int components = 2;
  int j0 = 0;
  std::string wavelet = "sym8";
  bool adaptive = false;
  double gamma = 1.0;
  double tol = 1e-6;
  int max_iters = 500;

  void add(CLI::App* cmd) {
    cmd->add_option("--C", components, "number of mixture components")->capture_default_str();
    cmd->add_option("--j0", j0, "coarsest wavelet level")->capture_default_str();
    cmd->add_option("--wavelet", wavelet, "haar, sym4 or sym8")->capture_default_str();
    cmd->add_flag("--adaptive", adaptive, "two-stage adaptive lasso");
    cmd->add_option("--gamma", gamma, "exponent on pi_r in the penalty (0, 0.5 or 1)")->capture_default_str();
    cmd->add_option("--tol", tol, "relative convergence tolerance")->capture_default_str();
    cmd->add_option("--max-iters", max_iters, "EM iteration cap")->capture_default_str();
  }

  FitConfig config(std::uint64_t seed) const {
    FitConfig c;
    c.components = components;
    c.adaptive = adaptive;
    c.gamma = gamma;
    c.tol = tol;
    c.max_em_iters = max_iters;
    c.seed = seed;
    c.validate();
    return c;
  }
};

// "max" or a nonnegative number.
double resolve_lambda(const std::string& text, const Eigen::VectorXd& y, const DesignMatrix& z,
                      const FitConfig& config) {
  if (text == "max") return lambda_max(y, z, config);
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size()) raise(Errc::InvalidArgument, "--lambda must be a number or 'max'");
  if (!(value >= 0.0)) raise(Errc::InvalidPenalty, "--lambda must be nonnegative");
  return value;
}

struct FitCmd {
  DataOptions data;
  FitOptions fit_opts;
  std::string lambda = "0";
  SeedOption seed;
  std::string out;

  void add(CLI::App& root) {
    auto* cmd = root.add_subcommand("fit", "fit a penalized mixture at one lambda");
    data.add(cmd);
    fit_opts.add(cmd);
    cmd->add_option("--lambda", lambda, "penalty level, or 'max' for the smallest all-zero lambda")
        ->capture_default_str();
    seed.add(cmd);
    cmd->add_option("--out", out, "model JSON")->required();
    cmd->callback([this] { run(); });
  }

  void run() {
    const CurveTable table = data.load(false);
    const CurveData d = table.data();
    const auto spec = WaveletSpec::parse(fit_opts.wavelet, fit_opts.j0);
    const DesignMatrix z = build_design(d.curves, spec);
    FitConfig config = fit_opts.config(seed.resolve());
    config.lambda = resolve_lambda(lambda, d.y, z, config);
    const FitResult result = fit(d.y, z, config);
    const ModelFile model = make_model_file(result, spec, table.grid, config, d.size());
    save_model(out, model);
    std::cout << json{{"seed", config.seed},
                      {"seed_generated", seed.generated()},
                      {"lambda", config.lambda},
                      {"converged", result.converged},
                      {"n_iters", result.n_iters},
                      {"q0", result.q0},
                      {"log_likelihood", result.log_likelihood},
                      {"bic", model.meta.criteria.at("bic")},
                      {"rejected", rejected_json(table)},
                      {"out", out}}
                     .dump()
              << '\n';
  }
};

struct TuneCmd {
  DataOptions data;
  FitOptions fit_opts;
  std::string rule = "bic";
  int scenario = 1;
  int n_lambda = 100;
  double min_ratio = 0.0;
  int folds = 5;
  bool warm = false;
  SeedOption seed;
  std::string out;
  std::string model_out;

  void add(CLI::App& root) {
    auto* cmd = root.add_subcommand("tune", "select lambda (and C or j0) by cv5 or bic");
    data.add(cmd);
    fit_opts.add(cmd);
    cmd->add_option("--rule", rule, "cv5 or bic")->check(CLI::IsMember({"cv5", "bic"}))->capture_default_str();
    cmd->add_option("--scenario", scenario, "1: fixed C and j0, 2: select C, 3: select j0")
        ->check(CLI::Range(1, 3))
        ->capture_default_str();
    cmd->add_option("--n-lambda", n_lambda, "lambda grid size")->capture_default_str();
    cmd->add_option("--lambda-min-ratio", min_ratio, "smallest lambda as a fraction of lambda_max (0 = auto)")
        ->capture_default_str();
    cmd->add_option("--folds", folds, "cross-validation folds")->capture_default_str();
    cmd->add_flag("--warm-start", warm, "warm-start each lambda path from the previous fit instead of the random start");
    seed.add(cmd);
    cmd->add_option("--out", out, "tuning report JSON")->required();
    cmd->add_option("--model-out", model_out, "model JSON of the selected fit");
    cmd->callback([this] { run(); });
  }

  void run() {
    const CurveTable table = data.load(false);
    const CurveData d = table.data();
    TuneOptions options;
    options.fit = fit_opts.config(seed.resolve());
    options.wavelet = WaveletSpec::parse(fit_opts.wavelet, fit_opts.j0);
    options.warm_start_path = warm;
    options.folds = folds;
    options.fold_seed = derive_seed(options.fit.seed, 1);
    TuneGrid grid = TuneGrid::for_scenario(static_cast<Scenario>(scenario), d.signal_length(),
                                           fit_opts.components, fit_opts.j0, n_lambda);
    grid.lambda_min_ratio = min_ratio;
    const TuneResult result = tune(d, grid, parse_rule(rule), options);

    json report = {{"format", "wfmr-tune"},
                   {"version", 1},
                   {"rule", to_string(result.rule)},
                   {"scenario", scenario},
                   {"seed", options.fit.seed},
                   {"seed_generated", seed.generated()},
                   {"best", record_json(result.best)},
                   {"records", json::array()}};
    for (const auto& r : result.records) report["records"].push_back(record_json(r));
    std::ofstream f(out);
    if (!f) raise(Errc::IoError, "cannot open " + out + " for writing");
    f << report.dump(2) << '\n';

    if (!model_out.empty()) {
      if (!result.best_fit) raise(Errc::NumericalFailure, "selected cell has no fitted model");
      FitConfig config = options.fit;
      config.components = result.best.components;
      config.lambda = result.best.lambda;
      WaveletSpec spec = options.wavelet;
      spec.j0 = result.best.j0;
      ModelFile model = make_model_file(*result.best_fit, spec, table.grid, config, d.size());
      model.meta.criteria[std::string(to_string(result.rule))] = result.best.criterion;
      save_model(model_out, model);
    }
    std::cout << json{{"seed", options.fit.seed}, {"best", record_json(result.best)}, {"out", out}}.dump() << '\n';
  }
};

struct PredictCmd {
  DataOptions data;
  std::string model_path;
  std::string rule = "max-resp";
  int null_component = 0;
  std::string out;

  void add(CLI::App& root) {
    auto* cmd = root.add_subcommand("predict", "assign components and predict responses");
    data.add(cmd);
    cmd->add_option("--model", model_path, "model JSON")->required();
    cmd->add_option("--rule", rule, "max-resp or threshold:T")->capture_default_str();
    cmd->add_option("--null-component", null_component,
                    "1-based component used at or above the threshold (0 = smallest ||beta||)")
        ->capture_default_str();
    cmd->add_option("--out", out, "prediction CSV")->required();
    cmd->callback([this] { run(); });
  }

  void run() const {
    const ModelFile model = load_model(model_path);
    const CurveTable table = data.load(true);
    if (static_cast<Eigen::Index>(table.grid.size()) != model.signal_length()) {
      raise(Errc::InvalidShape, "curves have " + std::to_string(table.grid.size()) + " points, model expects " +
                                    std::to_string(model.signal_length()));
    }
    AssignmentRule assign = AssignmentRule::parse(rule);
    if (null_component < 0 || null_component > model.params.components()) {
      raise(Errc::InvalidArgument, "--null-component out of range");
    }
    assign.null_component = null_component - 1;

    const DesignMatrix z = build_design(table.values, model.wavelet);
    const int c = model.params.components();
    auto csv = open_csv(out);
    csv << "id,response,component,prediction";
    for (int r = 0; r < c; ++r) csv << ",resp_" << r + 1;
    csv << '\n';
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      const auto& y = table.responses[static_cast<std::size_t>(i)];
      const Eigen::RowVectorXd row = z.row(i);
      const int comp = choose_component(assign, model.params, row, y);
      csv << table.ids[static_cast<std::size_t>(i)] << ',' << (y ? format_double(*y) : "") << ',' << comp + 1
          << ',' << format_double(component_mean(model.params, comp, row));
      if (y) {
        const Responsibilities resp = responsibilities(model.params, Eigen::VectorXd::Constant(1, *y), row);
        for (int r = 0; r < c; ++r) csv << ',' << format_double(resp(0, r));
      } else {
        for (int r = 0; r < c; ++r) csv << ',';
      }
      csv << '\n';
    }
    std::cout << json{{"rows", z.rows()}, {"rejected", rejected_json(table)}, {"out", out}}.dump() << '\n';
  }
};

struct ExportPlotCmd {
  std::string model_path;
  std::string out;
  bool scale_by_n = false;

  void add(CLI::App& root) {
    auto* cmd = root.add_subcommand("export-plot", "write fitted coefficient functions on the sampling grid");
    cmd->add_option("--model", model_path, "model JSON")->required();
    cmd->add_option("--out", out, "output CSV")->required();
    cmd->add_flag("--scale-by-n", scale_by_n, "multiply by N (integral rather than sum convention)");
    cmd->callback([this] { run(); });
  }

  void run() const {
    const ModelFile model = load_model(model_path);
    const double scale = scale_by_n ? static_cast<double>(model.grid.size()) : 1.0;
    auto csv = open_csv(out);
    csv << 't';
    for (std::size_t r = 0; r < model.omegas.size(); ++r) csv << ",omega_" << r + 1;
    csv << '\n';
    for (std::size_t j = 0; j < model.grid.size(); ++j) {
      csv << format_double(model.grid[j]);
      for (const auto& omega : model.omegas) csv << ',' << format_double(scale * omega[j]);
      csv << '\n';
    }
    std::cout << json{{"components", model.omegas.size()}, {"points", model.grid.size()}, {"out", out}}.dump()
              << '\n';
  }
};

struct CvrpeCmd {
  DataOptions data;
  FitOptions fit_opts;
  std::string lambda = "0";
  std::string rule = "max-resp";
  int null_component = 0;
  SeedOption seed;

  void add(CLI::App& root) {
    auto* cmd = root.add_subcommand("cvrpe", "leave-one-out relative prediction error");
    data.add(cmd);
    fit_opts.add(cmd);
    cmd->add_option("--lambda", lambda, "penalty level or 'max' (computed once on all data)")
        ->capture_default_str();
    cmd->add_option("--rule", rule, "max-resp or threshold:T")->capture_default_str();
    cmd->add_option("--null-component", null_component, "1-based null component (0 = smallest ||beta||)")
        ->capture_default_str();
    seed.add(cmd);
    cmd->callback([this] { run(); });
  }

  void run() {
    const CurveData d = data.load(false).data();
    const auto spec = WaveletSpec::parse(fit_opts.wavelet, fit_opts.j0);
    FitConfig config = fit_opts.config(seed.resolve());
    config.lambda = resolve_lambda(lambda, d.y, build_design(d.curves, spec), config);
    AssignmentRule assign = AssignmentRule::parse(rule);
    assign.null_component = null_component - 1;
    const FitProtocol protocol = [config](const Eigen::VectorXd& y, const DesignMatrix& z) {
      return fit(y, z, config);
    };
    const double value = cvrpe(d, spec, protocol, assign);
    std::cout << json{{"seed", config.seed}, {"lambda", config.lambda}, {"cvrpe", value}}.dump() << '\n';
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wavelet-based functional mixture regression"};
  app.set_version_flag("--version", "wfmr 0.1.0");
  app.require_subcommand(1);

  TransformCmd transform;
  SimulateCmd simulate;
  FitCmd fit_cmd;
  TuneCmd tune_cmd;
  PredictCmd predict;
  ExportPlotCmd export_plot;
  CvrpeCmd cvrpe_cmd;
  transform.add(app);
  simulate.add(app);
  fit_cmd.add(app);
  tune_cmd.add(app);
  predict.add(app);
  export_plot.add(app);
  cvrpe_cmd.add(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("UsageError", e.what(), kUsage);
    return kUsage;
  } catch (const NumericalFailure& e) {
    report_error(to_string(e.code()), e.what(), kNumerical);
    return kNumerical;
  } catch (const Error& e) {
    const int status = exit_code(e.code());
    report_error(to_string(e.code()), e.what(), status);
    return status;
  } catch (const std::exception& e) {
    report_error("InternalError", e.what(), kData);
    return kData;
  }
  return 0;
}
