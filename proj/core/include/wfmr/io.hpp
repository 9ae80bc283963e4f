#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wfmr/data.hpp"
#include "wfmr/fit.hpp"
#include "wfmr/model.hpp"
#include "wfmr/wavelet.hpp"

namespace wfmr {

// ---------------------------------------------------------------------------
// Curve tables
//
// CSV layout:
//   id,response,t_1,...,t_N
//   grid,,g_1,...,g_N          (optional; defaults to j / (N + 1))
//   <id>,<response>,x_1,...,x_N
// An empty or NA response is allowed only where the caller permits it. Rows
// with a missing curve value are set aside in `rejected`.

struct RejectedRow {
  std::string id;
  std::string reason;
};

struct CurveTable {
  std::vector<std::string> ids;
  std::vector<std::optional<double>> responses;
  std::vector<double> grid;
  Eigen::MatrixXd values;
  std::vector<RejectedRow> rejected;

  std::size_t size() const noexcept { return ids.size(); }
  /// Throws InvalidArgument if any response is missing.
  CurveData data() const;
};

CurveTable read_curve_table(std::istream& in, bool allow_missing_response = false);
CurveTable read_curve_table(const std::string& path, bool allow_missing_response = false);
void write_curve_table(std::ostream& out, const CurveTable& table);
void write_curve_table(const std::string& path, const CurveTable& table);

/// Shortest decimal string that reads back to the same double.
std::string format_double(double value);

/// n equally spaced points from a to b inclusive.
std::vector<double> equispaced(double a, double b, std::size_t n);

/// Piecewise-linear interpolation of (grid, values) at `targets`. Targets
/// within 1e-12 of the span of a source node take that node's value exactly.
std::vector<double> linear_interpolate(const std::vector<double>& grid, const std::vector<double>& values,
                                       const std::vector<double>& targets);

/// Every curve resampled onto target_n equally spaced points spanning the
/// source domain.
CurveTable resample(const CurveTable& table, std::size_t target_n);

/// Reads a curve table and resamples it onto a dyadic grid.
CurveTable ingest(const std::string& path, std::size_t target_n, bool allow_missing_response = false);

// ---------------------------------------------------------------------------
// Model files (versioned JSON)

struct ModelMetadata {
  double lambda = 0.0;
  int components = 0;
  int j0 = 0;
  std::uint64_t seed = 0;
  bool adaptive = false;
  double gamma = 1.0;
  double tol = 1e-6;
  int n_iters = 0;
  bool converged = false;
  int q0 = 0;
  double effective_parameters = 0.0;
  double log_likelihood = 0.0;
  std::int64_t n_observations = 0;
  std::map<std::string, double> criteria;
};

struct ModelFile {
  static constexpr int kFormatVersion = 1;

  int version = kFormatVersion;
  WaveletSpec wavelet;
  std::vector<double> grid;
  MixtureParams params;
  /// omega_r on `grid` (discrete convention, not multiplied by N).
  std::vector<std::vector<double>> omegas;
  ModelMetadata meta;

  Eigen::Index signal_length() const noexcept { return params.coeff_length() - 1; }
};

ModelFile make_model_file(const FitResult& fit, const WaveletSpec& wavelet, std::vector<double> grid,
                          const FitConfig& config, Eigen::Index n_observations);

std::string model_to_json(const ModelFile& model);
ModelFile model_from_json(const std::string& text);
void save_model(const std::string& path, const ModelFile& model);
ModelFile load_model(const std::string& path);

// ---------------------------------------------------------------------------
// Group assignment and prediction

/// 1-based argmax of each responsibility row; ties go to the smaller index.
std::vector<int> assign_groups(const Responsibilities& resp);

struct AssignmentRule {
  enum class Kind { MaxResponsibility, Threshold };
  Kind kind = Kind::MaxResponsibility;
  double threshold = 0.0;
  /// 0-based component treated as "no association"; -1 picks the component
  /// with the smallest ||beta|| at prediction time.
  int null_component = -1;

  /// "max-resp" or "threshold:T".
  static AssignmentRule parse(std::string_view text);
};

/// 0-based component for one observation. Max-responsibility needs the
/// response; without one it falls back to the largest mixing proportion.
int choose_component(const AssignmentRule& rule, const MixtureParams& params,
                     const Eigen::RowVectorXd& z_row, std::optional<double> y);

/// alpha_r + z_row[1:] * beta_r[1:].
double component_mean(const MixtureParams& params, int component, const Eigen::RowVectorXd& z_row);

/// sum (y - yhat)^2 / sum y^2.
double relative_prediction_error(const Eigen::VectorXd& y, const Eigen::VectorXd& y_hat);

using FitProtocol = std::function<FitResult(const Eigen::VectorXd&, const DesignMatrix&)>;

/// Leave-one-out relative prediction error: each observation is predicted
/// by a model refit without it, using the rule-selected component mean.
double cvrpe(const CurveData& data, const WaveletSpec& wavelet, const FitProtocol& protocol,
             const AssignmentRule& rule, std::size_t workers = 0);

}  // namespace wfmr
