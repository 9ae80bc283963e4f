#include "wfmr/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "wfmr/error.hpp"
#include "wfmr/parallel.hpp"
#include "wfmr/tune.hpp"

namespace wfmr {
namespace {

using nlohmann::json;

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream stream(line);
  while (std::getline(stream, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

bool is_missing(const std::string& cell) { return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan"; }

double parse_number(const std::string& cell, std::size_t row, std::size_t col) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
    raise(Errc::ParseError, "row " + std::to_string(row) + ", column " + std::to_string(col) +
                                ": '" + cell + "' is not a number");
  }
  return value;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::IoError, "cannot write " + path);
  return out;
}

std::string family_name(WaveletFamily family) {
  return family == WaveletFamily::Haar ? "haar" : "daubechies-least-asymmetric";
}

WaveletFamily parse_family_name(const std::string& name) {
  if (name == "haar") return WaveletFamily::Haar;
  if (name == "daubechies-least-asymmetric") return WaveletFamily::DaubechiesLeastAsymmetric;
  raise(Errc::ParseError, "unknown wavelet family '" + name + "' in model file");
}

json matrix_columns(const Eigen::MatrixXd& m, Eigen::Index first_row = 0) {
  json cols = json::array();
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    std::vector<double> col(static_cast<std::size_t>(m.rows() - first_row));
    for (Eigen::Index r = first_row; r < m.rows(); ++r) col[static_cast<std::size_t>(r - first_row)] = m(r, c);
    cols.push_back(col);
  }
  return cols;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

// ---------------------------------------------------------------------------

CurveData CurveTable::data() const {
  CurveData out{values, Eigen::VectorXd(static_cast<Eigen::Index>(size()))};
  for (std::size_t i = 0; i < size(); ++i) {
    if (!responses[i]) raise(Errc::InvalidArgument, "row '" + ids[i] + "' has no response");
    out.y(static_cast<Eigen::Index>(i)) = *responses[i];
  }
  return out;
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) raise(Errc::IoError, "cannot format number");
  return {buf, ptr};
}

CurveTable read_curve_table(std::istream& in, bool allow_missing_response) {
  std::string line;
  std::size_t row = 1;
  if (!std::getline(in, line)) raise(Errc::ParseError, "empty curve table");
  const auto header = split_csv(trim(line));
  if (header.size() < 3 || trim(header[0]) != "id" || trim(header[1]) != "response") {
    raise(Errc::ParseError, "row 1: header must start with id,response and name at least one point");
  }
  const std::size_t n_points = header.size() - 2;

  CurveTable table;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++row;
    line = trim(line);
    if (line.empty()) continue;
    auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      raise(Errc::ParseError, "row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                                  " cells, found " + std::to_string(cells.size()));
    }
    for (auto& c : cells) c = trim(c);
    if (cells[0] == "grid") {
      table.grid.resize(n_points);
      for (std::size_t j = 0; j < n_points; ++j) table.grid[j] = parse_number(cells[j + 2], row, j + 3);
      continue;
    }

    std::vector<double> values(n_points);
    std::optional<std::string> gap;
    for (std::size_t j = 0; j < n_points; ++j) {
      if (is_missing(cells[j + 2])) {
        if (!gap) gap = "missing value at point " + std::to_string(j + 1);
        continue;
      }
      values[j] = parse_number(cells[j + 2], row, j + 3);
    }
    if (gap) {
      table.rejected.push_back({cells[0], *gap});
      continue;
    }
    std::optional<double> response;
    if (is_missing(cells[1])) {
      if (!allow_missing_response) {
        raise(Errc::ParseError, "row " + std::to_string(row) + ": response is missing");
      }
    } else {
      response = parse_number(cells[1], row, 2);
    }
    table.ids.push_back(cells[0]);
    table.responses.push_back(response);
    rows.push_back(std::move(values));
  }

  if (table.grid.empty()) {
    table.grid.resize(n_points);
    for (std::size_t j = 0; j < n_points; ++j) {
      table.grid[j] = static_cast<double>(j + 1) / static_cast<double>(n_points + 1);
    }
  }
  for (std::size_t j = 1; j < table.grid.size(); ++j) {
    if (!(table.grid[j] > table.grid[j - 1])) raise(Errc::InvalidGrid, "grid must be strictly increasing");
  }

  table.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n_points));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < n_points; ++j) {
      table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return table;
}

CurveTable read_curve_table(const std::string& path, bool allow_missing_response) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::IoError, "cannot open " + path);
  return read_curve_table(in, allow_missing_response);
}

void write_curve_table(std::ostream& out, const CurveTable& table) {
  const auto n_points = static_cast<std::size_t>(table.values.cols());
  out << "id,response";
  for (std::size_t j = 1; j <= n_points; ++j) out << ",t_" << j;
  out << "\ngrid,";
  for (double g : table.grid) out << ',' << format_double(g);
  out << '\n';
  for (std::size_t i = 0; i < table.size(); ++i) {
    out << table.ids[i] << ',' << (table.responses[i] ? format_double(*table.responses[i]) : "NA");
    for (std::size_t j = 0; j < n_points; ++j) {
      out << ',' << format_double(table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    out << '\n';
  }
}

void write_curve_table(const std::string& path, const CurveTable& table) {
  auto out = open_out(path);
  write_curve_table(out, table);
}

std::vector<double> equispaced(double a, double b, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = a;
    return out;
  }
  const double step = (b - a) / static_cast<double>(n - 1);
  for (std::size_t k = 0; k < n; ++k) out[k] = a + step * static_cast<double>(k);
  out.back() = b;
  return out;
}

std::vector<double> linear_interpolate(const std::vector<double>& grid, const std::vector<double>& values,
                                       const std::vector<double>& targets) {
  if (grid.size() != values.size() || grid.empty()) raise(Errc::InvalidShape, "grid and values must match");
  for (std::size_t j = 1; j < grid.size(); ++j) {
    if (!(grid[j] > grid[j - 1])) raise(Errc::InvalidGrid, "source grid must be strictly increasing");
  }
  const double span = grid.back() - grid.front();
  const double snap = 1e-12 * (span > 0.0 ? span : 1.0);
  std::vector<double> out(targets.size());
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const double t = targets[k];
    if (t < grid.front() - snap || t > grid.back() + snap) raise(Errc::InvalidGrid, "target outside source grid");
    auto upper = std::lower_bound(grid.begin(), grid.end(), t);
    const auto hi = static_cast<std::size_t>(std::min<std::ptrdiff_t>(upper - grid.begin(), static_cast<std::ptrdiff_t>(grid.size() - 1)));
    if (std::abs(grid[hi] - t) <= snap) {
      out[k] = values[hi];
      continue;
    }
    if (hi == 0) {
      out[k] = values[0];
      continue;
    }
    const std::size_t lo = hi - 1;
    if (std::abs(grid[lo] - t) <= snap) {
      out[k] = values[lo];
      continue;
    }
    const double w = (t - grid[lo]) / (grid[hi] - grid[lo]);
    out[k] = values[lo] + w * (values[hi] - values[lo]);
  }
  return out;
}

CurveTable resample(const CurveTable& table, std::size_t target_n) {
  const auto source_n = static_cast<std::size_t>(table.values.cols());
  if (!is_dyadic(target_n) || target_n < 2) raise(Errc::InvalidLength, "target length must be a power of two >= 2");
  if (2 * target_n < source_n) raise(Errc::InvalidLength, "target length must be at least half the source length");
  CurveTable out = table;
  out.grid = equispaced(table.grid.front(), table.grid.back(), target_n);
  out.values.resize(table.values.rows(), static_cast<Eigen::Index>(target_n));
  std::vector<double> src(source_n);
  for (Eigen::Index i = 0; i < table.values.rows(); ++i) {
    for (std::size_t j = 0; j < source_n; ++j) src[j] = table.values(i, static_cast<Eigen::Index>(j));
    const auto res = linear_interpolate(table.grid, src, out.grid);
    for (std::size_t j = 0; j < target_n; ++j) out.values(i, static_cast<Eigen::Index>(j)) = res[j];
  }
  return out;
}

CurveTable ingest(const std::string& path, std::size_t target_n, bool allow_missing_response) {
  return resample(read_curve_table(path, allow_missing_response), target_n);
}

// ---------------------------------------------------------------------------

ModelFile make_model_file(const FitResult& fit, const WaveletSpec& wavelet, std::vector<double> grid,
                          const FitConfig& config, Eigen::Index n_observations) {
  ModelFile model;
  model.wavelet = wavelet;
  model.grid = std::move(grid);
  model.params = fit.params;
  if (static_cast<Eigen::Index>(model.grid.size()) != model.signal_length()) {
    raise(Errc::InvalidShape, "grid length does not match the fitted coefficient length");
  }
  model.omegas = reconstruct_omegas(fit.params, wavelet);
  auto& m = model.meta;
  m.lambda = config.lambda;
  m.components = config.components;
  m.j0 = wavelet.j0;
  m.seed = config.seed;
  m.adaptive = config.adaptive;
  m.gamma = config.gamma;
  m.tol = config.tol;
  m.n_iters = fit.n_iters;
  m.converged = fit.converged;
  m.q0 = fit.q0;
  m.effective_parameters = effective_parameters(model.signal_length(), config.components, fit.q0);
  m.log_likelihood = fit.log_likelihood;
  m.n_observations = n_observations;
  m.criteria["bic"] = modified_bic(fit, n_observations);
  m.criteria["objective"] = fit.objective_trace.empty() ? std::nan("") : fit.objective_trace.back();
  return model;
}

std::string model_to_json(const ModelFile& model) {
  const NaturalParams natural = to_natural(model.params);
  json j;
  j["format"] = "wfmr-model";
  j["version"] = model.version;
  j["wavelet"] = {{"family", family_name(model.wavelet.family)},
                  {"vanishing_moments", model.wavelet.vanishing_moments},
                  {"boundary", "periodic"},
                  {"j0", model.wavelet.j0}};
  j["signal_length"] = model.signal_length();
  j["grid"] = model.grid;
  j["params"] = {{"phi", matrix_columns(model.params.phi)},
                 {"rho", to_std(model.params.rho)},
                 {"pi", to_std(model.params.pi)}};
  j["natural"] = {{"alpha", to_std(natural.beta.row(0).transpose())},
                  {"beta", matrix_columns(natural.beta, 1)},
                  {"sigma", to_std(natural.sigma)},
                  {"pi", to_std(natural.pi)}};
  j["omegas"] = model.omegas;
  const auto& m = model.meta;
  json criteria = json::object();
  for (const auto& [name, value] : m.criteria) {
    if (std::isfinite(value)) criteria[name] = value;
  }
  j["metadata"] = {{"lambda", m.lambda},
                   {"components", m.components},
                   {"j0", m.j0},
                   {"seed", m.seed},
                   {"adaptive", m.adaptive},
                   {"gamma", m.gamma},
                   {"tol", m.tol},
                   {"n_iters", m.n_iters},
                   {"converged", m.converged},
                   {"q0", m.q0},
                   {"effective_parameters", m.effective_parameters},
                   {"log_likelihood", m.log_likelihood},
                   {"n_observations", m.n_observations},
                   {"criteria", criteria}};
  return j.dump(2) + "\n";
}

ModelFile model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    raise(Errc::ParseError, std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "wfmr-model") raise(Errc::ParseError, "not a wfmr model file");
    ModelFile model;
    model.version = j.at("version").get<int>();
    if (model.version != ModelFile::kFormatVersion) {
      raise(Errc::ParseError, "unsupported model format version " + std::to_string(model.version));
    }
    const auto& w = j.at("wavelet");
    model.wavelet.family = parse_family_name(w.at("family").get<std::string>());
    model.wavelet.vanishing_moments = w.at("vanishing_moments").get<int>();
    model.wavelet.j0 = w.at("j0").get<int>();
    model.grid = j.at("grid").get<std::vector<double>>();

    const auto& p = j.at("params");
    const auto phi = p.at("phi").get<std::vector<std::vector<double>>>();
    model.params.rho = to_eigen(p.at("rho").get<std::vector<double>>());
    model.params.pi = to_eigen(p.at("pi").get<std::vector<double>>());
    if (phi.empty()) raise(Errc::ParseError, "model has no components");
    model.params.phi.resize(static_cast<Eigen::Index>(phi.front().size()), static_cast<Eigen::Index>(phi.size()));
    for (std::size_t c = 0; c < phi.size(); ++c) {
      if (phi[c].size() != phi.front().size()) raise(Errc::ParseError, "ragged phi in model file");
      model.params.phi.col(static_cast<Eigen::Index>(c)) = to_eigen(phi[c]);
    }
    model.params.validate();
    if (static_cast<Eigen::Index>(model.grid.size()) != model.signal_length() ||
        j.at("signal_length").get<Eigen::Index>() != model.signal_length()) {
      raise(Errc::ParseError, "grid length does not match phi");
    }
    model.omegas = j.at("omegas").get<std::vector<std::vector<double>>>();

    const auto& m = j.at("metadata");
    auto& meta = model.meta;
    meta.lambda = m.at("lambda").get<double>();
    meta.components = m.at("components").get<int>();
    meta.j0 = m.at("j0").get<int>();
    meta.seed = m.at("seed").get<std::uint64_t>();
    meta.adaptive = m.at("adaptive").get<bool>();
    meta.gamma = m.at("gamma").get<double>();
    meta.tol = m.at("tol").get<double>();
    meta.n_iters = m.at("n_iters").get<int>();
    meta.converged = m.at("converged").get<bool>();
    meta.q0 = m.at("q0").get<int>();
    meta.effective_parameters = m.at("effective_parameters").get<double>();
    meta.log_likelihood = m.at("log_likelihood").get<double>();
    meta.n_observations = m.at("n_observations").get<std::int64_t>();
    meta.criteria = m.at("criteria").get<std::map<std::string, double>>();
    return model;
  } catch (const json::exception& e) {
    raise(Errc::ParseError, std::string("malformed model file: ") + e.what());
  }
}

void save_model(const std::string& path, const ModelFile& model) {
  auto out = open_out(path);
  out << model_to_json(model);
}

ModelFile load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::IoError, "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return model_from_json(buffer.str());
}

// ---------------------------------------------------------------------------

std::vector<int> assign_groups(const Responsibilities& resp) {
  std::vector<int> labels(static_cast<std::size_t>(resp.rows()));
  for (Eigen::Index i = 0; i < resp.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index r = 1; r < resp.cols(); ++r) {
      if (resp(i, r) > resp(i, best)) best = r;
    }
    labels[static_cast<std::size_t>(i)] = static_cast<int>(best) + 1;
  }
  return labels;
}

AssignmentRule AssignmentRule::parse(std::string_view text) {
  AssignmentRule rule;
  if (text == "max-resp") return rule;
  constexpr std::string_view prefix = "threshold:";
  if (text.substr(0, prefix.size()) == prefix) {
    rule.kind = Kind::Threshold;
    const std::string value(text.substr(prefix.size()));
    rule.threshold = parse_number(value, 0, 0);
    return rule;
  }
  raise(Errc::InvalidArgument, "unknown assignment rule '" + std::string(text) + "'");
}

double component_mean(const MixtureParams& params, int component, const Eigen::RowVectorXd& z_row) {
  return z_row.dot(params.phi.col(component)) / params.rho(component);
}

int choose_component(const AssignmentRule& rule, const MixtureParams& params, const Eigen::RowVectorXd& z_row,
                     std::optional<double> y) {
  const int c = params.components();
  if (c == 1) return 0;
  if (rule.kind == AssignmentRule::Kind::MaxResponsibility) {
    if (!y) {
      Eigen::Index best = 0;
      params.pi.maxCoeff(&best);
      return static_cast<int>(best);
    }
    Eigen::VectorXd yy(1);
    yy(0) = *y;
    const Eigen::MatrixXd logd = component_log_densities(params, yy, z_row);
    Eigen::Index best = 0;
    for (Eigen::Index r = 1; r < c; ++r) {
      if (logd(0, r) > logd(0, best)) best = r;
    }
    return static_cast<int>(best);
  }

  if (c != 2) raise(Errc::InvalidArgument, "threshold assignment needs exactly two components");
  if (!y) raise(Errc::InvalidArgument, "threshold assignment needs an observed response");
  int null_component = rule.null_component;
  if (null_component < 0) {
    const Eigen::Index len = params.coeff_length() - 1;
    const double n0 = (params.phi.col(0).tail(len) / params.rho(0)).norm();
    const double n1 = (params.phi.col(1).tail(len) / params.rho(1)).norm();
    null_component = n1 < n0 ? 1 : 0;
  }
  if (null_component > 1) raise(Errc::InvalidArgument, "null component out of range");
  return *y < rule.threshold ? 1 - null_component : null_component;
}

double relative_prediction_error(const Eigen::VectorXd& y, const Eigen::VectorXd& y_hat) {
  if (y.size() != y_hat.size()) raise(Errc::InvalidShape, "prediction length mismatch");
  const double denom = y.squaredNorm();
  if (!(denom > 0.0)) raise(Errc::UndefinedMetric, "relative prediction error undefined when sum y^2 = 0");
  return (y - y_hat).squaredNorm() / denom;
}

double cvrpe(const CurveData& data, const WaveletSpec& wavelet, const FitProtocol& protocol,
             const AssignmentRule& rule, std::size_t workers) {
  const Eigen::Index n = data.size();
  if (n < 2) raise(Errc::TooFewObservations, "leave-one-out needs at least two observations");
  if (!(data.y.squaredNorm() > 0.0)) raise(Errc::UndefinedMetric, "relative prediction error undefined when sum y^2 = 0");
  const DesignMatrix z = build_design(data.curves, wavelet);
  Eigen::VectorXd y_hat(n);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t left_out) {
    const auto i = static_cast<Eigen::Index>(left_out);
    DesignMatrix z_train(n - 1, z.cols());
    Eigen::VectorXd y_train(n - 1);
    z_train.topRows(i) = z.topRows(i);
    z_train.bottomRows(n - 1 - i) = z.bottomRows(n - 1 - i);
    y_train.head(i) = data.y.head(i);
    y_train.tail(n - 1 - i) = data.y.tail(n - 1 - i);
    const FitResult fit = protocol(y_train, z_train);
    const Eigen::RowVectorXd row = z.row(i);
    const int r = choose_component(rule, fit.params, row, data.y(i));
    y_hat(i) = component_mean(fit.params, r, row);
  }, workers);
  return relative_prediction_error(data.y, y_hat);
}

}  // namespace wfmr
