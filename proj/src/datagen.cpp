#include "gpsq/datagen.hpp"

#include "gpsq/io.hpp"
#include "gpsq/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace gpsq {

namespace {

Vector guarded_std(const Matrix& M, const Vector& mean) {
  Vector s(M.cols());
  for (Eigen::Index c = 0; c < M.cols(); ++c) {
    const double var =
        M.rows() > 0 ? (M.col(c).array() - mean(c)).square().sum() / M.rows() : 0.0;
    s(c) = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
  return s;
}

Vector column_mean(const Matrix& M) {
  return M.rows() > 0 ? Vector(M.colwise().mean().transpose()) : Vector(Vector::Zero(M.cols()));
}

Vector to_vector(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

bool projected_ok(const State& x) {
  return x.q.allFinite() && x.qdot.allFinite() && std::isfinite(x.t);
}

}  // namespace

NormStats NormStats::compute(const Matrix& X, const Matrix& Y) {
  NormStats s;
  s.x_mean = column_mean(X);
  s.x_std = guarded_std(X, s.x_mean);
  s.y_mean = column_mean(Y);
  s.y_std = guarded_std(Y, s.y_mean);
  return s;
}

NormStats NormStats::identity(int dx, int dy) {
  return {Vector::Zero(dx), Vector::Ones(dx), Vector::Zero(dy), Vector::Ones(dy)};
}

Matrix NormStats::normalize_x(const Matrix& X) const {
  return ((X.rowwise() - x_mean.transpose()).array().rowwise() / x_std.transpose().array())
      .matrix();
}
Matrix NormStats::denormalize_x(const Matrix& Xn) const {
  return ((Xn.array().rowwise() * x_std.transpose().array()).matrix().rowwise() +
          x_mean.transpose());
}
Matrix NormStats::normalize_y(const Matrix& Y) const {
  return ((Y.rowwise() - y_mean.transpose()).array().rowwise() / y_std.transpose().array())
      .matrix();
}
Matrix NormStats::denormalize_y(const Matrix& Yn) const {
  return ((Yn.array().rowwise() * y_std.transpose().array()).matrix().rowwise() +
          y_mean.transpose());
}

Matrix sample_constrained_inputs(const BenchmarkSystem& sys, int count, std::uint64_t seed) {
  if (count < 1) throw DomainError("sample_constrained_inputs: count must be >= 1");
  const InputLayout& L = sys.layout;
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix X(count, L.dim());
  long attempts = 0;
  const long max_attempts = 100L * count;
  int filled = 0;
  while (filled < count) {
    if (++attempts > max_attempts) {
      throw NumericalError("sample_constrained_inputs: manifold projection failed for " +
                           sys.name);
    }
    Eigen::RowVectorXd row(L.dim());
    for (int c = 0; c < L.dim(); ++c) {
      const Interval& iv = sys.domain[c];
      row(c) = iv.lo + unit(rng) * iv.width();
    }
    State x = L.state(row);
    sys.project(x, sys.theta_star());
    if (!projected_ok(x)) continue;
    X.row(filled++) = L.row(x);
  }
  return X;
}

Matrix analytic_targets(const BenchmarkSystem& sys, const Matrix& X) {
  Matrix Y(X.rows(), sys.layout.n);
  for (Eigen::Index k = 0; k < X.rows(); ++k) {
    Y.row(k) = sys.acceleration(sys.layout.state(X.row(k))).transpose();
  }
  return Y;
}

Dataset make_dataset(const BenchmarkSystem& sys, int count, double sigma_y, std::uint64_t seed) {
  if (sigma_y < 0.0) throw DomainError("make_dataset: sigma_y must be >= 0");
  Dataset d;
  d.X = sample_constrained_inputs(sys, count, seed);
  d.Y = analytic_targets(sys, d.X);
  if (sigma_y > 0.0) {
    const NormStats clean = NormStats::compute(d.X, d.Y);
    Rng rng(derive_seed(seed, 1));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index k = 0; k < d.Y.rows(); ++k) {
      for (Eigen::Index i = 0; i < d.Y.cols(); ++i) {
        d.Y(k, i) += sigma_y * clean.y_std(i) * normal(rng);
      }
    }
  }
  d.sigma_y = sigma_y;
  d.norm = NormStats::compute(d.X, d.Y);
  d.system_name = sys.name;
  d.theta_p_used = sys.theta_star();
  d.layout = sys.layout;
  d.seed = seed;
  return d;
}

Matrix prediction_grid(const BenchmarkSystem& sys, int points_per_dim) {
  if (points_per_dim < 2) throw DomainError("prediction_grid: points_per_dim must be >= 2");
  const std::vector<int> cols = sys.free_cols();
  const InputLayout& L = sys.layout;
  Eigen::Index rows = 1;
  for (std::size_t i = 0; i < cols.size(); ++i) rows *= points_per_dim;

  Eigen::RowVectorXd base(L.dim());
  for (int c = 0; c < L.dim(); ++c) base(c) = sys.domain[c].lo;

  Matrix G(rows, L.dim());
  std::vector<int> idx(cols.size(), 0);
  for (Eigen::Index r = 0; r < rows; ++r) {
    Eigen::RowVectorXd row = base;
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const Interval& iv = sys.domain[cols[j]];
      row(cols[j]) = iv.lo + iv.width() * idx[j] / (points_per_dim - 1);
    }
    State x = L.state(row);
    sys.project(x, sys.theta_star());
    G.row(r) = L.row(x);
    for (std::size_t j = cols.size(); j-- > 0;) {
      if (++idx[j] < points_per_dim) break;
      idx[j] = 0;
    }
  }
  return G;
}

std::vector<std::string> dataset_columns(const InputLayout& layout) {
  std::vector<std::string> names;
  for (int i = 1; i <= layout.n; ++i) names.push_back("q" + std::to_string(i));
  for (int i = 1; i <= layout.n; ++i) names.push_back("qd" + std::to_string(i));
  names.push_back("t");
  for (int i = 1; i <= layout.n_u; ++i) names.push_back("u" + std::to_string(i));
  for (int i = 1; i <= layout.n; ++i) names.push_back("y" + std::to_string(i));
  return names;
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
  std::filesystem::path p = csv_path;
  p.replace_extension(".meta.json");
  return p;
}

void save_dataset(const Dataset& d, const std::filesystem::path& path,
                  const std::string& config_hash) {
  std::ostringstream csv;
  csv << provenance_line(config_hash) << '\n';
  const auto cols = dataset_columns(d.layout);
  for (std::size_t i = 0; i < cols.size(); ++i) csv << (i ? "," : "") << cols[i];
  csv << '\n';
  for (Eigen::Index k = 0; k < d.X.rows(); ++k) {
    for (Eigen::Index c = 0; c < d.X.cols(); ++c) csv << (c ? "," : "") << format_double(d.X(k, c));
    for (Eigen::Index c = 0; c < d.Y.cols(); ++c) csv << ',' << format_double(d.Y(k, c));
    csv << '\n';
  }
  write_file_atomic(path, csv.str());

  nlohmann::json meta;
  meta["gpsq_version"] = kVersion;
  meta["config_hash"] = config_hash;
  meta["system"] = d.system_name;
  meta["n"] = d.layout.n;
  meta["n_u"] = d.layout.n_u;
  meta["theta_p"] = to_std(d.theta_p_used);
  meta["sigma_y"] = d.sigma_y;
  meta["seed"] = d.seed;
  meta["rows"] = d.X.rows();
  meta["norm"] = {{"x_mean", to_std(d.norm.x_mean)},
                  {"x_std", to_std(d.norm.x_std)},
                  {"y_mean", to_std(d.norm.y_mean)},
                  {"y_std", to_std(d.norm.y_std)}};
  write_file_atomic(sidecar_path(path), meta.dump(2) + "\n");
}

Dataset load_dataset(const std::filesystem::path& path) {
  Dataset d;
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_file(sidecar_path(path)));
    d.system_name = meta.at("system").get<std::string>();
    d.layout = {meta.at("n").get<int>(), meta.at("n_u").get<int>()};
    d.theta_p_used = to_vector(meta.at("theta_p"));
    d.sigma_y = meta.at("sigma_y").get<double>();
    d.seed = meta.at("seed").get<std::uint64_t>();
    const auto& nm = meta.at("norm");
    d.norm = {to_vector(nm.at("x_mean")), to_vector(nm.at("x_std")), to_vector(nm.at("y_mean")),
              to_vector(nm.at("y_std"))};
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("dataset metadata " + sidecar_path(path).string() + ": " + e.what());
  }

  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset " + path.string());
  std::string line;
  long line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) header.push_back(cell);
    break;
  }
  if (header.empty()) throw ParseError("dataset " + path.string() + " is empty");

  std::map<std::string, std::size_t> where;
  for (std::size_t i = 0; i < header.size(); ++i) where[header[i]] = i;
  const auto expected = dataset_columns(d.layout);
  std::vector<std::size_t> order;
  for (const auto& name : expected) {
    auto it = where.find(name);
    if (it == where.end()) {
      throw ParseError("dataset " + path.string() + " is missing column '" + name + "'", line_no);
    }
    order.push_back(it->second);
  }

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " +
                           std::to_string(cells.size()),
                       line_no);
    }
    std::vector<double> vals;
    for (std::size_t idx : order) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(cells[idx], &used));
        if (used != cells[idx].size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw ParseError("invalid number '" + cells[idx] + "' in column '" + header[idx] + "'",
                         line_no);
      }
    }
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw ParseError("dataset " + path.string() + " has no rows");

  const int dx = d.layout.dim(), n = d.layout.n;
  d.X.resize(static_cast<Eigen::Index>(rows.size()), dx);
  d.Y.resize(static_cast<Eigen::Index>(rows.size()), n);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (int c = 0; c < dx; ++c) d.X(k, c) = rows[k][c];
    for (int c = 0; c < n; ++c) d.Y(k, c) = rows[k][dx + c];
  }
  return d;
}

}  // namespace gpsq
