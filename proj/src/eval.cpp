#include "gpsq/eval.hpp"

#include "gpsq/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace gpsq {

double rmse_normalized(const Matrix& pred, const Matrix& truth, const NormStats& norm) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) throw DomainError("rmse: shape mismatch");
  if (norm.y_std.size() != pred.cols()) throw DomainError("rmse: normalization has wrong output count");
  if (pred.size() == 0) return 0.0;
  const Matrix z = (pred - truth).array().rowwise() / norm.y_std.transpose().array();
  return std::sqrt(z.squaredNorm() / static_cast<double>(z.size()));
}

double max_constraint_error(const Matrix& pred, const Matrix& X, const InputLayout& layout,
                            const ConstraintModel& constraint) {
  if (pred.rows() != X.rows() || pred.cols() != layout.n) throw DomainError("max_constraint_error: shape mismatch");
  double worst = 0.0;
  for (Eigen::Index k = 0; k < X.rows(); ++k) {
    const ConstraintEval c = constraint(layout.state(X.row(k)));
    const double e = (c.A * pred.row(k).transpose() - c.b).cwiseAbs().maxCoeff();
    worst = std::isnan(e) ? e : std::max(worst, e);
    if (std::isnan(worst)) break;
  }
  return worst;
}

// ------------------------------------------------------------ rollouts

AccelerationFn analytic_acceleration(const BenchmarkSystem& sys) {
  return [sys](const State& x) { return sys.acceleration(x); };
}

AccelerationFn model_acceleration(const FittedModel& model) {
  return [&model](const State& x) {
    const Matrix row = model.system().layout.row(x);
    return Vector(model.predict(row, Covariance::none).mean.row(0).transpose());
  };
}

Trajectory rollout(const BenchmarkSystem& sys, const AccelerationFn& accel, const State& x0,
                   const RolloutOptions& opt) {
  if (opt.report_points < 1 || !(opt.t_end > x0.t)) throw DomainError("rollout: need t_end > t0 and report_points >= 1");
  const int n = sys.layout.n;
  const Vector u = x0.u;
  auto state_of = [&](double t, const Vector& y) {
    State x;
    x.q = y.head(n);
    x.qdot = y.tail(n);
    x.t = t;
    x.u = u;
    return x;
  };
  const OdeRhs rhs = [&](double t, const Vector& y) {
    Vector d(2 * n);
    d.head(n) = y.tail(n);
    d.tail(n) = accel(state_of(t, y));
    return d;
  };
  std::vector<double> times(static_cast<std::size_t>(opt.report_points) + 1);
  for (int i = 0; i <= opt.report_points; ++i) {
    times[static_cast<std::size_t>(i)] = x0.t + (opt.t_end - x0.t) * i / opt.report_points;
  }
  times.back() = opt.t_end;
  Vector y0(2 * n);
  y0 << x0.q, x0.qdot;

  Trajectory out;
  OdeSolution sol;
  try {
    sol = integrate_rk45(rhs, x0.t, y0, times, opt.ode);
  } catch (const IntegrationError& e) {
    sol = e.partial();
    out.complete = false;
    out.status = e.what();
  }
  out.t = sol.t;
  out.X.resize(static_cast<Eigen::Index>(sol.t.size()), sys.layout.dim());
  for (std::size_t i = 0; i < sol.t.size(); ++i) {
    out.X.row(static_cast<Eigen::Index>(i)) = sys.layout.row(state_of(sol.t[i], sol.y[i]));
  }
  return out;
}

Vector constraint_drift(const BenchmarkSystem& sys, const Trajectory& traj) {
  Vector d(traj.X.rows());
  for (Eigen::Index k = 0; k < d.size(); ++k) {
    d(k) = std::abs(sys.residual(sys.layout.state(traj.X.row(k)), sys.theta_star()));
  }
  return d;
}

double surface_distance(const Vector& q, const Vector& p) {
  if (q.size() != 3 || p.size() != 5) throw DomainError("surface_distance: expects q in R^3 and 5 parameters");
  // Gauss-Newton on r(s) = (s1 - q1, s2 - q2, h(s) - q3), started at the
  // vertical projection.
  Eigen::Vector2d s(q(0), q(1));
  for (int it = 0; it < 50; ++it) {
    const double h = surface_height(s(0), s(1), p);
    const double h1 = 2 * p(0) * s(0) + p(2) - p(3) * p(4) * std::sin(p(4) * s(0));
    const double h2 = 2 * p(1) * s(1);
    const Eigen::Vector3d r(s(0) - q(0), s(1) - q(1), h - q(2));
    Eigen::Matrix<double, 3, 2> J;
    J << 1, 0, 0, 1, h1, h2;
    const Eigen::Vector2d step = (J.transpose() * J).ldlt().solve(J.transpose() * r);
    s -= step;
    if (step.norm() <= 1e-15 * (1.0 + s.norm())) break;
  }
  const double h = surface_height(s(0), s(1), p);
  const double gn = Eigen::Vector3d(s(0) - q(0), s(1) - q(1), h - q(2)).norm();
  // Never report more than the vertical gap.
  return std::min(gn, std::abs(q(2) - surface_height(q(0), q(1), p)));
}

Vector surface_distance(const BenchmarkSystem& sys, const Trajectory& traj) {
  if (sys.name != "surface") throw DomainError("surface_distance: system '" + sys.name + "' is not the surface");
  Vector d(traj.X.rows());
  for (Eigen::Index k = 0; k < d.size(); ++k) {
    d(k) = surface_distance(Vector(traj.X.row(k).head(3).transpose()), sys.theta_star());
  }
  return d;
}

std::string trajectory_csv(const BenchmarkSystem& sys, const Trajectory& traj) {
  std::ostringstream out;
  const auto cols = dataset_columns(sys.layout);
  const int dx = sys.layout.dim();
  for (int c = 0; c < dx; ++c) out << cols[static_cast<std::size_t>(c)] << ',';
  out << "constraint_residual";
  const bool surf = sys.name == "surface";
  if (surf) out << ",surface_distance";
  out << '\n';
  const Vector drift = constraint_drift(sys, traj);
  const Vector dist = surf ? surface_distance(sys, traj) : Vector();
  for (Eigen::Index k = 0; k < traj.X.rows(); ++k) {
    for (int c = 0; c < dx; ++c) out << format_double(traj.X(k, c)) << ',';
    out << format_double(drift(k));
    if (surf) out << ',' << format_double(dist(k));
    out << '\n';
  }
  return out.str();
}

std::vector<bool> inside_convex_hull(const Matrix& points, const Matrix& cloud) {
  if (points.cols() != 2 || cloud.cols() != 2) throw DomainError("inside_convex_hull: expects 2-D points");
  std::vector<Eigen::Vector2d> pts;
  for (Eigen::Index k = 0; k < cloud.rows(); ++k) pts.emplace_back(cloud(k, 0), cloud(k, 1));
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y()); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  auto cross = [](const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  // Monotone chain, counter-clockwise.
  std::vector<Eigen::Vector2d> hull;
  if (pts.size() >= 3) {
    hull.resize(2 * pts.size());
    std::size_t h = 0;
    for (const auto& p : pts) {
      while (h >= 2 && cross(hull[h - 2], hull[h - 1], p) <= 0) --h;
      hull[h++] = p;
    }
    for (std::size_t i = pts.size() - 1, lower = h + 1; i-- > 0;) {
      while (h >= lower && cross(hull[h - 2], hull[h - 1], pts[i]) <= 0) --h;
      hull[h++] = pts[i];
    }
    hull.resize(h - 1);
  }
  std::vector<bool> inside(static_cast<std::size_t>(points.rows()), false);
  if (hull.size() < 3) return inside;
  for (Eigen::Index k = 0; k < points.rows(); ++k) {
    const Eigen::Vector2d q(points(k, 0), points(k, 1));
    bool in = true;
    for (std::size_t i = 0; i < hull.size() && in; ++i) {
      const auto& a = hull[i];
      const auto& b = hull[(i + 1) % hull.size()];
      in = cross(a, b, q) >= -1e-12 * (1.0 + (b - a).norm());
    }
    inside[static_cast<std::size_t>(k)] = in;
  }
  return inside;
}

// ------------------------------------------------------------ reports

namespace {

Stat stat_of(const std::vector<double>& v) {
  Stat s;
  if (v.empty()) return s;
  double sum = 0.0;
  s.min = v.front();
  s.max = v.front();
  for (double x : v) {
    sum += x;
    s.min = std::min(s.min, x);
    s.max = std::max(s.max, x);
  }
  s.mean = sum / static_cast<double>(v.size());
  // Rounding can push the mean a hair outside [min, max].
  s.mean = std::clamp(s.mean, s.min, s.max);
  return s;
}

constexpr const char* kRunsHeader = "system,family,run,seed,rmse,max_constraint_error,runtime_s,status";

}  // namespace

std::vector<CellSummary> summarize(const std::vector<RunRecord>& records) {
  std::vector<CellSummary> cells;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  std::vector<std::vector<double>> rmse, cerr;
  for (const RunRecord& r : records) {
    const auto key = std::make_pair(r.system, r.family);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, cells.size()).first;
      cells.push_back({r.system, r.family, 0, 0, {}, {}, 0.0, {}});
      rmse.emplace_back();
      cerr.emplace_back();
    }
    CellSummary& c = cells[it->second];
    c.seeds.push_back(r.seed);
    c.runtime_s += r.runtime_s;
    if (r.status != "ok") {
      ++c.gaps;
      continue;
    }
    ++c.runs;
    rmse[it->second].push_back(r.rmse);
    cerr[it->second].push_back(r.max_constraint_error);
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    cells[i].rmse = stat_of(rmse[i]);
    cells[i].constraint_error = stat_of(cerr[i]);
  }
  return cells;
}

std::string runs_csv(const std::vector<RunRecord>& records) {
  std::ostringstream out;
  out << kRunsHeader << '\n';
  for (const RunRecord& r : records) {
    out << r.system << ',' << r.family << ',' << r.run << ',' << r.seed << ',' << format_double(r.rmse) << ','
        << format_double(r.max_constraint_error) << ',' << format_double(r.runtime_s) << ',' << r.status << '\n';
  }
  return out.str();
}

std::vector<RunRecord> parse_runs_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  long line_no = 0;
  bool header = false;
  std::vector<RunRecord> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != kRunsHeader) throw ParseError("unexpected run table header", line_no);
      header = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 8) throw ParseError("expected 8 fields, got " + std::to_string(f.size()), line_no);
    RunRecord r;
    try {
      r.system = f[0];
      r.family = f[1];
      r.run = std::stoi(f[2]);
      r.seed = std::stoull(f[3]);
      r.rmse = std::stod(f[4]);
      r.max_constraint_error = std::stod(f[5]);
      r.runtime_s = std::stod(f[6]);
      r.status = f[7];
    } catch (const std::exception&) {
      throw ParseError("invalid number in run table", line_no);
    }
    out.push_back(std::move(r));
  }
  if (!header) throw ParseError("run table is empty");
  return out;
}

std::string summary_csv(const std::vector<CellSummary>& cells) {
  std::ostringstream out;
  out << "system,family,runs,gaps,rmse_mean,rmse_min,rmse_max,cerr_mean,cerr_min,cerr_max,runtime_s\n";
  for (const CellSummary& c : cells) {
    out << c.system << ',' << c.family << ',' << c.runs << ',' << c.gaps;
    if (c.runs == 0) {
      out << ",gap,gap,gap,gap,gap,gap";
    } else {
      for (double v : {c.rmse.mean, c.rmse.min, c.rmse.max, c.constraint_error.mean, c.constraint_error.min,
                       c.constraint_error.max}) {
        out << ',' << format_double(v);
      }
    }
    out << ',' << format_double(c.runtime_s) << '\n';
  }
  return out.str();
}

std::string summary_table(const std::vector<CellSummary>& cells) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-10s %-16s %5s  %-28s  %-10s\n", "system", "family", "runs",
                "rmse mean [min, max]", "max cerr");
  out << buf;
  for (const CellSummary& c : cells) {
    if (c.runs == 0) {
      std::snprintf(buf, sizeof buf, "%-10s %-16s %5d  %-28s  %-10s\n", c.system.c_str(), c.family.c_str(), 0, "--",
                    "--");
    } else {
      char rm[64];
      std::snprintf(rm, sizeof rm, "%.3g [%.3g, %.3g]", c.rmse.mean, c.rmse.min, c.rmse.max);
      std::snprintf(buf, sizeof buf, "%-10s %-16s %5d  %-28s  %-10.2e\n", c.system.c_str(), c.family.c_str(), c.runs,
                    rm, c.constraint_error.max);
    }
    out << buf;
    if (c.gaps > 0) out << "  (" << c.gaps << " run(s) missing or failed)\n";
  }
  return out.str();
}

}  // namespace gpsq
