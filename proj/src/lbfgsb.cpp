#include "gpsq/lbfgsb.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

namespace gpsq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = std::numeric_limits<double>::epsilon();

Vector project(const Vector& x, const Vector& lo, const Vector& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

// Limited-memory matrix B = theta I - W M W^T with W = [Y, theta S].
class Memory {
 public:
  explicit Memory(int capacity) : capacity_(capacity) {}

  int size() const { return static_cast<int>(s_.size()); }
  double theta() const { return theta_; }
  const Matrix& W() const { return W_; }
  const Matrix& M() const { return M_; }

  void clear() {
    s_.clear();
    y_.clear();
    theta_ = 1.0;
    W_.resize(0, 0);
    M_.resize(0, 0);
  }

  // Returns false when the pair fails the curvature test and is skipped.
  bool push(const Vector& s, const Vector& y) {
    const double sy = s.dot(y), yy = y.squaredNorm();
    if (!(sy > kEps * yy) || !std::isfinite(sy)) return false;
    if (size() == capacity_) {
      s_.pop_front();
      y_.pop_front();
    }
    s_.push_back(s);
    y_.push_back(y);
    theta_ = yy / sy;
    rebuild();
    return true;
  }

 private:
  void rebuild() {
    const int k = size();
    const Eigen::Index n = s_.front().size();
    Matrix S(n, k), Y(n, k);
    for (int i = 0; i < k; ++i) {
      S.col(i) = s_[i];
      Y.col(i) = y_[i];
    }
    W_.resize(n, 2 * k);
    W_ << Y, theta_ * S;
    const Matrix SY = S.transpose() * Y;
    Matrix mid = Matrix::Zero(2 * k, 2 * k);
    for (int i = 0; i < k; ++i) {
      mid(i, i) = -SY(i, i);
      for (int j = 0; j < i; ++j) {
        mid(k + i, j) = SY(i, j);  // L
        mid(j, k + i) = SY(i, j);  // L^T
      }
    }
    mid.bottomRightCorner(k, k) = theta_ * S.transpose() * S;
    M_ = mid.fullPivLu().inverse();
  }

  int capacity_;
  std::deque<Vector> s_, y_;
  double theta_ = 1.0;
  Matrix W_, M_;
};

struct CauchyPoint {
  Vector x;
  Vector c;  // W^T (x_cp - x)
};

// Generalized Cauchy point along the projected steepest-descent path.
CauchyPoint cauchy_point(const Vector& x, const Vector& g, const Vector& lo, const Vector& hi,
                         const Memory& mem) {
  const Eigen::Index n = x.size();
  const double theta = mem.theta();
  const int m2 = 2 * mem.size();
  Vector t(n), d(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (g(i) < 0.0) t(i) = hi(i) < kInf ? (x(i) - hi(i)) / g(i) : kInf;
    else if (g(i) > 0.0) t(i) = lo(i) > -kInf ? (x(i) - lo(i)) / g(i) : kInf;
    else t(i) = kInf;
    d(i) = t(i) == 0.0 ? 0.0 : -g(i);
  }
  std::vector<Eigen::Index> order;
  for (Eigen::Index i = 0; i < n; ++i)
    if (t(i) > 0.0 && t(i) < kInf) order.push_back(i);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return t(a) < t(b); });

  CauchyPoint cp{x, Vector::Zero(m2)};
  Vector p = m2 ? Vector(mem.W().transpose() * d) : Vector(0);
  double fp = -d.squaredNorm();
  double fpp = -theta * fp - (m2 ? p.dot(mem.M() * p) : 0.0);
  double dt_min = fpp > 0.0 ? -fp / fpp : kInf;
  double t_old = 0.0;

  std::size_t idx = 0;
  while (idx < order.size()) {
    const Eigen::Index b = order[idx];
    const double dt = t(b) - t_old;
    if (dt_min < dt) break;
    const double xb = d(b) > 0.0 ? hi(b) : lo(b);
    const double zb = xb - x(b);
    cp.x(b) = xb;
    if (m2) cp.c += dt * p;
    const double gb = g(b);
    if (m2) {
      const Vector wb = mem.W().row(b).transpose();
      const Vector Mw = mem.M() * wb;
      fp += dt * fpp + gb * gb + theta * gb * zb - gb * Mw.dot(cp.c);
      fpp += -theta * gb * gb - 2.0 * gb * Mw.dot(p) - gb * gb * wb.dot(Mw);
      p += gb * wb;
    } else {
      fp += dt * fpp + gb * gb + theta * gb * zb;
      fpp += -theta * gb * gb;
    }
    d(b) = 0.0;
    fpp = std::max(fpp, kEps * theta);
    dt_min = -fp / fpp;
    t_old = t(b);
    ++idx;
  }
  dt_min = std::max(dt_min, 0.0);
  if (!std::isfinite(dt_min)) dt_min = 0.0;
  t_old += dt_min;
  for (std::size_t j = idx; j < order.size(); ++j) {
    const Eigen::Index i = order[j];
    cp.x(i) = x(i) + t_old * d(i);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (t(i) == kInf) cp.x(i) = x(i) + t_old * d(i);
  }
  if (m2) cp.c += dt_min * p;
  cp.x = project(cp.x, lo, hi);
  return cp;
}

// Minimizes the quadratic model over the variables free at the Cauchy
// point, then backtracks into the box.
Vector subspace_min(const Vector& x, const Vector& g, const Vector& lo, const Vector& hi,
                    const Memory& mem, const CauchyPoint& cp) {
  const Eigen::Index n = x.size();
  std::vector<Eigen::Index> free;
  for (Eigen::Index i = 0; i < n; ++i)
    if (cp.x(i) > lo(i) && cp.x(i) < hi(i)) free.push_back(i);
  if (free.empty()) return cp.x;
  const double theta = mem.theta();
  const int m2 = 2 * mem.size();
  const Eigen::Index nf = static_cast<Eigen::Index>(free.size());

  Vector r(nf);
  Matrix WZ(nf, m2);
  const Vector Mc = m2 ? Vector(mem.M() * cp.c) : Vector(0);
  for (Eigen::Index j = 0; j < nf; ++j) {
    const Eigen::Index i = free[j];
    r(j) = g(i) + theta * (cp.x(i) - x(i));
    if (m2) {
      WZ.row(j) = mem.W().row(i);
      r(j) -= mem.W().row(i).dot(Mc);
    }
  }
  Vector du = -r / theta;
  if (m2) {
    const Vector v = mem.M() * (WZ.transpose() * r);
    const Matrix N = Matrix::Identity(m2, m2) - mem.M() * (WZ.transpose() * WZ) / theta;
    const Vector w = N.fullPivLu().solve(v);
    du -= WZ * w / (theta * theta);
  }
  double alpha = 1.0;
  for (Eigen::Index j = 0; j < nf; ++j) {
    const Eigen::Index i = free[j];
    if (du(j) > 0.0 && hi(i) < kInf) alpha = std::min(alpha, (hi(i) - cp.x(i)) / du(j));
    else if (du(j) < 0.0 && lo(i) > -kInf) alpha = std::min(alpha, (lo(i) - cp.x(i)) / du(j));
  }
  alpha = std::max(alpha, 0.0);
  Vector out = cp.x;
  for (Eigen::Index j = 0; j < nf; ++j) out(free[j]) += alpha * du(j);
  return project(out, lo, hi);
}

}  // namespace

double projected_gradient_norm(const Vector& x, const Vector& g, const Vector& lower,
                               const Vector& upper) {
  return (project(x - g, lower, upper) - x).cwiseAbs().maxCoeff();
}

LbfgsbResult minimize_lbfgsb(const Objective& fn, Vector x0, const Vector& lower,
                             const Vector& upper, const LbfgsbOptions& opt) {
  const Eigen::Index n = x0.size();
  if (lower.size() != n || upper.size() != n) throw DomainError("lbfgsb: bound size mismatch");
  if ((lower.array() > upper.array()).any()) throw DomainError("lbfgsb: lower bound above upper bound");
  if (opt.memory < 1 || opt.max_iters < 0) throw DomainError("lbfgsb: invalid options");

  LbfgsbResult res;
  res.x = project(x0, lower, upper);
  res.grad = Vector::Zero(n);
  res.f = fn(res.x, res.grad);
  res.evaluations = 1;
  res.history.push_back(res.f);
  if (!std::isfinite(res.f) || !res.grad.allFinite()) {
    res.stop_reason = "non-finite objective at start";
    return res;
  }

  Memory mem(opt.memory);
  Vector g_new(n);
  while (true) {
    if (n == 0 || projected_gradient_norm(res.x, res.grad, lower, upper) <= opt.pgtol) {
      res.stop_reason = "projected gradient below tolerance";
      break;
    }
    if (res.iterations >= opt.max_iters) {
      res.stop_reason = "iteration limit";
      break;
    }

    Vector d;
    bool steepest = mem.size() == 0;
    {
      const CauchyPoint cp = cauchy_point(res.x, res.grad, lower, upper, mem);
      d = subspace_min(res.x, res.grad, lower, upper, mem, cp) - res.x;
    }
    if (!(res.grad.dot(d) < 0.0)) {
      mem.clear();
      steepest = true;
      d = project(res.x - res.grad, lower, upper) - res.x;
    }
    double gd = res.grad.dot(d);
    if (!(gd < 0.0)) {
      res.stop_reason = "no descent direction";
      break;
    }

    // Backtracking Armijo search on [0, 1]; x + a d stays feasible.
    double alpha = steepest ? std::min(1.0, 1.0 / d.norm()) : 1.0;
    bool accepted = false;
    double f_new = kInf;
    Vector x_new;
    for (int ls = 0; ls < opt.max_linesearch; ++ls) {
      x_new = project(res.x + alpha * d, lower, upper);
      f_new = fn(x_new, g_new);
      ++res.evaluations;
      if (std::isfinite(f_new) && g_new.allFinite() && f_new <= res.f + 1e-4 * alpha * gd) {
        accepted = true;
        break;
      }
      double next = 0.1 * alpha;
      if (std::isfinite(f_new)) {
        const double denom = 2.0 * (f_new - res.f - gd * alpha);
        if (denom > 0.0) next = std::clamp(-gd * alpha * alpha / denom, 0.1 * alpha, 0.5 * alpha);
      }
      alpha = next;
    }
    if (!accepted) {
      if (mem.size() > 0) {
        mem.clear();
        continue;
      }
      res.stop_reason = "line search failed";
      break;
    }

    ++res.iterations;
    const double f_old = res.f;
    mem.push(x_new - res.x, g_new - res.grad);
    res.x = std::move(x_new);
    res.f = f_new;
    res.grad = g_new;
    res.history.push_back(res.f);
    if (std::abs(f_old - res.f) <= opt.ftol_abs) {
      res.stop_reason = "function change below tolerance";
      break;
    }
  }
  return res;
}

}  // namespace gpsq
