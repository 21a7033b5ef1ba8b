#include "gpsq/train.hpp"

#include "gpsq/io.hpp"
#include "gpsq/random.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace gpsq {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct FamilyInfo {
  Family family;
  const char* name;
};

constexpr FamilyInfo kFamilies[] = {
    {Family::se, "se"},
    {Family::icm, "icm"},
    {Family::lmc, "lmc"},
    {Family::gp2_fixed_zero, "gp2-fixed-zero"},
    {Family::gp2_fixed_param, "gp2-fixed-param"},
    {Family::gp2_est_zero, "gp2-est-zero"},
    {Family::gp2_est_param, "gp2-est-param"},
};

MeanMode mean_mode(Family f) {
  return f == Family::gp2_fixed_param || f == Family::gp2_est_param ? MeanMode::parametric : MeanMode::zero;
}

double log_uniform(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

std::unique_ptr<ScalarKernel> unit_se(int d) { return std::make_unique<SquaredExponential>(1.0, Vector::Ones(d)); }

}  // namespace

std::string family_name(Family f) {
  for (const auto& i : kFamilies)
    if (i.family == f) return i.name;
  return "unknown";
}

Family parse_family(std::string_view name) {
  for (const auto& i : kFamilies)
    if (name == i.name) return i.family;
  throw DomainError("unknown model family '" + std::string(name) + "'");
}

std::vector<Family> all_families() {
  std::vector<Family> out;
  for (const auto& i : kFamilies) out.push_back(i.family);
  return out;
}

bool is_gp2(Family f) { return f != Family::se && f != Family::icm && f != Family::lmc; }

bool estimates_theta(Family f) { return f == Family::gp2_est_zero || f == Family::gp2_est_param; }

int default_restarts(Family f) { return is_gp2(f) ? 5 : 30; }

// ------------------------------------------------------------ template

void ModelTemplate::add(const std::string& name, double lo, double hi) {
  names_.push_back(name);
  const Eigen::Index k = lower_.size();
  lower_.conservativeResize(k + 1);
  upper_.conservativeResize(k + 1);
  lower_(k) = lo;
  upper_(k) = hi;
}

ModelTemplate::ModelTemplate(Family family, BenchmarkSystem sys, Dataset data)
    : family_(family), sys_(std::move(sys)), data_(std::move(data)) {
  if (data_.size() < 1) throw DomainError("fit: dataset is empty");
  if (data_.X.cols() != sys_.layout.dim() || data_.Y.cols() != sys_.layout.n) {
    throw DomainError("fit: dataset does not match system '" + sys_.name + "'");
  }
  const int n = sys_.layout.n, D = sys_.layout.dim();
  lower_.resize(0);
  upper_.resize(0);

  Vector sig_scale(n);  // scale of the latent function's variance
  if (is_gp2(family_)) {
    X_ = data_.X;
    Y_ = data_.Y;
    x_scale_ = data_.norm.x_std;
    y_scale_ = data_.norm.y_std.array().square();
    // abar may sit far from zero (gravity), so the signal variance is
    // bounded by the second moment rather than the variance.
    sig_scale = Y_.array().square().colwise().mean().transpose().max(y_scale_.array());
  } else {
    X_ = data_.norm.normalize_x(data_.X);
    Y_ = data_.norm.normalize_y(data_.Y);
    x_scale_ = Vector::Ones(D);
    y_scale_ = Vector::Ones(n);
    sig_scale = Vector::Ones(n);
  }

  auto se_bounds = [&](const std::string& pre, double s) {
    add(pre + "log_variance", std::log(1e-6 * s), std::log(1e4 * s));
    for (int d = 0; d < D; ++d) {
      add(pre + "log_lengthscale_" + std::to_string(d), std::log(1e-2 * x_scale_(d)), std::log(1e3 * x_scale_(d)));
    }
  };
  auto coreg_bounds = [&](const std::string& pre) {
    for (int r = 0; r < n; ++r) add(pre + "W_" + std::to_string(r), -10.0, 10.0);
    add(pre + "log_kappa", std::log(1e-6), std::log(1e2));
  };

  if (family_ == Family::icm || family_ == Family::lmc) {
    std::vector<CoregionalizedKernel::Term> terms;
    terms.push_back({Matrix::Zero(n, 1), 1.0, unit_se(D)});
    coreg_bounds("B1.");
    se_bounds("B1.SE.", 1.0);
    if (family_ == Family::lmc) {
      terms.push_back({Matrix::Zero(n, 1), 1.0, std::make_unique<BiasKernel>(1.0)});
      coreg_bounds("B2.");
      add("B2.bias.log_variance", std::log(1e-6), std::log(1e2));
      terms.push_back({Matrix::Zero(n, 1), 1.0, std::make_unique<LinearKernel>(Vector::Ones(D))});
      coreg_bounds("B3.");
      for (int d = 0; d < D; ++d) add("B3.linear.log_variance_" + std::to_string(d), std::log(1e-6), std::log(1e2));
    }
    kernel_proto_ = std::make_unique<CoregionalizedKernel>(std::move(terms));
  } else {
    std::vector<std::unique_ptr<ScalarKernel>> parts;
    for (int i = 0; i < n; ++i) {
      parts.push_back(unit_se(D));
      se_bounds("out" + std::to_string(i) + ".", sig_scale(i));
    }
    kernel_proto_ = std::make_unique<IndependentKernel>(std::move(parts));
  }
  n_kernel_ = lower_.size();
  if (n_kernel_ != kernel_proto_->num_params()) throw std::logic_error("ModelTemplate: kernel layout mismatch");

  for (int i = 0; i < n; ++i) {
    add("log_noise_" + std::to_string(i), std::log(1e-8 * y_scale_(i)), std::log(y_scale_(i)));
  }
  n_noise_ = n;

  if (estimates_theta(family_)) {
    theta_idx_ = sys_.trainable_theta;
    for (int i : theta_idx_) add("theta." + sys_.theta_names[i], sys_.theta_bounds[i].lo, sys_.theta_bounds[i].hi);
    n_theta_ = static_cast<Eigen::Index>(theta_idx_.size());
    if (mean_mode(family_) == MeanMode::parametric) {
      for (std::size_t i = 0; i < sys_.mean_param_names.size(); ++i) {
        add("mean." + sys_.mean_param_names[i], sys_.mean_param_bounds[i].lo, sys_.mean_param_bounds[i].hi);
      }
      n_mean_ = static_cast<Eigen::Index>(sys_.mean_param_names.size());
    }
  }
}

Vector ModelTemplate::init(std::uint64_t seed) const {
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector p(size());
  for (Eigen::Index k = 0; k < size(); ++k) {
    const std::string& nm = names_[k];
    const auto has = [&](const char* s) { return nm.find(s) != std::string::npos; };
    const int n = sys_.layout.n;
    if (has("log_lengthscale_")) {
      const int d = std::stoi(nm.substr(nm.rfind('_') + 1));
      p(k) = std::log(x_scale_(d) * log_uniform(rng, 0.1, 10.0));
    } else if (has("SE.log_variance")) {
      p(k) = std::log(log_uniform(rng, 0.1, 10.0));
    } else if (nm.rfind("out", 0) == 0 && has("log_variance")) {
      const int i = std::stoi(nm.substr(3, nm.find('.') - 3));
      p(k) = std::log(y_scale_(i) * log_uniform(rng, 0.1, 10.0));
    } else if (has("W_")) {
      p(k) = 2.0 * unit(rng) - 1.0;
    } else if (has("log_kappa") || has("bias.log_variance")) {
      p(k) = std::log(log_uniform(rng, 0.1, 1.0));
    } else if (has("linear.log_variance")) {
      p(k) = std::log(log_uniform(rng, 0.01, 1.0));
    } else if (nm.rfind("log_noise_", 0) == 0) {
      const int i = std::stoi(nm.substr(10));
      p(k) = std::log(1e-2 * y_scale_(i));
    } else {
      p(k) = lower_(k) + unit(rng) * (upper_(k) - lower_(k));
    }
    (void)n;
  }
  return p.cwiseMax(lower_).cwiseMin(upper_);
}

std::shared_ptr<const Kernel> ModelTemplate::kernel(const Vector& p) const {
  auto k = kernel_proto_->clone();
  k->set_params(p.head(n_kernel_));
  return std::shared_ptr<const Kernel>(std::move(k));
}

Vector ModelTemplate::noise(const Vector& p) const { return p.segment(n_kernel_, n_noise_).array().exp(); }

Gp2Model ModelTemplate::gp2_model(const Vector& p) const {
  if (!is_gp2(family_)) throw DomainError("gp2_model: family is not GP2");
  Vector theta = sys_.theta_star();
  for (Eigen::Index j = 0; j < n_theta_; ++j) theta(theta_idx_[j]) = p(n_kernel_ + n_noise_ + j);
  Vector mp = sys_.mean_params_star;
  for (Eigen::Index j = 0; j < n_mean_; ++j) mp(j) = p(n_kernel_ + n_noise_ + n_theta_ + j);
  const AbarMean mean = gp2_mu_abar(mean_mode(family_), sys_, mp);
  Gp2Model m = make_gp2_model(sys_, mean, kernel(p), noise(p));
  m.constraint.theta_p = theta;
  return m;
}

double ModelTemplate::lml(const Vector& p, Vector* grad) const {
  if (grad) grad->setZero(size());
  try {
    if (!is_gp2(family_)) {
      const GPModel g{zero_mean(sys_.layout.n), kernel(p), noise(p)};
      if (!grad) return log_marginal_likelihood(g, X_, Y_);
      const LmlGradient lg = lml_with_gradient(g, X_, Y_);
      grad->head(n_kernel_) = lg.kernel;
      grad->segment(n_kernel_, n_noise_) = lg.noise;
      return lg.value;
    }
    const Gp2Model m = gp2_model(p);
    if (!grad) return gp2_lml(m, X_, Y_);
    std::vector<int> local(theta_idx_.size());
    for (std::size_t j = 0; j < local.size(); ++j) local[j] = theta_idx_[j];
    const Gp2LmlGradient g = gp2_lml_with_gradient(m, X_, Y_, local);
    grad->head(n_kernel_) = g.kernel;
    grad->segment(n_kernel_, n_noise_) = g.noise;
    grad->segment(n_kernel_ + n_noise_, n_theta_) = g.theta;
    for (Eigen::Index j = 0; j < n_mean_; ++j) {
      const Eigen::Index k = n_kernel_ + n_noise_ + n_theta_ + j;
      const double h = 1e-6 * (1.0 + std::abs(p(k)));
      Vector pp = p, pm = p;
      pp(k) += h;
      pm(k) -= h;
      (*grad)(k) = (gp2_lml(gp2_model(pp), X_, Y_) - gp2_lml(gp2_model(pm), X_, Y_)) / (2.0 * h);
    }
    return g.value;
  } catch (const NumericalError&) {
    return kNegInf;
  } catch (const DomainError&) {
    return kNegInf;
  }
}

FittedModel ModelTemplate::make(const Vector& p) const { return FittedModel(family_, sys_, p, data_); }

Vector init_hyperparameters(Family family, const BenchmarkSystem& sys, const Dataset& data, std::uint64_t seed) {
  return ModelTemplate(family, sys, data).init(seed);
}

// ------------------------------------------------------------ fitted model

FittedModel::FittedModel(Family family, BenchmarkSystem sys, Vector params, Dataset data)
    : family_(family), sys_(std::move(sys)), params_(std::move(params)), data_(std::move(data)) {
  const ModelTemplate t(family_, sys_, data_);
  if (params_.size() != t.size()) throw DomainError("FittedModel: parameter vector has wrong size");
  if (is_gp2(family_)) {
    const Gp2Model m = t.gp2_model(params_);
    gp2_ = std::make_shared<Gp2Posterior>(m, data_.X, data_.Y);
    lml_ = gp2_lml(m, data_.X, data_.Y);
  } else {
    const GPModel g{zero_mean(sys_.layout.n), t.kernel(params_), t.noise(params_)};
    baseline_ = std::make_shared<PosteriorGP>(g, t.X_, t.Y_);
    lml_ = log_marginal_likelihood(g, t.X_, t.Y_);
  }
}

Vector FittedModel::theta_p() const {
  return gp2_ ? Vector(gp2_->model().constraint.theta_p) : Vector(sys_.theta_star());
}

Vector FittedModel::mean_params() const {
  if (!estimates_theta(family_) || mean_mode(family_) != MeanMode::parametric) return sys_.mean_params_star;
  const Eigen::Index k = static_cast<Eigen::Index>(sys_.mean_param_names.size());
  return params_.tail(k);
}

const Gp2Posterior& FittedModel::gp2() const {
  if (!gp2_) throw DomainError("model family '" + family_name(family_) + "' is not a GP2 model");
  return *gp2_;
}

Prediction FittedModel::predict(const Matrix& Xq, Covariance mode) const {
  if (gp2_) return gp2_->predict(Xq, mode);
  Prediction p = baseline_->predict(data_.norm.normalize_x(Xq), mode);
  const Vector& s = data_.norm.y_std;
  p.mean = data_.norm.denormalize_y(p.mean);
  if (mode != Covariance::none) p.var = (p.var.array().rowwise() * s.transpose().array().square()).matrix();
  if (mode == Covariance::full) {
    const Eigen::Index G = Xq.rows();
    for (Eigen::Index i = 0; i < s.size(); ++i)
      for (Eigen::Index j = 0; j < s.size(); ++j) p.cov.block(i * G, j * G, G, G) *= s(i) * s(j);
  }
  return p;
}

// ------------------------------------------------------------ fit

FitResult fit(Family family, const BenchmarkSystem& sys, const Dataset& data, const TrainConfig& config) {
  const int restarts = config.restarts > 0 ? config.restarts : default_restarts(family);
  const ModelTemplate t(family, sys, data);
  LbfgsbOptions opt;
  opt.max_iters = config.max_iters;
  opt.ftol_abs = config.tol;
  opt.memory = config.memory;

  std::vector<RestartTrace> traces;
  int best = -1;
  Vector best_x;
  double best_lml = kNegInf;
  for (int r = 0; r < restarts; ++r) {
    const Vector x0 = t.init(derive_seed(config.seed, static_cast<std::uint64_t>(r)));
    const Objective obj = [&t](const Vector& x, Vector& g) {
      const double v = t.lml(x, &g);
      g = -g;
      return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();
    };
    const LbfgsbResult res = minimize_lbfgsb(obj, x0, t.lower(), t.upper(), opt);
    RestartTrace tr;
    tr.restart = r;
    tr.initial_lml = -res.history.front();
    tr.final_lml = -res.f;
    tr.iterations = res.iterations;
    for (double h : res.history) tr.lml_history.push_back(-h);
    tr.status = res.stop_reason;
    tr.ok = std::isfinite(res.f);
    if (tr.ok && tr.final_lml > best_lml) {
      best = r;
      best_lml = tr.final_lml;
      best_x = res.x;
    }
    traces.push_back(std::move(tr));
  }
  if (best < 0) throw TrainingError("all " + std::to_string(restarts) + " restarts diverged", traces);
  return {t.make(best_x), best, std::move(traces)};
}

std::string traces_csv(const std::vector<RestartTrace>& traces) {
  std::ostringstream out;
  out << "restart,iter,lml\n";
  for (const auto& tr : traces)
    for (std::size_t i = 0; i < tr.lml_history.size(); ++i)
      out << tr.restart << ',' << i << ',' << format_double(tr.lml_history[i]) << '\n';
  return out.str();
}

}  // namespace gpsq
