#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>

#include <Eigen/Dense>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/Polynomials>

#include "stgp/error.hpp"
#include "stgp/spectral.hpp"

namespace stgp {

namespace {

using cd = std::complex<double>;

// Parameter layout for an order-r model:
//   [log α_1, log β_1, ..., log α_p, log β_p, (log γ), b_0 .. b_{r-1}]
// with denominator Π (s² + α_j s + β_j) · (s + γ), p = ⌊r/2⌋, γ present iff r odd.
struct Layout {
  int order;
  int sections() const { return order / 2; }
  bool first_order() const { return order % 2 == 1; }
  int denominator_params() const { return order; }
  int size() const { return 2 * order; }
};

Vector poly_mul(const Vector& a, const Vector& b) {
  Vector out = Vector::Zero(a.size() + b.size() - 1);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    for (Eigen::Index j = 0; j < b.size(); ++j) out(i + j) += a(i) * b(j);
  }
  return out;
}

SpectralFactor to_factor(const Layout& layout, const Vector& theta) {
  Vector den = Vector::Ones(1);
  for (int j = 0; j < layout.sections(); ++j) {
    Vector sec(3);
    sec << std::exp(theta(2 * j + 1)), std::exp(theta(2 * j)), 1.0;
    den = poly_mul(den, sec);
  }
  if (layout.first_order()) {
    Vector sec(2);
    sec << std::exp(theta(layout.order - 1)), 1.0;
    den = poly_mul(den, sec);
  }
  SpectralFactor f;
  f.denominator = den.head(layout.order);
  f.numerator = theta.tail(layout.order);
  if (f.numerator(0) < 0.0) f.numerator = -f.numerator;
  return f;
}

// Groups Hurwitz roots into the section parameterization. Complex roots are
// paired with their conjugates, real roots pairwise, a leftover real root
// becomes the first-order section.
Vector denominator_params_from_roots(const Layout& layout, std::vector<cd> roots) {
  for (auto& p : roots) {
    if (p.real() >= 0.0) p = {-std::max(std::abs(p.real()), 1e-8), p.imag()};
  }
  std::vector<cd> complex_upper;
  std::vector<double> reals;
  for (const auto& p : roots) {
    const double tol = 1e-9 * std::max(1.0, std::abs(p));
    if (std::abs(p.imag()) <= tol) {
      reals.push_back(p.real());
    } else if (p.imag() > 0.0) {
      complex_upper.push_back(p);
    }
  }
  std::sort(reals.begin(), reals.end());
  Vector theta(layout.denominator_params());
  int sec = 0;
  auto put_section = [&](double alpha, double beta) {
    theta(2 * sec) = std::log(alpha);
    theta(2 * sec + 1) = std::log(beta);
    ++sec;
  };
  for (const auto& p : complex_upper) put_section(-2.0 * p.real(), std::norm(p));
  std::size_t k = 0;
  for (; k + 1 < reals.size() && sec < layout.sections(); k += 2) {
    put_section(-(reals[k] + reals[k + 1]), reals[k] * reals[k + 1]);
  }
  if (layout.first_order()) {
    if (k >= reals.size()) throw ApproximationError("root pairing failed: no real root left");
    theta(layout.order - 1) = std::log(-reals[k]);
    ++k;
  }
  if (sec != layout.sections() || k != reals.size()) {
    throw ApproximationError("root pairing failed: inconsistent root multiset");
  }
  return theta;
}

std::vector<double> quadrature_weights(std::span<const double> grid) {
  const std::size_t n = grid.size();
  std::vector<double> w(n, 0.0);
  if (n == 1) {
    w[0] = 1.0;
    return w;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double lo = i == 0 ? grid[0] : 0.5 * (grid[i - 1] + grid[i]);
    const double hi = i + 1 == n ? grid[n - 1] : 0.5 * (grid[i] + grid[i + 1]);
    w[i] = std::max(hi - lo, 0.0);
  }
  return w;
}

struct Problem {
  std::vector<double> omega;
  std::vector<double> target;
  std::vector<double> sqrt_weight;

  Problem(const TemporalKernel& kernel, std::span<const double> grid, PsdWeighting weighting) {
    const bool spectrum_weight = weighting == PsdWeighting::Spectrum;
    const auto dw = quadrature_weights(grid);
    double z = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double s = kernel.psd(grid[i]);
      omega.push_back(grid[i]);
      target.push_back(s);
      const double wt = spectrum_weight ? s : kernel.psd(0.0);
      sqrt_weight.push_back(wt * dw[i]);
      z += wt * s * s * dw[i];
    }
    if (!(z > 0.0) || !std::isfinite(z)) {
      throw ApproximationError("target spectrum vanishes on the frequency grid");
    }
    for (auto& w : sqrt_weight) w = std::sqrt(w / z);
  }

  double objective(const SpectralFactor& f) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < omega.size(); ++i) {
      const double e = sqrt_weight[i] * (f.psd(omega[i]) - target[i]);
      acc += e * e;
    }
    return acc;
  }
};

// Model spectrum and its gradient with respect to theta at one frequency.
double model_psd(const Layout& layout, const Vector& theta, double w, Eigen::Ref<Vector> grad) {
  const double w2 = w * w;
  double den = 1.0;
  std::vector<double> parts;
  for (int j = 0; j < layout.sections(); ++j) {
    const double a = std::exp(theta(2 * j));
    const double b = std::exp(theta(2 * j + 1));
    const double d = (b - w2) * (b - w2) + a * a * w2;
    parts.push_back(d);
    den *= d;
  }
  if (layout.first_order()) {
    const double g = std::exp(theta(layout.order - 1));
    const double d = g * g + w2;
    parts.push_back(d);
    den *= d;
  }
  // B(iω) = Σ b_k (iω)^k = re + i·im
  const auto b = theta.tail(layout.order);
  double re = 0.0, im = 0.0;
  std::vector<double> basis(static_cast<std::size_t>(layout.order));
  double wk = 1.0;
  for (int k = 0; k < layout.order; ++k) {
    const double sign = ((k / 2) % 2 == 0) ? 1.0 : -1.0;
    basis[static_cast<std::size_t>(k)] = sign * wk;
    if (k % 2 == 0) {
      re += b(k) * sign * wk;
    } else {
      im += b(k) * sign * wk;
    }
    wk *= w;
  }
  const double num = re * re + im * im;
  const double s = num / den;
  for (int j = 0; j < layout.sections(); ++j) {
    const double a = std::exp(theta(2 * j));
    const double bb = std::exp(theta(2 * j + 1));
    const double d = parts[static_cast<std::size_t>(j)];
    grad(2 * j) = -s / d * (2.0 * a * a * w2);
    grad(2 * j + 1) = -s / d * (2.0 * (bb - w2) * bb);
  }
  if (layout.first_order()) {
    const double g = std::exp(theta(layout.order - 1));
    grad(layout.order - 1) = -s / parts.back() * (2.0 * g * g);
  }
  for (int k = 0; k < layout.order; ++k) {
    const double dn = 2.0 * (k % 2 == 0 ? re : im) * basis[static_cast<std::size_t>(k)];
    grad(layout.order + k) = dn / den;
  }
  return s;
}

struct Residuals {
  using Scalar = double;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
  using InputType = Vector;
  using ValueType = Vector;
  using JacobianType = Matrix;

  const Problem* problem;
  Layout layout;
  mutable int evaluations = 0;

  int inputs() const { return layout.size(); }
  int values() const { return static_cast<int>(problem->omega.size()); }

  int operator()(const Vector& theta, Vector& fvec) const {
    ++evaluations;
    Vector g(layout.size());
    for (int i = 0; i < values(); ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const double s = model_psd(layout, theta, problem->omega[ui], g);
      fvec(i) = problem->sqrt_weight[ui] * (s - problem->target[ui]);
    }
    return fvec.allFinite() ? 0 : -1;
  }

  int df(const Vector& theta, Matrix& jac) const {
    Vector g(layout.size());
    for (int i = 0; i < values(); ++i) {
      const auto ui = static_cast<std::size_t>(i);
      model_psd(layout, theta, problem->omega[ui], g);
      jac.row(i) = problem->sqrt_weight[ui] * g.transpose();
    }
    return jac.allFinite() ? 0 : -1;
  }
};

Vector theta_from(const Layout& layout, const std::vector<cd>& poles, const Vector& numerator) {
  Vector theta(layout.size());
  theta.head(layout.order) = denominator_params_from_roots(layout, poles);
  theta.tail(layout.order) = numerator;
  return theta;
}

// Embeds a lower-order factor at `layout.order` by multiplying numerator and
// denominator with the same polynomial. The spectrum is unchanged.
Vector embed(const Layout& layout, const SpectralFactor& lower, double wc) {
  const int extra = layout.order - lower.order();
  std::vector<cd> poles;
  for (Eigen::Index i = 0; i < lower.poles().size(); ++i) poles.push_back(lower.poles()(i));
  Vector num = lower.numerator;
  auto mul_root = [&](cd p) { poles.push_back(p); };
  for (int k = 0; k + 1 < extra; k += 2) {
    const cd p(-wc * (2.0 + k), wc * (1.0 + k));
    mul_root(p);
    mul_root(std::conj(p));
    Vector sec(3);
    sec << std::norm(p), -2.0 * p.real(), 1.0;
    num = poly_mul(num, sec);
  }
  if (extra % 2 == 1) {
    const double g = wc * (3.0 + extra);
    mul_root(cd(-g, 0.0));
    Vector sec(2);
    sec << g, 1.0;
    num = poly_mul(num, sec);
  }
  Vector padded = Vector::Zero(layout.order);
  padded.head(std::min<Eigen::Index>(num.size(), layout.order)) =
      num.head(std::min<Eigen::Index>(num.size(), layout.order));
  return theta_from(layout, poles, padded);
}

// Denominator from the truncated Taylor series of 1/S for the Gaussian
// spectrum: S(ω) ∝ exp(-σ²ω²/4) ≈ S(0) / P(ω²), P(x) = Σ_{n≤r} (σ²x/4)^n / n!.
Vector taylor_start(const Layout& layout, const TemporalKernel& kernel) {
  const int r = layout.order;
  const double c = kernel.decay() * kernel.decay() / 4.0;
  Vector coeffs(r + 1);
  double fact = 1.0;
  for (int n = 0; n <= r; ++n) {
    if (n > 0) fact *= n;
    coeffs(n) = std::pow(c, n) / fact;
  }
  Eigen::PolynomialSolver<double, Eigen::Dynamic> solver;
  solver.compute(coeffs);
  std::vector<cd> poles;
  for (Eigen::Index i = 0; i < solver.roots().size(); ++i) {
    // ω² = x  ⇒  s = iω with s² = -x; take the left-half-plane branch.
    cd s = std::sqrt(-solver.roots()(i));
    if (s.real() > 0.0) s = -s;
    poles.push_back(s);
  }
  Vector num = Vector::Zero(r);
  num(0) = std::sqrt(kernel.psd(0.0) / coeffs(r));
  return theta_from(layout, poles, num);
}

Vector random_start(const Layout& layout, const TemporalKernel& kernel, double wc,
                    std::mt19937_64& rng) {
  std::uniform_real_distribution<double> log_freq(std::log(0.2), std::log(5.0));
  std::uniform_real_distribution<double> damping(0.2, 1.2);
  std::normal_distribution<double> gauss(0.0, 0.1);
  Vector theta(layout.size());
  double d0 = 1.0;
  for (int j = 0; j < layout.sections(); ++j) {
    const double wn = wc * std::exp(log_freq(rng));
    const double zeta = damping(rng);
    theta(2 * j) = std::log(2.0 * zeta * wn);
    theta(2 * j + 1) = std::log(wn * wn);
    d0 *= wn * wn;
  }
  if (layout.first_order()) {
    const double g = wc * std::exp(log_freq(rng));
    theta(layout.order - 1) = std::log(g);
    d0 *= g;
  }
  const double b0 = std::sqrt(kernel.psd(0.0)) * d0;
  for (int k = 0; k < layout.order; ++k) {
    theta(layout.order + k) = (k == 0 ? b0 : b0 * gauss(rng)) * std::pow(wc, -k);
  }
  return theta;
}

void perturb_numerator(const Layout& layout, Vector& theta, double wc, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1e-3);
  const double b0 = std::max(std::abs(theta(layout.order)), 1e-12);
  for (int k = 1; k < layout.order; ++k) theta(layout.order + k) += b0 * gauss(rng) * std::pow(wc, -k);
}

}  // namespace

double psd_objective(const SpectralFactor& factor, const TemporalKernel& target,
                     std::span<const double> grid, PsdWeighting weighting) {
  return Problem(target, grid, weighting).objective(factor);
}

PsdApproximation approximate_psd(const TemporalKernel& target, int order,
                                 std::span<const double> grid, std::mt19937_64& rng,
                                 const PsdApproximationOptions& options) {
  if (order < 1) throw InputError("approximate_psd: order must be at least 1");
  if (grid.empty()) throw InputError("approximate_psd: frequency grid is empty");
  for (double w : grid) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw InputError("approximate_psd: grid frequencies must be finite and nonnegative");
    }
  }
  if (!std::is_sorted(grid.begin(), grid.end())) {
    throw InputError("approximate_psd: grid must be sorted ascending");
  }
  if (options.warm_start && options.warm_start->order() > order) {
    throw InputError("approximate_psd: warm start has higher order than requested");
  }

  const Layout layout{order};
  const Problem problem(target, grid, options.weighting);
  const double wc = 1.0 / target.decay();

  std::vector<Vector> starts;
  if (options.warm_start) {
    Vector w = embed(layout, *options.warm_start, wc);
    starts.push_back(w);
    perturb_numerator(layout, w, wc, rng);
    starts.push_back(w);
  }
  if (target.family() == TemporalFamily::SquaredExponential) {
    Vector t = taylor_start(layout, target);
    perturb_numerator(layout, t, wc, rng);
    starts.push_back(t);
  }
  for (int i = 0; i < options.restarts; ++i) starts.push_back(random_start(layout, target, wc, rng));

  PsdApproximation best;
  best.objective = std::numeric_limits<double>::infinity();
  std::ostringstream diag;
  for (std::size_t si = 0; si < starts.size(); ++si) {
    Residuals fn{&problem, layout};
    Vector theta = starts[si];
    const SpectralFactor initial = to_factor(layout, theta);
    const double initial_obj = problem.objective(initial);

    Eigen::LevenbergMarquardt<Residuals> lm(fn);
    lm.parameters.maxfev = options.max_evaluations;
    lm.parameters.xtol = 1e-14;
    lm.parameters.ftol = 1e-16;
    const auto status = lm.minimize(theta);

    SpectralFactor candidate = to_factor(layout, theta);
    double obj = problem.objective(candidate);
    if (!std::isfinite(obj) || !candidate.is_hurwitz() || !candidate.numerator.allFinite() ||
        obj > initial_obj) {
      candidate = initial;
      obj = initial_obj;
    }
    best.evaluations += fn.evaluations;
    ++best.starts;
    diag << " start " << si << ": status " << static_cast<int>(status) << " objective " << obj
         << ";";
    if (std::isfinite(obj) && candidate.is_hurwitz() && obj < best.objective) {
      best.objective = obj;
      best.factor = candidate;
    }
  }
  if (!std::isfinite(best.objective)) {
    throw ApproximationError("approximate_psd: no start produced a stable finite factor;" +
                             diag.str());
  }
  return best;
}

std::vector<PsdApproximation> approximate_psd_ladder(const TemporalKernel& target,
                                                     std::span<const int> orders,
                                                     std::span<const double> grid,
                                                     std::mt19937_64& rng,
                                                     const PsdApproximationOptions& options) {
  std::vector<PsdApproximation> out;
  PsdApproximationOptions opts = options;
  for (int r : orders) {
    out.push_back(approximate_psd(target, r, grid, rng, opts));
    opts.warm_start = out.back().factor;
  }
  return out;
}

}  // namespace stgp
