#include "safectrl/barrier.hpp"

#include <cmath>

#include "safectrl/errors.hpp"

namespace safectrl {

namespace {

constexpr double kLimitSwitch = 1e-9;  // |z| below this uses the limit branch

void check_inside(double u, double k) {
  // Guard in squared form: raise a controlled error instead of letting the
  // fraction overflow to Inf/NaN near the wall.
  if (!(k > 0.0)) throw BarrierViolation(-1, u, k);
  if (k * k - u * u < 1e-9 * k * k) throw BarrierViolation(-1, u, k);
}

// 15-point Gauss-Legendre nodes/weights on [-1, 1].
constexpr int kGlN = 15;
constexpr double kGlX[kGlN] = {
    -0.9879925180204854, -0.9372733924007060, -0.8482065834104272,
    -0.7244177313601701, -0.5709721726085388, -0.3941513470775634,
    -0.2011940939974345, 0.0,                  0.2011940939974345,
    0.3941513470775634,  0.5709721726085388,  0.7244177313601701,
    0.8482065834104272,  0.9372733924007060,  0.9879925180204854};
constexpr double kGlW[kGlN] = {
    0.0307532419961173, 0.0703660474881081, 0.1071592204671719,
    0.1395706779261543, 0.1662692058169939, 0.1861610000155622,
    0.1984314853271116, 0.2025782419255613, 0.1984314853271116,
    0.1861610000155622, 0.1662692058169939, 0.1395706779261543,
    0.1071592204671719, 0.0703660474881081, 0.0307532419961173};

// 7-point rule, used as the error reference for adaptivity.
constexpr int kGl7N = 7;
constexpr double kGl7X[kGl7N] = {
    -0.9491079123427585, -0.7415311855993945, -0.4058451513773972, 0.0,
    0.4058451513773972,  0.7415311855993945,  0.9491079123427585};
constexpr double kGl7W[kGl7N] = {
    0.1294849661688697, 0.2797053914892767, 0.3818300505051189,
    0.4179591836734694, 0.3818300505051189, 0.2797053914892767,
    0.1294849661688697};

double v1_integrand(double sigma, double x_d, double k) {
  const double u = sigma + x_d;
  return sigma * k * k / (k * k - u * u);
}

double panel(const double* xs, const double* ws, int n, double a, double b,
             double x_d, double k) {
  const double h = 0.5 * (b - a), c = 0.5 * (a + b);
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += ws[i] * v1_integrand(c + h * xs[i], x_d, k);
  return h * s;
}

double adaptive(double a, double b, double x_d, double k, double tol, int depth) {
  const double coarse = panel(kGl7X, kGl7W, kGl7N, a, b, x_d, k);
  const double fine = panel(kGlX, kGlW, kGlN, a, b, x_d, k);
  if (std::abs(fine - coarse) <= tol || depth >= 40) return fine;
  const double mid = 0.5 * (a + b);
  return adaptive(a, mid, x_d, k, 0.5 * tol, depth + 1) +
         adaptive(mid, b, x_d, k, 0.5 * tol, depth + 1);
}

}  // namespace

void BarrierBounds::check_desired_inside(const Eigen::VectorXd& x_d) const {
  for (int i = 0; i < size(); ++i) {
    if (k_c[i] + x_d[i] <= 0.0 || k_c[i] - x_d[i] <= 0.0)
      throw BarrierViolation(i, x_d[i], k_c[i]);
  }
}

void BarrierBounds::check_state_inside(const Eigen::VectorXd& x) const {
  for (int i = 0; i < size(); ++i)
    if (std::abs(x[i]) >= k_c[i]) throw BarrierViolation(i, x[i], k_c[i]);
}

double barrier_fraction(double x1, double k) {
  check_inside(x1, k);
  return k * k / (k * k - x1 * x1);
}

double phi_limit(double x_d, double k) {
  check_inside(x_d, k);
  return k * k / (k * k - x_d * x_d);
}

double phi(double z1, double x_d, double k) {
  const double x1 = z1 + x_d;
  check_inside(x1, k);
  check_inside(x_d, k);
  if (std::abs(z1) < kLimitSwitch) return phi_limit(x_d, k);
  // ln of the cross ratio, rearranged so the numerator never cancels:
  // R - 1 = 2 k z / ((k - x1)(k + x_d)).
  const double l = std::log1p(2.0 * k * z1 / ((k - x1) * (k + x_d)));
  return 0.5 * k / z1 * l;
}

PhiDerivs phi_derivs(double z1, double x_d, double k) {
  const double x1 = z1 + x_d;
  check_inside(x1, k);
  check_inside(x_d, k);
  PhiDerivs out{};
  out.value = phi(z1, x_d, k);

  const double k2 = k * k;
  const double Dd = k2 - x_d * x_d;
  if (std::abs(z1) < 1e-6 * k) {
    // Series of the integral mean around z = 0: Phi = f + f' z/2 + f'' z^2/6
    // with f(u) = k^2/(k^2-u^2).
    const double f1 = 2.0 * k2 * x_d / (Dd * Dd);
    const double f2 = 2.0 * k2 * (k2 + 3.0 * x_d * x_d) / (Dd * Dd * Dd);
    out.d_z = 0.5 * f1 + f2 * z1 / 3.0;
    out.d_xd = f1 + 0.5 * f2 * z1;
    return out;
  }
  const double frac1 = k2 / (k2 - x1 * x1);
  const double fracd = k2 / Dd;
  out.d_z = (frac1 - out.value) / z1;
  out.d_xd = (frac1 - fracd) / z1;
  return out;
}

double v1_component(double z1, double x_d, double k, double abs_tol) {
  const double x1 = z1 + x_d;
  check_inside(x1, k);
  check_inside(x_d, k);
  if (z1 == 0.0) return 0.0;
  const double v = adaptive(0.0, z1, x_d, k, abs_tol, 0);
  return v;
}

}  // namespace safectrl
