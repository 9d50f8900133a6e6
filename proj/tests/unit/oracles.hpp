// Test-only oracles, independent of the library implementation paths they
// check.
#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>

#include "safectrl/model.hpp"

namespace safectrl::oracles {

inline std::string scenario_dir() { return SAFECTRL_SCENARIO_DIR; }
inline std::string model_path(const std::string& name) {
  return scenario_dir() + "/models/" + name;
}

// Trapezoid quadrature of the integral-mean barrier weight
// integral over [0,1] of k^2 / (k^2 - (s z + x_d)^2) ds with 1e4 panels.
inline double phi_quadrature(double z, double x_d, double k, int panels = 10000) {
  auto f = [&](double s) {
    const double u = s * z + x_d;
    return k * k / (k * k - u * u);
  };
  double acc = 0.5 * (f(0.0) + f(1.0));
  for (int i = 1; i < panels; ++i) acc += f(static_cast<double>(i) / panels);
  return acc / panels;
}

// Trapezoid quadrature of the barrier Lyapunov integrand over [0, z].
inline double v1_quadrature(double z, double x_d, double k, int panels = 200000) {
  auto f = [&](double sigma) {
    const double u = sigma + x_d;
    return sigma * k * k / (k * k - u * u);
  };
  double acc = 0.5 * (f(0.0) + f(z));
  for (int i = 1; i < panels; ++i) acc += f(z * i / panels);
  return acc * z / panels;
}

// Closed form of the same integral (derived independently by substitution):
// k^2 [ -ln(k^2-u^2)/2 - x_d/(2k) ln((k+u)/(k-u)) ] evaluated from x_d to z+x_d.
inline double v1_closed_form(double z, double x_d, double k) {
  auto anti = [&](double u) {
    return k * k * (-0.5 * std::log(k * k - u * u) -
                    x_d / (2.0 * k) * std::log((k + u) / (k - u)));
  };
  return anti(z + x_d) - anti(x_d);
}

// Independent homogeneous-transform chain (explicit 4x4 matrices) used as a
// second forward-kinematics implementation.
inline Eigen::Vector3d fk_homogeneous(const ManipulatorModel& model,
                                      const Eigen::VectorXd& q, int upto) {
  Eigen::Matrix4d T = Eigen::Matrix4d::Identity();
  for (int i = 0; i < upto; ++i) {
    const double th = q[i] + model.dh[i].theta_offset;
    const double a = model.dh[i].a, d = model.dh[i].d, al = model.dh[i].alpha;
    Eigen::Matrix4d Rz = Eigen::Matrix4d::Identity();
    Rz(0, 0) = std::cos(th); Rz(0, 1) = -std::sin(th);
    Rz(1, 0) = std::sin(th); Rz(1, 1) = std::cos(th);
    Eigen::Matrix4d Tz = Eigen::Matrix4d::Identity();
    Tz(2, 3) = d;
    Eigen::Matrix4d Tx = Eigen::Matrix4d::Identity();
    Tx(0, 3) = a;
    Eigen::Matrix4d Rx = Eigen::Matrix4d::Identity();
    Rx(1, 1) = std::cos(al); Rx(1, 2) = -std::sin(al);
    Rx(2, 1) = std::sin(al); Rx(2, 2) = std::cos(al);
    T = T * Rz * Tz * Tx * Rx;
  }
  return T.block<3, 1>(0, 3);
}

// Central finite difference of a vector-valued function of a vector.
inline Eigen::MatrixXd fd_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double h = 1e-6) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd J(f0.size(), x.size());
  for (int i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    J.col(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return J;
}

}  // namespace safectrl::oracles
