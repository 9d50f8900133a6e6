#include "safectrl/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "safectrl/errors.hpp"
#include "safectrl/simulate.hpp"

namespace safectrl {

Metrics compute_metrics(const SimTrace& trace) {
  Metrics m;
  const int n = trace.task_dim;
  m.max_err_tracking = Eigen::VectorXd::Zero(n);
  m.max_err_avoidance = Eigen::VectorXd::Zero(n);
  m.max_force = Eigen::VectorXd::Zero(n);
  m.min_obstacle_distance = std::numeric_limits<double>::infinity();
  if (trace.size() == 0) return m;

  static const char* axes = "xyz";
  std::vector<int> z1c(n), uc(n), pc(n), qc(trace.dof);
  for (int a = 0; a < n; ++a) {
    z1c[a] = trace.col(std::string("z1_") + axes[a]);
    uc[a] = trace.col(std::string("u_") + axes[a]);
    pc[a] = trace.col("p" + std::to_string(trace.dof) + "_" + axes[a]);
  }
  for (int i = 0; i < trace.dof; ++i)
    qc[i] = trace.col("q_" + std::to_string(i + 1));
  const int factive = trace.col("filter_active");
  std::vector<int> dc;
  for (int o = 1; o <= trace.n_obstacles; ++o)
    dc.push_back(trace.col("dist_" + std::to_string(o)));

  double sum_sq_tracking = 0.0;
  const int tcol = trace.col("t");
  for (int k = 0; k < trace.size(); ++k) {
    const Eigen::VectorXd& row = trace.rows[k];
    const bool active = row[factive] > 0.5;
    const bool settled = row[tcol] >= trace.settle_time;
    double eucl2 = 0.0;
    for (int a = 0; a < n; ++a) {
      const double e = std::abs(row[z1c[a]]);
      eucl2 += e * e;
      if (active)
        m.max_err_avoidance[a] = std::max(m.max_err_avoidance[a], e);
      else if (settled)
        m.max_err_tracking[a] = std::max(m.max_err_tracking[a], e);
      m.max_force[a] = std::max(m.max_force[a], std::abs(row[uc[a]]));
    }
    if (active) {
      m.max_eucl_avoidance = std::max(m.max_eucl_avoidance, std::sqrt(eucl2));
      ++m.samples_avoidance;
    } else if (settled) {
      m.max_eucl_tracking = std::max(m.max_eucl_tracking, std::sqrt(eucl2));
      sum_sq_tracking += eucl2;
      ++m.samples_tracking;
    }
    for (int c : dc) m.min_obstacle_distance = std::min(m.min_obstacle_distance, row[c]);

    if (k > 0) {
      double seg2 = 0.0;
      for (int a = 0; a < n; ++a) {
        const double d = row[pc[a]] - trace.rows[k - 1][pc[a]];
        seg2 += d * d;
      }
      m.path_length += std::sqrt(seg2);
      for (int i = 0; i < trace.dof; ++i)
        m.rotation_deg += std::abs(row[qc[i]] - trace.rows[k - 1][qc[i]]);
    }
  }
  m.rotation_deg *= 180.0 / 3.141592653589793;
  if (m.samples_tracking > 0)
    m.amse_tracking = sum_sq_tracking / (m.samples_tracking * n);
  return m;
}

void write_metrics(const Metrics& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("metrics", "cannot write " + path);
  char buf[64];
  auto put = [&](const char* key, double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << key << "=" << buf << "\n";
  };
  static const char* axes = "xyz";
  for (int a = 0; a < m.max_err_tracking.size(); ++a) {
    std::string key = std::string("e") + axes[a] + "_max_tracking";
    put(key.c_str(), m.max_err_tracking[a]);
  }
  put("ed_max_tracking", m.max_eucl_tracking);
  for (int a = 0; a < m.max_err_avoidance.size(); ++a) {
    std::string key = std::string("e") + axes[a] + "_max_avoidance";
    put(key.c_str(), m.max_err_avoidance[a]);
  }
  put("ed_max_avoidance", m.max_eucl_avoidance);
  put("amse_tracking", m.amse_tracking);
  put("path_length_m", m.path_length);
  put("rotation_deg", m.rotation_deg);
  put("min_obstacle_distance_m", m.min_obstacle_distance);
  for (int a = 0; a < m.max_force.size(); ++a) {
    std::string key = std::string("u") + axes[a] + "_max_N";
    put(key.c_str(), m.max_force[a]);
  }
  out << "samples_tracking=" << m.samples_tracking << "\n";
  out << "samples_avoidance=" << m.samples_avoidance << "\n";
}

}  // namespace safectrl
