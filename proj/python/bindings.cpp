#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "safectrl/barrier.hpp"
#include "safectrl/controller.hpp"
#include "safectrl/dynamics.hpp"
#include "safectrl/errors.hpp"
#include "safectrl/kinematics.hpp"
#include "safectrl/metrics.hpp"
#include "safectrl/mlp.hpp"
#include "safectrl/qp.hpp"
#include "safectrl/rbf.hpp"
#include "safectrl/scenario.hpp"
#include "safectrl/simulate.hpp"
#include "safectrl/trace_io.hpp"

namespace py = pybind11;
using namespace safectrl;

PYBIND11_MODULE(_safectrl, m) {
  m.doc() = "Safety-critical manipulator control: dynamics, barrier "
            "controller, QP safety filter and scenario simulator.";

  py::register_exception<SingularJacobian>(m, "SingularJacobianError");
  py::register_exception<BarrierViolation>(m, "BarrierViolationError");
  py::register_exception<QpInfeasible>(m, "QpInfeasibleError");

  py::class_<ManipulatorModel>(m, "ManipulatorModel")
      .def_static("load", &ManipulatorModel::load, py::arg("path"))
      .def_readonly("dof", &ManipulatorModel::dof)
      .def_readonly("task_dim", &ManipulatorModel::task_dim);

  m.def(
      "forward_kinematics",
      [](const ManipulatorModel& model, const Eigen::VectorXd& q) {
        return forward_kinematics(model, q);
      },
      py::arg("model"), py::arg("q"),
      "Frame origin positions 0..dof; the last entry is the end-effector.");
  m.def("jacobian", &jacobian, py::arg("model"), py::arg("q"),
        py::arg("frame_index"));
  m.def("jacobian_dot", &jacobian_dot, py::arg("model"), py::arg("q"),
        py::arg("qd"), py::arg("frame_index"));
  m.def("pseudo_inverse", &pseudo_inverse, py::arg("J"),
        py::arg("sigma_tol") = 1e-8);
  m.def(
      "joint_space_dynamics",
      [](const ManipulatorModel& model, const Eigen::VectorXd& q,
         const Eigen::VectorXd& qd) {
        const JointDynamics jd = joint_space_dynamics(model, q, qd);
        return py::make_tuple(jd.M, jd.C, jd.g);
      },
      py::arg("model"), py::arg("q"), py::arg("qd"),
      "Returns (M, C, g) with C from Christoffel symbols.");
  m.def(
      "task_space_dynamics",
      [](const ManipulatorModel& model, const Eigen::VectorXd& q,
         const Eigen::VectorXd& qd) {
        const TaskDynamics td = task_space_dynamics(model, q, qd);
        py::dict out;
        out["Mx"] = td.Mx;
        out["Cx"] = td.Cx;
        out["gx"] = td.gx;
        out["J"] = td.J;
        out["J_pinv"] = td.J_pinv;
        out["Jdot"] = td.Jdot;
        return out;
      },
      py::arg("model"), py::arg("q"), py::arg("qd"));

  m.def("phi", &phi, py::arg("z1"), py::arg("x_d"), py::arg("k"),
        "Integral-mean barrier weight with the analytic z -> 0 limit.");
  m.def("v1_component", &v1_component, py::arg("z1"), py::arg("x_d"),
        py::arg("k"), py::arg("abs_tol") = 1e-10);

  m.def(
      "solve_qp",
      [](const Eigen::MatrixXd& H, const Eigen::VectorXd& f,
         const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
        QpProblem qp{H, f, A, b};
        const QpSolution sol = solve_qp(qp);
        py::dict out;
        out["u"] = sol.u;
        out["active_set"] = sol.active_set;
        out["kkt_residual"] = sol.kkt_residual;
        out["iterations"] = sol.iterations;
        return out;
      },
      py::arg("H"), py::arg("f"), py::arg("A"), py::arg("b"),
      "min 1/2 u'Hu + f'u  s.t.  Au <= b (dense dual active set).");

  py::class_<RbfEstimator>(m, "RbfEstimator")
      .def_static(
          "make",
          [](int nodes, int output_dim,
             const std::vector<std::pair<double, double>>& ranges, double rho,
             double w_bound, std::uint64_t seed) {
            return RbfEstimator::make(nodes, output_dim, ranges, rho, w_bound,
                                      seed);
          },
          py::arg("nodes"), py::arg("output_dim"), py::arg("ranges"),
          py::arg("rho") = 0.4, py::arg("w_bound") = 50.0, py::arg("seed") = 1)
      .def_readwrite("W_hat", &RbfEstimator::W_hat)
      .def_readonly("centers", &RbfEstimator::centers)
      .def_readonly("width", &RbfEstimator::width)
      .def("basis", &RbfEstimator::basis, py::arg("chi"))
      .def("estimate", &RbfEstimator::estimate, py::arg("chi"))
      .def("adapt", &RbfEstimator::adapt, py::arg("chi"), py::arg("z2"),
           py::arg("dt"));

  py::class_<Scenario>(m, "Scenario")
      .def_property_readonly("name", [](const Scenario& s) { return s.name; })
      .def_property_readonly("duration",
                             [](const Scenario& s) { return s.duration; })
      .def_property_readonly(
          "controller", [](const Scenario& s) { return s.controller_variant; });

  m.def(
      "load_scenario",
      [](const std::string& path,
         const std::vector<std::pair<std::string, std::string>>& overrides) {
        return load_scenario(path, overrides);
      },
      py::arg("path"),
      py::arg("overrides") = std::vector<std::pair<std::string, std::string>>{});

  m.def(
      "run_scenario",
      [](const Scenario& sc) {
        const SimResult r = run_scenario(sc);
        py::dict out;
        out["completed"] = r.completed;
        out["failure"] = r.failure;
        out["columns"] = r.trace.columns;
        Eigen::MatrixXd rows(r.trace.size(),
                             static_cast<int>(r.trace.columns.size()));
        for (int i = 0; i < r.trace.size(); ++i)
          rows.row(i) = r.trace.rows[i].transpose();
        out["trace"] = rows;
        py::dict met;
        met["path_length_m"] = r.metrics.path_length;
        met["rotation_deg"] = r.metrics.rotation_deg;
        met["amse_tracking"] = r.metrics.amse_tracking;
        met["max_eucl_tracking"] = r.metrics.max_eucl_tracking;
        met["max_eucl_avoidance"] = r.metrics.max_eucl_avoidance;
        met["min_obstacle_distance_m"] = r.metrics.min_obstacle_distance;
        out["metrics"] = met;
        return out;
      },
      py::arg("scenario"),
      "Runs the closed loop; returns the trace as a matrix plus metrics.");

  m.attr("__version__") = "0.1.0";
}
