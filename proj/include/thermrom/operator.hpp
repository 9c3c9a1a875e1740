#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "thermrom/model.hpp"

namespace thermrom {

/// Discrete heat-conduction operator on the structured grid.
///
/// The semi-discrete system is  M dT/dt = -A T + b + q  with
///   A : conduction matrix (W/K), 7-point stencil, harmonic-mean face
///       conductances, Robin faces adding h*area on the diagonal;
///   M : lumped heat capacity rho*C*V per cell (J/K);
///   b : Robin source h*area*t_ambient per boundary cell (W);
///   q : cell-integrated power (W).
/// A is symmetric; interior row sums are zero, Robin rows sum to h*area.
/// The same A closes the reduced model, which keeps projection and direct
/// solves on one discretization.
struct ThermalOperator {
    Grid3D grid;
    Eigen::SparseMatrix<double> conduction;  // A
    Eigen::VectorXd heat_capacity;           // M diagonal
    Eigen::VectorXd boundary_source;         // b
    Eigen::VectorXd robin_conductance;       // h*area per cell (the Robin diagonal part)

    /// Boundary source re-based to a reference temperature: b - t_ref * (A 1).
    /// Zero whenever every Robin face shares t_ambient == t_ref.
    Eigen::VectorXd relative_boundary_source(double t_ref) const {
        return boundary_source - t_ref * robin_conductance;
    }
};

ThermalOperator assemble_operator(const ChipModel& model);

} // namespace thermrom
