#pragma once

#include <Eigen/Core>
#include <span>
#include <string>
#include <vector>

#include "thermrom/operator.hpp"
#include "thermrom/pod.hpp"

namespace thermrom {

/// Reduced system for one heat source block:
///   C da/dt + G a = P(t) * pproj + b
/// C and G are the projections of the lumped capacity and of the discrete
/// conduction operator (Robin terms included), so the reduced dynamics and
/// the direct solver share one discretization.
struct RomSystem {
    std::string hsb_id;
    Eigen::MatrixXd capacitance;      // C, J/K scale
    Eigen::MatrixXd conductance;      // G, W/K scale
    Eigen::VectorXd boundary_source;  // b, W scale (zero for a uniform ambient)
    Eigen::VectorXd power_projection; // pproj per mode, 1/m^3 scale

    int mode_count() const { return int(capacitance.rows()); }
};

/// Projects the operator onto the basis. `footprint` lists the block's cells
/// in the same index space the modes live on (global cells for a full-chip
/// basis, box-local cells for a truncated one).
RomSystem assemble_rom(const PodBasis& basis, const ChipModel& model, const ThermalOperator& op,
                       std::span<const std::int64_t> footprint);

/// Backward-Euler integration of the reduced ODEs with a_0 = 0, using the
/// leading `n_modes` modes (all when <= 0). Row k of the result holds a(t_k);
/// powers[k] drives the step from t_k to t_{k+1}. The time-invariant matrix
/// (C/dt + G) is factored once.
Eigen::MatrixXd integrate_odes(const RomSystem& rom, const Eigen::VectorXd& block_power_per_step,
                               double time_step, int n_modes = 0);

/// Ambient-relative field of one block at one step: modes * a.
Eigen::VectorXd reconstruct_relative(const PodBasis& basis, const Eigen::VectorXd& coeffs);

/// Flat index of `global` inside a lateral sub-box, or -1 when outside.
std::int64_t box_local_index(const DomainBox& box, const Grid3D& grid, std::int64_t global);

/// Temperatures at selected (cell, step) pairs without touching the rest of
/// the grid: sum over blocks of mode values times coefficients, plus ambient.
/// `trajectories[n]` is the integrate_odes output for basis n.
Eigen::MatrixXd evaluate_points(const Grid3D& grid, double ambient,
                                const std::vector<const PodBasis*>& bases,
                                const std::vector<const Eigen::MatrixXd*>& trajectories,
                                int n_modes, std::span<const std::int64_t> cells,
                                std::span<const int> steps);

} // namespace thermrom
