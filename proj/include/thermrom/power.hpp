#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "thermrom/partition.hpp"

namespace thermrom {

/// Per-block power levels over time, piecewise-constant over each step:
/// row k holds the power applied during (k*dt, (k+1)*dt].
struct PowerTrace {
    double time_step = 0.0;
    std::vector<std::string> block_ids;
    Eigen::MatrixXd powers;  // n_steps x n_blocks, watts

    int n_steps() const { return int(powers.rows()); }
    void validate() const;

    /// Powers of row `step` reordered to the partition's block order.
    /// Throws when a partition block has no column in the trace.
    Eigen::VectorXd row_for(const HsbPartition& part, int step) const;

    /// Column permutation mapping partition block n -> trace column.
    std::vector<int> column_map(const HsbPartition& part) const;
};

/// Volumetric power density (W/m^3) per cell: each block's power spread
/// uniformly over its footprint cells. Linear in `block_powers`.
Eigen::VectorXd power_density_field(const ChipModel& model, const HsbPartition& part,
                                    const Eigen::VectorXd& block_powers);

/// Cell-integrated power (W per cell), the source term the solver consumes.
Eigen::VectorXd cell_power(const ChipModel& model, const HsbPartition& part,
                           const Eigen::VectorXd& block_powers);

} // namespace thermrom
