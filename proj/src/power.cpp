#include "thermrom/power.hpp"

#include <cmath>

#include "thermrom/error.hpp"

namespace thermrom {

void PowerTrace::validate() const {
    if (!(time_step > 0.0)) throw ValidationError("trace: time_step must be positive");
    if (powers.rows() < 1) throw ValidationError("trace: need at least one step");
    if (std::size_t(powers.cols()) != block_ids.size())
        throw ValidationError("trace: column count does not match block id count");
    if ((powers.array() < 0.0).any()) throw ValidationError("trace: powers must be nonnegative");
    if (!powers.allFinite()) throw ValidationError("trace: powers must be finite");
}

std::vector<int> PowerTrace::column_map(const HsbPartition& part) const {
    std::vector<int> map(part.size(), -1);
    for (std::size_t n = 0; n < part.size(); ++n) {
        for (std::size_t c = 0; c < block_ids.size(); ++c) {
            if (block_ids[c] == part.blocks[n].id) {
                map[n] = int(c);
                break;
            }
        }
        if (map[n] < 0)
            throw ValidationError("trace: no column for block '" + part.blocks[n].id + "'");
    }
    return map;
}

Eigen::VectorXd PowerTrace::row_for(const HsbPartition& part, int step) const {
    if (step < 0 || step >= n_steps())
        throw ValidationError("trace: step index out of range");
    const std::vector<int> map = column_map(part);
    Eigen::VectorXd row(part.size());
    for (std::size_t n = 0; n < part.size(); ++n) row[n] = powers(step, map[n]);
    return row;
}

Eigen::VectorXd power_density_field(const ChipModel& model, const HsbPartition& part,
                                    const Eigen::VectorXd& block_powers) {
    if (std::size_t(block_powers.size()) != part.size())
        throw ValidationError("power_density_field: block power count mismatch");
    Eigen::VectorXd field = Eigen::VectorXd::Zero(model.grid.cell_count());
    const double vcell = model.grid.cell_volume();
    for (std::size_t n = 0; n < part.size(); ++n) {
        const HeatSourceBlock& b = part.blocks[n];
        const double density = block_powers[n] / (double(b.cells.size()) * vcell);
        for (std::int64_t c : b.cells) field[c] = density;
    }
    return field;
}

Eigen::VectorXd cell_power(const ChipModel& model, const HsbPartition& part,
                           const Eigen::VectorXd& block_powers) {
    if (std::size_t(block_powers.size()) != part.size())
        throw ValidationError("cell_power: block power count mismatch");
    Eigen::VectorXd q = Eigen::VectorXd::Zero(model.grid.cell_count());
    for (std::size_t n = 0; n < part.size(); ++n) {
        const HeatSourceBlock& b = part.blocks[n];
        const double per_cell = block_powers[n] / double(b.cells.size());
        for (std::int64_t c : b.cells) q[c] = per_cell;
    }
    return q;
}

} // namespace thermrom
