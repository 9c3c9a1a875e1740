#include "thermrom/rom.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "thermrom/error.hpp"

namespace thermrom {

RomSystem assemble_rom(const PodBasis& basis, const ChipModel& model, const ThermalOperator& op,
                       std::span<const std::int64_t> footprint) {
    const Eigen::MatrixXd& eta = basis.modes;
    if (eta.rows() != op.grid.cell_count())
        throw ValidationError("assemble_rom: basis and operator grids disagree");
    if (footprint.empty())
        throw ValidationError("assemble_rom: block footprint is empty");

    RomSystem rom;
    rom.hsb_id = basis.hsb_id;
    rom.capacitance = eta.transpose() * op.heat_capacity.asDiagonal() * eta;
    rom.conductance = eta.transpose() * (op.conduction * eta);
    // Symmetrize away round-off; both projections are symmetric in exact arithmetic.
    rom.capacitance = 0.5 * (rom.capacitance + rom.capacitance.transpose()).eval();
    rom.conductance = 0.5 * (rom.conductance + rom.conductance.transpose()).eval();

    Eigen::LLT<Eigen::MatrixXd> cap_chol(rom.capacitance);
    if (cap_chol.info() != Eigen::Success)
        throw NumericalError("assemble_rom: reduced capacitance matrix is not positive definite "
                             "(degenerate or mis-scaled modes)");
    Eigen::LDLT<Eigen::MatrixXd> cond_chol(rom.conductance);
    if (cond_chol.info() != Eigen::Success || (cond_chol.vectorD().array() < -1e-10 * rom.conductance.norm()).any())
        throw NumericalError("assemble_rom: reduced conduction matrix is indefinite");

    // Uniform power density over the footprint: P(t)/V_fp inside, zero outside,
    // so the modal load is P(t) * (integral of the mode over the footprint) / V_fp.
    const double cell_volume = op.grid.cell_volume();
    const double footprint_volume = double(footprint.size()) * cell_volume;
    Eigen::VectorXd pproj = Eigen::VectorXd::Zero(eta.cols());
    for (std::int64_t c : footprint) {
        if (c < 0 || c >= eta.rows())
            throw ValidationError("assemble_rom: footprint cell outside the basis domain");
        pproj += eta.row(c).transpose() * cell_volume;
    }
    rom.power_projection = pproj / footprint_volume;

    // Boundary load relative to ambient; exactly zero when every Robin face
    // sits at the reference ambient.
    rom.boundary_source = eta.transpose() * op.relative_boundary_source(model.ambient());
    return rom;
}

Eigen::MatrixXd integrate_odes(const RomSystem& rom, const Eigen::VectorXd& block_power_per_step,
                               double time_step, int n_modes) {
    if (time_step <= 0.0)
        throw ValidationError("integrate_odes: time step must be positive");
    const int total = rom.mode_count();
    const int m = n_modes <= 0 ? total : n_modes;
    if (m > total)
        throw ValidationError("integrate_odes: requested more modes than the ROM holds");
    const auto n_steps = block_power_per_step.size();

    const Eigen::MatrixXd cap = rom.capacitance.topLeftCorner(m, m) / time_step;
    Eigen::MatrixXd lhs = cap + rom.conductance.topLeftCorner(m, m);
    Eigen::LDLT<Eigen::MatrixXd> solver(lhs);
    if (solver.info() != Eigen::Success)
        throw NumericalError("integrate_odes: reduced backward-Euler matrix is singular");

    const Eigen::VectorXd pproj = rom.power_projection.head(m);
    const Eigen::VectorXd bsrc = rom.boundary_source.head(m);

    Eigen::MatrixXd coeffs(n_steps + 1, m);
    coeffs.row(0).setZero();
    Eigen::VectorXd a = Eigen::VectorXd::Zero(m);
    for (Eigen::Index k = 0; k < n_steps; ++k) {
        Eigen::VectorXd rhs = cap * a + block_power_per_step[k] * pproj + bsrc;
        a = solver.solve(rhs);
        coeffs.row(k + 1) = a.transpose();
    }
    return coeffs;
}

Eigen::VectorXd reconstruct_relative(const PodBasis& basis, const Eigen::VectorXd& coeffs) {
    if (coeffs.size() > basis.modes.cols())
        throw ValidationError("reconstruct_relative: more coefficients than modes");
    return basis.modes.leftCols(coeffs.size()) * coeffs;
}

std::int64_t box_local_index(const DomainBox& box, const Grid3D& grid, std::int64_t global) {
    const auto [i, j, k] = grid.unflat(global);
    if (i < box.i0 || i >= box.i0 + box.nx || j < box.j0 || j >= box.j0 + box.ny) return -1;
    return (std::int64_t(k) * box.ny + (j - box.j0)) * box.nx + (i - box.i0);
}

Eigen::MatrixXd evaluate_points(const Grid3D& grid, double ambient,
                                const std::vector<const PodBasis*>& bases,
                                const std::vector<const Eigen::MatrixXd*>& trajectories,
                                int n_modes, std::span<const std::int64_t> cells,
                                std::span<const int> steps) {
    if (bases.size() != trajectories.size())
        throw ValidationError("evaluate_points: one trajectory per basis required");
    Eigen::MatrixXd out(cells.size(), steps.size());
    out.setConstant(ambient);

    for (std::size_t n = 0; n < bases.size(); ++n) {
        const PodBasis& basis = *bases[n];
        const Eigen::MatrixXd& traj = *trajectories[n];
        const int m = n_modes <= 0 ? int(traj.cols()) : n_modes;
        if (m > traj.cols() || m > basis.modes.cols())
            throw ValidationError("evaluate_points: requested more modes than available");
        for (Eigen::Index p = 0; p < Eigen::Index(cells.size()); ++p) {
            std::int64_t row = cells[p];
            if (basis.domain) {
                row = box_local_index(*basis.domain, grid, cells[p]);
                if (row < 0) continue; // truncated fields vanish outside their box
            }
            const Eigen::RowVectorXd mode_row = basis.modes.row(row).head(m);
            for (Eigen::Index s = 0; s < Eigen::Index(steps.size()); ++s)
                out(p, s) += mode_row.dot(traj.row(steps[s]).head(m));
        }
    }
    return out;
}

} // namespace thermrom
