#include "thermrom/ensemble.hpp"

#include <chrono>
#include <sstream>

#include "thermrom/dns.hpp"
#include "thermrom/error.hpp"
#include "thermrom/parallel.hpp"

namespace thermrom {

void TrainingConfig::validate() const {
    if (n_steps < 2) throw ValidationError("training: need at least two excitation steps");
    if (hold_steps < 1) throw ValidationError("training: hold_steps must be >= 1");
    if (p_max <= 0.0) throw ValidationError("training: p_max must be positive");
    if (time_step <= 0.0) throw ValidationError("training: time step must be positive");
    if (sample_every < 1) throw ValidationError("training: sample_every must be >= 1");
    if (max_modes < 1) throw ValidationError("training: max_modes must be >= 1");
    if (linear_tolerance <= 0.0) throw ValidationError("training: linear tolerance must be positive");
    if (jobs < 1) throw ValidationError("training: jobs must be >= 1");
}

int Ensemble::min_mode_count() const {
    int m = blocks.empty() ? 0 : blocks.front().basis.mode_count();
    for (const BlockRom& b : blocks) m = std::min(m, b.basis.mode_count());
    return m;
}

Eigen::VectorXd Ensemble::equivalent_spectrum(const HsbPartition& part) const {
    if (part.size() != blocks.size())
        throw ValidationError("equivalent_spectrum: partition does not match the ensemble");
    std::vector<const PodBasis*> bases;
    int length = 0;
    for (const BlockRom& b : blocks) {
        bases.push_back(&b.basis);
        length = std::max(length, int(b.basis.spectrum.size()));
    }
    return thermrom::equivalent_spectrum(bases, part.area_fractions, length);
}

BlockRom train_ensemble_block(const ChipModel& model, const HsbPartition& part,
                              const ThermalOperator& op, const TrainingConfig& cfg,
                              std::size_t n) {
    ExcitationConfig ex;
    ex.n_steps = cfg.n_steps;
    ex.hold_steps = cfg.hold_steps;
    ex.p_max = cfg.p_max;
    ex.seed = cfg.seed + n;
    const PowerTrace excitation = random_excitation(part, n, cfg.time_step, ex);

    DnsConfig dns;
    dns.time_step = cfg.time_step;
    dns.linear_tolerance = cfg.linear_tolerance;

    const SnapshotSet snaps = collect_snapshots(model, part, excitation, dns, cfg.sample_every);
    PodBasis basis = solve_modes(snaps, cfg.max_modes);
    basis.hsb_id = part.blocks[n].id;
    RomSystem rom = assemble_rom(basis, model, op, part.blocks[n].cells);
    return {std::move(basis), std::move(rom)};
}

Ensemble train_ensemble(const ChipModel& model, const HsbPartition& part, const TrainingConfig& cfg) {
    cfg.validate();
    if (part.size() == 0) throw ValidationError("train_ensemble: empty partition");

    const ThermalOperator op = assemble_operator(model);

    Ensemble ens;
    ens.grid = model.grid;
    ens.ambient = model.ambient();
    ens.partition_hash = part.hash();
    ens.blocks.resize(part.size());
    parallel_for(part.size(), cfg.jobs,
                 [&](std::size_t n) { ens.blocks[n] = train_ensemble_block(model, part, op, cfg, n); });
    return ens;
}

EnsembleTrajectories integrate_ensemble(const Ensemble& ens, const HsbPartition& part,
                                        const PowerTrace& trace, int n_modes) {
    if (n_modes < 1) throw ValidationError("integrate_ensemble: need at least one mode");
    if (part.size() != ens.blocks.size())
        throw ValidationError("integrate_ensemble: partition does not match the ensemble");
    trace.validate();

    std::vector<std::string> deficient;
    for (const BlockRom& b : ens.blocks)
        if (b.basis.mode_count() < n_modes) deficient.push_back(b.basis.hsb_id);
    if (!deficient.empty()) {
        std::ostringstream msg;
        msg << "integrate_ensemble: " << n_modes << " modes requested but only fewer trained for:";
        for (const std::string& id : deficient) msg << ' ' << id;
        throw ValidationError(msg.str());
    }

    const std::vector<int> columns = trace.column_map(part);

    EnsembleTrajectories out;
    out.n_modes = n_modes;
    out.time_step = trace.time_step;
    out.coeffs.reserve(ens.blocks.size());

    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t n = 0; n < ens.blocks.size(); ++n)
        out.coeffs.push_back(integrate_odes(ens.blocks[n].rom, trace.powers.col(columns[n]),
                                            trace.time_step, n_modes));
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

namespace {

void check_step(const EnsembleTrajectories& traj, int step) {
    for (const Eigen::MatrixXd& c : traj.coeffs)
        if (step < 0 || step >= c.rows())
            throw ValidationError("ensemble reconstruction: step index out of range");
}

} // namespace

Eigen::VectorXd ensemble_field(const Ensemble& ens, const EnsembleTrajectories& traj, int step) {
    if (traj.coeffs.size() != ens.blocks.size())
        throw ValidationError("ensemble_field: trajectories do not match the ensemble");
    check_step(traj, step);

    Eigen::VectorXd field = Eigen::VectorXd::Constant(ens.grid.cell_count(), ens.ambient);
    for (std::size_t n = 0; n < ens.blocks.size(); ++n) {
        const PodBasis& basis = ens.blocks[n].basis;
        const Eigen::VectorXd a = traj.coeffs[n].row(step).transpose();
        if (!basis.domain) {
            field.noalias() += basis.modes.leftCols(a.size()) * a;
            continue;
        }
        const DomainBox& box = *basis.domain;
        const Eigen::VectorXd local = basis.modes.leftCols(a.size()) * a;
        for (int k = 0; k < ens.grid.nz; ++k)
            for (int jj = 0; jj < box.ny; ++jj)
                field.segment(ens.grid.flat(box.i0, box.j0 + jj, k), box.nx) +=
                    local.segment((std::int64_t(k) * box.ny + jj) * box.nx, box.nx);
    }
    return field;
}

Eigen::VectorXd ensemble_layer(const Ensemble& ens, const EnsembleTrajectories& traj, int step,
                               int k_layer) {
    if (traj.coeffs.size() != ens.blocks.size())
        throw ValidationError("ensemble_layer: trajectories do not match the ensemble");
    if (k_layer < 0 || k_layer >= ens.grid.nz)
        throw ValidationError("ensemble_layer: layer index out of range");
    check_step(traj, step);

    const std::int64_t plane = std::int64_t(ens.grid.nx) * ens.grid.ny;
    Eigen::VectorXd layer = Eigen::VectorXd::Constant(plane, ens.ambient);
    for (std::size_t n = 0; n < ens.blocks.size(); ++n) {
        const PodBasis& basis = ens.blocks[n].basis;
        const Eigen::VectorXd a = traj.coeffs[n].row(step).transpose();
        if (!basis.domain) {
            layer.noalias() +=
                basis.modes.middleRows(k_layer * plane, plane).leftCols(a.size()) * a;
            continue;
        }
        const DomainBox& box = *basis.domain;
        const std::int64_t box_plane = std::int64_t(box.nx) * box.ny;
        const Eigen::VectorXd local =
            basis.modes.middleRows(k_layer * box_plane, box_plane).leftCols(a.size()) * a;
        for (int jj = 0; jj < box.ny; ++jj)
            layer.segment(std::int64_t(box.j0 + jj) * ens.grid.nx + box.i0, box.nx) +=
                local.segment(std::int64_t(jj) * box.nx, box.nx);
    }
    return layer;
}

} // namespace thermrom
