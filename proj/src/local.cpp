#include "thermrom/local.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "thermrom/dns.hpp"
#include "thermrom/error.hpp"
#include "thermrom/parallel.hpp"

namespace thermrom {

TruncatedDomain truncate_domain(const ChipModel& model, const HsbPartition& part,
                                std::size_t block, const ThermalLengthTable& table,
                                double multiple) {
    if (block >= part.size()) throw ValidationError("truncate_domain: block index out of range");
    if (multiple <= 0.0) throw ValidationError("truncate_domain: multiple must be positive");
    const Grid3D& g = model.grid;
    const HeatSourceBlock& hsb = part.blocks[block];

    int imin = g.nx, imax = -1, jmin = g.ny, jmax = -1;
    for (std::int64_t c : hsb.cells) {
        const auto [i, j, k] = g.unflat(c);
        imin = std::min(imin, i);
        imax = std::max(imax, i);
        jmin = std::min(jmin, j);
        jmax = std::max(jmax, j);
    }

    // Table keyed on the footprint's larger side.
    const double width = std::max((imax - imin + 1) * g.dx, (jmax - jmin + 1) * g.dy);
    const double reach = multiple * table.lookup(width);
    const int pad_i = int(std::ceil(reach / g.dx));
    const int pad_j = int(std::ceil(reach / g.dy));

    TruncatedDomain dom;
    dom.hsb_id = hsb.id;
    const int i0 = std::max(0, imin - pad_i);
    const int i1 = std::min(g.nx - 1, imax + pad_i);
    const int j0 = std::max(0, jmin - pad_j);
    const int j1 = std::min(g.ny - 1, jmax + pad_j);
    dom.box = {i0, j0, i1 - i0 + 1, j1 - j0 + 1};
    dom.clipped = {imin - pad_i < 0, imax + pad_i > g.nx - 1, jmin - pad_j < 0,
                   jmax + pad_j > g.ny - 1};

    // Cut faces become adiabatic; faces that still lie on the chip boundary
    // keep the chip's conditions. z faces are always chip faces.
    dom.boundary = model.boundary;
    if (!(i0 == 0)) dom.boundary.at(Face::XMin) = FaceBc{};
    if (!(i1 == g.nx - 1)) dom.boundary.at(Face::XMax) = FaceBc{};
    if (!(j0 == 0)) dom.boundary.at(Face::YMin) = FaceBc{};
    if (!(j1 == g.ny - 1)) dom.boundary.at(Face::YMax) = FaceBc{};

    dom.footprint_local.reserve(hsb.cells.size());
    for (std::int64_t c : hsb.cells) {
        const std::int64_t local = box_local_index(dom.box, g, c);
        if (local < 0) throw NumericalError("truncate_domain: footprint fell outside its own box");
        dom.footprint_local.push_back(local);
    }
    std::sort(dom.footprint_local.begin(), dom.footprint_local.end());
    return dom;
}

ChipModel truncated_model(const ChipModel& model, const TruncatedDomain& dom) {
    ChipModel local;
    local.grid = model.grid;
    local.grid.nx = dom.box.nx;
    local.grid.ny = dom.box.ny;
    local.grid.origin[0] = model.grid.origin[0] + dom.box.i0 * model.grid.dx;
    local.grid.origin[1] = model.grid.origin[1] + dom.box.j0 * model.grid.dy;
    local.layers = model.layers;
    local.boundary = dom.boundary;
    local.device_layer = model.device_layer;
    // No floorplan: training partitions are built from the footprint cells.
    return local;
}

HsbPartition local_partition(const ChipModel& model, const HsbPartition& part, std::size_t block,
                             const TruncatedDomain& dom) {
    HsbPartition lp;
    lp.device_layer = part.device_layer;
    HeatSourceBlock b;
    b.id = dom.hsb_id;
    b.member_units = part.blocks[block].member_units;
    b.cells = dom.footprint_local;
    b.area = part.blocks[block].area;
    lp.blocks.push_back(std::move(b));
    lp.area_fractions = {1.0};
    (void)model;
    return lp;
}

namespace {

/// Everything that must coincide for two blocks to share a trained library.
struct ClassKey {
    int nx, ny;
    std::array<bool, 4> clipped;
    std::vector<std::int64_t> footprint_local;

    bool operator<(const ClassKey& o) const {
        return std::tie(nx, ny, clipped, footprint_local) <
               std::tie(o.nx, o.ny, o.clipped, o.footprint_local);
    }
};

} // namespace

std::vector<GenericBlockClass> classify_generic_blocks(const ChipModel& model,
                                                       const HsbPartition& part,
                                                       const ThermalLengthTable& table,
                                                       double multiple) {
    std::vector<GenericBlockClass> classes;
    std::map<ClassKey, std::size_t> index;
    for (std::size_t n = 0; n < part.size(); ++n) {
        TruncatedDomain dom = truncate_domain(model, part, n, table, multiple);
        ClassKey key{dom.box.nx, dom.box.ny, dom.clipped, dom.footprint_local};
        auto [it, fresh] = index.try_emplace(key, classes.size());
        if (fresh) {
            GenericBlockClass cls;
            cls.class_id = "gb" + std::to_string(classes.size());
            cls.canonical = dom;
            cls.members.push_back({dom.hsb_id, 0, 0});
            classes.push_back(std::move(cls));
        } else {
            GenericBlockClass& cls = classes[it->second];
            cls.members.push_back({dom.hsb_id, dom.box.i0 - cls.canonical.box.i0,
                                   dom.box.j0 - cls.canonical.box.j0});
        }
    }
    return classes;
}

int LocalEnsemble::min_mode_count() const {
    int m = class_roms.empty() ? 0 : class_roms.front().basis.mode_count();
    for (const BlockRom& b : class_roms) m = std::min(m, b.basis.mode_count());
    return m;
}

Eigen::VectorXd LocalEnsemble::equivalent_spectrum(const HsbPartition& part) const {
    if (part.size() != block_class.size())
        throw ValidationError("equivalent_spectrum: partition does not match the local ensemble");
    std::vector<const PodBasis*> bases;
    int length = 0;
    for (std::size_t n = 0; n < part.size(); ++n) {
        bases.push_back(&class_roms[block_class[n]].basis);
        length = std::max(length, int(bases.back()->spectrum.size()));
    }
    return thermrom::equivalent_spectrum(bases, part.area_fractions, length);
}

BlockRom train_truncated(const ChipModel& model, const HsbPartition& part, std::size_t block,
                         const TruncatedDomain& dom, const TrainingConfig& cfg,
                         std::uint64_t seed) {
    const ChipModel local = truncated_model(model, dom);
    const HsbPartition lp = local_partition(model, part, block, dom);

    ExcitationConfig ex;
    ex.n_steps = cfg.n_steps;
    ex.hold_steps = cfg.hold_steps;
    ex.p_max = cfg.p_max;
    ex.seed = seed;
    const PowerTrace excitation = random_excitation(lp, 0, cfg.time_step, ex);

    DnsConfig dns;
    dns.time_step = cfg.time_step;
    dns.linear_tolerance = cfg.linear_tolerance;

    const SnapshotSet snaps = collect_snapshots(local, lp, excitation, dns, cfg.sample_every);
    PodBasis basis = solve_modes(snaps, cfg.max_modes);
    basis.hsb_id = dom.hsb_id;
    basis.domain = dom.box;

    const ThermalOperator op = assemble_operator(local);
    RomSystem rom = assemble_rom(basis, local, op, dom.footprint_local);
    return {std::move(basis), std::move(rom)};
}

LocalEnsemble train_local(const ChipModel& model, const HsbPartition& part,
                          const ThermalLengthTable& table, const TrainingConfig& cfg,
                          double multiple) {
    cfg.validate();
    if (part.size() == 0) throw ValidationError("train_local: empty partition");

    LocalEnsemble ens;
    ens.grid = model.grid;
    ens.ambient = model.ambient();
    ens.partition_hash = part.hash();
    ens.truncation_multiple = multiple;
    ens.classes = classify_generic_blocks(model, part, table, multiple);
    ens.class_roms.resize(ens.classes.size());

    ens.block_class.assign(part.size(), -1);
    ens.block_box.resize(part.size());
    std::vector<std::size_t> canonical_index(ens.classes.size());
    for (std::size_t c = 0; c < ens.classes.size(); ++c) {
        const GenericBlockClass& cls = ens.classes[c];
        for (const MemberPlacement& m : cls.members) {
            const int n = part.index_of(m.hsb_id);
            if (n < 0) throw NumericalError("train_local: class member missing from partition");
            ens.block_class[n] = int(c);
            DomainBox box = cls.canonical.box;
            box.i0 += m.di;
            box.j0 += m.dj;
            ens.block_box[n] = box;
        }
        canonical_index[c] = std::size_t(part.index_of(cls.members.front().hsb_id));
    }

    parallel_for(ens.classes.size(), cfg.jobs, [&](std::size_t c) {
        const std::size_t n = canonical_index[c];
        ens.class_roms[c] = train_truncated(model, part, n, ens.classes[c].canonical, cfg,
                                            cfg.seed + n);
    });
    return ens;
}

EnsembleTrajectories integrate_local(const LocalEnsemble& ens, const HsbPartition& part,
                                     const PowerTrace& trace, int n_modes) {
    if (n_modes < 1) throw ValidationError("integrate_local: need at least one mode");
    if (part.size() != ens.block_class.size())
        throw ValidationError("integrate_local: partition does not match the local ensemble");
    trace.validate();

    std::vector<std::string> deficient;
    for (const BlockRom& b : ens.class_roms)
        if (b.basis.mode_count() < n_modes) deficient.push_back(b.basis.hsb_id);
    if (!deficient.empty()) {
        std::ostringstream msg;
        msg << "integrate_local: " << n_modes
            << " modes requested but only fewer trained for classes canonical at:";
        for (const std::string& id : deficient) msg << ' ' << id;
        throw ValidationError(msg.str());
    }

    const std::vector<int> columns = trace.column_map(part);

    EnsembleTrajectories out;
    out.n_modes = n_modes;
    out.time_step = trace.time_step;
    out.coeffs.reserve(part.size());
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t n = 0; n < part.size(); ++n)
        out.coeffs.push_back(integrate_odes(ens.class_roms[ens.block_class[n]].rom,
                                            trace.powers.col(columns[n]), trace.time_step,
                                            n_modes));
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

namespace {

void check_traj(const LocalEnsemble& ens, const EnsembleTrajectories& traj, int step) {
    if (traj.coeffs.size() != ens.block_class.size())
        throw ValidationError("local reconstruction: trajectories do not match the ensemble");
    for (const Eigen::MatrixXd& c : traj.coeffs)
        if (step < 0 || step >= c.rows())
            throw ValidationError("local reconstruction: step index out of range");
}

} // namespace

Eigen::VectorXd local_field(const LocalEnsemble& ens, const EnsembleTrajectories& traj, int step) {
    check_traj(ens, traj, step);
    Eigen::VectorXd field = Eigen::VectorXd::Constant(ens.grid.cell_count(), ens.ambient);
    for (std::size_t n = 0; n < traj.coeffs.size(); ++n) {
        const PodBasis& basis = ens.class_roms[ens.block_class[n]].basis;
        const DomainBox& box = ens.block_box[n];
        const Eigen::VectorXd a = traj.coeffs[n].row(step).transpose();
        const Eigen::VectorXd local = basis.modes.leftCols(a.size()) * a;
        for (int k = 0; k < ens.grid.nz; ++k)
            for (int jj = 0; jj < box.ny; ++jj)
                field.segment(ens.grid.flat(box.i0, box.j0 + jj, k), box.nx) +=
                    local.segment((std::int64_t(k) * box.ny + jj) * box.nx, box.nx);
    }
    return field;
}

Eigen::VectorXd local_layer(const LocalEnsemble& ens, const EnsembleTrajectories& traj, int step,
                            int k_layer) {
    check_traj(ens, traj, step);
    if (k_layer < 0 || k_layer >= ens.grid.nz)
        throw ValidationError("local_layer: layer index out of range");
    Eigen::VectorXd layer =
        Eigen::VectorXd::Constant(std::int64_t(ens.grid.nx) * ens.grid.ny, ens.ambient);
    for (std::size_t n = 0; n < traj.coeffs.size(); ++n) {
        const PodBasis& basis = ens.class_roms[ens.block_class[n]].basis;
        const DomainBox& box = ens.block_box[n];
        const std::int64_t box_plane = std::int64_t(box.nx) * box.ny;
        const Eigen::VectorXd a = traj.coeffs[n].row(step).transpose();
        const Eigen::VectorXd local =
            basis.modes.middleRows(k_layer * box_plane, box_plane).leftCols(a.size()) * a;
        for (int jj = 0; jj < box.ny; ++jj)
            layer.segment(std::int64_t(box.j0 + jj) * ens.grid.nx + box.i0, box.nx) +=
                local.segment(std::int64_t(jj) * box.nx, box.nx);
    }
    return layer;
}

} // namespace thermrom
