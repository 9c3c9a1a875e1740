#include "thermrom/metrics.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "thermrom/error.hpp"

namespace thermrom {

std::array<int, 6> Region::bounds(const Grid3D& grid) const {
    std::array<int, 6> b{0, grid.nx - 1, 0, grid.ny - 1, k0, k1 < 0 ? grid.nz - 1 : k1};
    if (box.nx > 0) {
        b[0] = box.i0;
        b[1] = box.i0 + box.nx - 1;
        b[2] = box.j0;
        b[3] = box.j0 + box.ny - 1;
    }
    if (b[0] < 0 || b[1] >= grid.nx || b[2] < 0 || b[3] >= grid.ny || b[4] < 0 ||
        b[5] >= grid.nz || b[0] > b[1] || b[2] > b[3] || b[4] > b[5])
        throw ValidationError("region does not fit the grid");
    return b;
}

void LseParts::accumulate(const Grid3D& grid, const Eigen::VectorXd& reference,
                          const Eigen::VectorXd& predicted, const Region& region,
                          double t_ambient) {
    if (reference.size() != grid.cell_count() || predicted.size() != grid.cell_count())
        throw ValidationError("lse: field size does not match the grid");
    const auto [i0, i1, j0, j1, k0, k1] = region.bounds(grid);
    const double vol = grid.cell_volume();
    const int span = i1 - i0 + 1;
    for (int k = k0; k <= k1; ++k)
        for (int j = j0; j <= j1; ++j) {
            const std::int64_t base = grid.flat(i0, j, k);
            const auto ref = reference.segment(base, span);
            const auto err = predicted.segment(base, span) - ref;
            num += vol * err.squaredNorm();
            den += vol * (ref.array() - t_ambient).matrix().squaredNorm();
        }
}

double LseParts::value() const {
    if (den <= 0.0)
        throw NumericalError("lse: reference never departs ambient in the region");
    return std::sqrt(num / den);
}

double lse_numerical(const std::vector<ThermalField>& reference,
                     const std::vector<ThermalField>& predicted, const Region& region,
                     double t_ambient) {
    if (reference.empty()) throw ValidationError("lse: no reference steps");
    if (reference.size() != predicted.size())
        throw ValidationError("lse: reference and predicted step counts differ");
    LseParts parts;
    for (std::size_t s = 0; s < reference.size(); ++s) {
        if (!(reference[s].grid == predicted[s].grid))
            throw ValidationError("lse: reference and predicted grids differ");
        if (std::abs(reference[s].timestamp - predicted[s].timestamp) >
            1e-9 * std::max(1.0, std::abs(reference[s].timestamp)))
            throw ValidationError("lse: reference and predicted timestamps differ");
        parts.accumulate(reference[s].grid, reference[s].values, predicted[s].values, region,
                         t_ambient);
    }
    return parts.value();
}

std::vector<MaxTempSample> max_temp_series(const std::vector<ThermalField>& fields) {
    if (fields.empty()) throw ValidationError("max_temp_series: no fields");
    std::vector<MaxTempSample> out;
    out.reserve(fields.size());
    for (const ThermalField& f : fields) {
        Eigen::Index idx = 0;
        const double v = f.values.maxCoeff(&idx);  // first occurrence = lowest flat index
        out.push_back({f.timestamp, v, std::int64_t(idx)});
    }
    return out;
}

namespace {

template <class LayerFn>
std::vector<MaxTempSample> layer_max_series(LayerFn&& layer_at, int n_rows, double dt,
                                            std::int64_t plane_offset) {
    std::vector<MaxTempSample> out;
    out.reserve(n_rows);
    for (int s = 0; s < n_rows; ++s) {
        const Eigen::VectorXd layer = layer_at(s);
        Eigen::Index idx = 0;
        const double v = layer.maxCoeff(&idx);
        out.push_back({s * dt, v, plane_offset + idx});
    }
    return out;
}

} // namespace

std::vector<MaxTempSample> max_temp_series(const Ensemble& ens, const EnsembleTrajectories& traj,
                                           int device_layer) {
    if (traj.coeffs.empty()) throw ValidationError("max_temp_series: empty trajectories");
    const int rows = int(traj.coeffs.front().rows());
    const std::int64_t plane = std::int64_t(ens.grid.nx) * ens.grid.ny;
    return layer_max_series([&](int s) { return ensemble_layer(ens, traj, s, device_layer); },
                            rows, traj.time_step, plane * device_layer);
}

std::vector<MaxTempSample> max_temp_series(const LocalEnsemble& ens,
                                           const EnsembleTrajectories& traj, int device_layer) {
    if (traj.coeffs.empty()) throw ValidationError("max_temp_series: empty trajectories");
    const int rows = int(traj.coeffs.front().rows());
    const std::int64_t plane = std::int64_t(ens.grid.nx) * ens.grid.ny;
    return layer_max_series([&](int s) { return local_layer(ens, traj, s, device_layer); }, rows,
                            traj.time_step, plane * device_layer);
}

const char* bench_mode_name(BenchMode m) {
    switch (m) {
        case BenchMode::FullField: return "full-field";
        case BenchMode::DeviceLayer: return "device-layer";
        case BenchMode::PeakOnly: return "peak-only";
    }
    return "?";
}

namespace {

/// Peak per output step without materializing fields one at a time: for each
/// block, one dense (layer cells x modes) * (modes x chunk) product with the
/// running chunk buffer, then a columnwise max.
std::vector<double> batched_layer_peaks(const Ensemble& ens, const EnsembleTrajectories& traj,
                                        const std::vector<int>& steps, int k_layer) {
    const Grid3D& g = ens.grid;
    const std::int64_t plane = std::int64_t(g.nx) * g.ny;
    constexpr int chunk = 64;
    Eigen::MatrixXd buffer(plane, chunk);
    Eigen::MatrixXd coeffs(traj.n_modes, chunk);
    std::vector<double> peaks(steps.size());

    for (std::size_t at = 0; at < steps.size(); at += chunk) {
        const int cols = int(std::min<std::size_t>(chunk, steps.size() - at));
        buffer.leftCols(cols).setConstant(ens.ambient);
        for (std::size_t n = 0; n < ens.blocks.size(); ++n) {
            const PodBasis& basis = ens.blocks[n].basis;
            for (int c = 0; c < cols; ++c)
                coeffs.col(c) = traj.coeffs[n].row(steps[at + c]).head(traj.n_modes).transpose();
            if (!basis.domain) {
                buffer.leftCols(cols).noalias() +=
                    basis.modes.middleRows(k_layer * plane, plane).leftCols(traj.n_modes) *
                    coeffs.leftCols(cols);
            } else {
                const DomainBox& box = *basis.domain;
                const std::int64_t box_plane = std::int64_t(box.nx) * box.ny;
                const Eigen::MatrixXd local =
                    basis.modes.middleRows(k_layer * box_plane, box_plane)
                        .leftCols(traj.n_modes) *
                    coeffs.leftCols(cols);
                for (int jj = 0; jj < box.ny; ++jj)
                    buffer.middleRows(std::int64_t(box.j0 + jj) * g.nx + box.i0, box.nx)
                        .leftCols(cols) += local.middleRows(std::int64_t(jj) * box.nx, box.nx);
            }
        }
        for (int c = 0; c < cols; ++c) peaks[at + c] = buffer.col(c).maxCoeff();
    }
    return peaks;
}

} // namespace

BenchReport bench_speedup(const ChipModel& model, const HsbPartition& part, const Ensemble& ens,
                          const PowerTrace& trace, int n_modes, BenchMode mode, int sample_every,
                          const DnsConfig& cfg) {
    if (sample_every < 1) throw ValidationError("bench: sample_every must be >= 1");
    if (part.hash() != ens.partition_hash)
        throw ValidationError("bench: library was trained for a different partition");

    BenchReport rep;
    rep.mode = mode;
    rep.n_modes = n_modes;
    rep.n_steps = trace.n_steps();
    rep.grid_dof = model.grid.cell_count();
    rep.rom_dof = std::int64_t(n_modes) * std::int64_t(part.size());

    // Direct path: march the trace, keeping every sampled field in memory.
    const TransientResult dns = run_transient(model, part, trace, cfg, sample_every);
    rep.dns_seconds = dns.seconds;

    std::vector<int> steps;  // trajectory row indices of the sampled outputs
    for (int k = 1; k <= trace.n_steps(); ++k)
        if (k % sample_every == 0 || k == trace.n_steps()) steps.push_back(k);
    rep.n_outputs = int(steps.size());

    // Reduced path: integrate the ODEs, then the mode's post-processing.
    EnsembleTrajectories traj = integrate_ensemble(ens, part, trace, n_modes);
    rep.rom_seconds = traj.seconds;

    using clock = std::chrono::steady_clock;
    const double t_ambient = model.ambient();
    LseParts lse;
    if (mode == BenchMode::FullField) {
        std::vector<Eigen::VectorXd> fields(steps.size());
        const auto t0 = clock::now();
        for (std::size_t s = 0; s < steps.size(); ++s)
            fields[s] = ensemble_field(ens, traj, steps[s]);
        rep.rom_seconds += std::chrono::duration<double>(clock::now() - t0).count();
        for (std::size_t s = 0; s < steps.size(); ++s)
            lse.accumulate(model.grid, dns.fields[s].values, fields[s], Region::all(), t_ambient);
    } else if (mode == BenchMode::DeviceLayer) {
        std::vector<Eigen::VectorXd> layers(steps.size());
        const auto t0 = clock::now();
        for (std::size_t s = 0; s < steps.size(); ++s)
            layers[s] = ensemble_layer(ens, traj, steps[s], model.device_layer);
        rep.rom_seconds += std::chrono::duration<double>(clock::now() - t0).count();
        const std::int64_t plane = std::int64_t(model.grid.nx) * model.grid.ny;
        Grid3D layer_grid = model.grid;
        layer_grid.nz = 1;
        for (std::size_t s = 0; s < steps.size(); ++s)
            lse.accumulate(layer_grid, dns.fields[s].values.segment(model.device_layer * plane, plane),
                           layers[s], Region::all(), t_ambient);
    } else {
        const auto t0 = clock::now();
        const std::vector<double> peaks =
            batched_layer_peaks(ens, traj, steps, model.device_layer);
        rep.rom_seconds += std::chrono::duration<double>(clock::now() - t0).count();
        for (std::size_t s = 0; s < steps.size(); ++s) {
            const double ref = dns.fields[s].values.maxCoeff();
            lse.num += (peaks[s] - ref) * (peaks[s] - ref);
            lse.den += (ref - t_ambient) * (ref - t_ambient);
        }
    }
    rep.lse = lse.value();
    rep.speedup = rep.rom_seconds > 0.0 ? rep.dns_seconds / rep.rom_seconds
                                        : std::numeric_limits<double>::infinity();
    return rep;
}

} // namespace thermrom
