#pragma once

#include <Eigen/Core>
#include <vector>

#include "thermrom/dns.hpp"
#include "thermrom/ensemble.hpp"
#include "thermrom/local.hpp"

namespace thermrom {

/// Axis-aligned cell region: a lateral box (empty box = full extent) times an
/// inclusive z range (k1 < 0 = top). Used to scope error norms.
struct Region {
    DomainBox box;      // box.nx == 0 means the full lateral extent
    int k0 = 0, k1 = -1;

    static Region all() { return {}; }
    static Region device_layer(int k) { return {{}, k, k}; }
    static Region lateral(const DomainBox& b) { return {b, 0, -1}; }

    /// Concrete bounds on a grid: {i0, i1, j0, j1, k0, k1} inclusive.
    std::array<int, 6> bounds(const Grid3D& grid) const;
};

/// Running numerator/denominator of the relative L2 error norm, volume
/// weighted, accumulated across steps. Exposing the parts keeps the norm
/// decomposable over disjoint regions.
struct LseParts {
    double num = 0.0;  // integral of (pred - ref)^2
    double den = 0.0;  // integral of (ref - t_ambient)^2

    void accumulate(const Grid3D& grid, const Eigen::VectorXd& reference,
                    const Eigen::VectorXd& predicted, const Region& region, double t_ambient);
    LseParts& operator+=(const LseParts& o) {
        num += o.num;
        den += o.den;
        return *this;
    }
    double value() const;  // sqrt(num/den); throws when den == 0
};

/// Relative L2 error of predicted vs reference over all steps and the region:
/// sqrt( sum_i |e|^2 / sum_i |ref - T_o|^2 ). Steps must align pairwise.
double lse_numerical(const std::vector<ThermalField>& reference,
                     const std::vector<ThermalField>& predicted, const Region& region,
                     double t_ambient);

struct MaxTempSample {
    double t = 0.0;
    double value = 0.0;
    std::int64_t cell = 0;  // global flat index; ties go to the lowest index
};

/// Per-step maximum and its location over full fields.
std::vector<MaxTempSample> max_temp_series(const std::vector<ThermalField>& fields);

/// ROM-side hotspot series over the device layer only (that is where the
/// maximum lives for device-layer sources); avoids full reconstruction.
std::vector<MaxTempSample> max_temp_series(const Ensemble& ens, const EnsembleTrajectories& traj,
                                           int device_layer);
std::vector<MaxTempSample> max_temp_series(const LocalEnsemble& ens,
                                           const EnsembleTrajectories& traj, int device_layer);

/// What the reduced path materializes per output step in the benchmark.
enum class BenchMode { FullField, DeviceLayer, PeakOnly };

const char* bench_mode_name(BenchMode m);

struct BenchReport {
    BenchMode mode = BenchMode::FullField;
    int n_modes = 0;
    int n_steps = 0;
    int n_outputs = 0;
    std::int64_t grid_dof = 0;  // direct solver unknowns
    std::int64_t rom_dof = 0;   // n_modes * n_blocks
    double dns_seconds = 0.0;
    double rom_seconds = 0.0;   // ODE integration + post-processing
    double speedup = 0.0;
    double lse = 0.0;  // over the outputs the mode produces (see bench_speedup)
};

/// Times the direct solve and the reduced path on one trace, single process,
/// same output cadence for both. Post-processing per output step:
///   FullField   — reconstruct the whole grid;
///   DeviceLayer — reconstruct one z-layer;
///   PeakOnly    — hotspot value/location only, reconstructions batched
///                 across steps and reduced on the fly.
/// The reported LSE is over full fields, device-layer fields, or the peak
/// series respectively. File I/O is excluded (nothing is written).
BenchReport bench_speedup(const ChipModel& model, const HsbPartition& part, const Ensemble& ens,
                          const PowerTrace& trace, int n_modes, BenchMode mode, int sample_every,
                          const DnsConfig& cfg);

} // namespace thermrom
