#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "thermrom/dns.hpp"
#include "thermrom/power.hpp"

namespace thermrom {

struct ExcitationConfig {
    int n_steps = 400;
    int hold_steps = 5;     // steps each random level is held
    double p_max = 10.0;    // W
    std::uint64_t seed = 0;
};

/// Piecewise-constant random power on one block, zero on all others.
/// Levels are i.i.d. uniform on [0, p_max); deterministic for a given seed.
PowerTrace random_excitation(const HsbPartition& part, std::size_t active_block,
                             double time_step, const ExcitationConfig& cfg);

/// Independent piecewise-constant random power on every block (block n draws
/// with seed + n), for generating workload-like test traces.
PowerTrace random_power_map(const HsbPartition& part, double time_step,
                            const ExcitationConfig& cfg);

/// Ambient-relative training snapshots, one column per sampled field.
struct SnapshotSet {
    Grid3D grid;
    Eigen::MatrixXd columns;         // cells x N_s, ambient-relative kelvin
    Eigen::VectorXd volume_weights;  // m^3 per cell

    int count() const { return int(columns.cols()); }
};

SnapshotSet collect_snapshots(const ChipModel& model, const HsbPartition& part,
                              const PowerTrace& excitation, const DnsConfig& cfg,
                              int sample_every);

/// Lateral sub-box a truncated basis lives on (z always full).
struct DomainBox {
    int i0 = 0, j0 = 0;
    int nx = 0, ny = 0;
    bool operator==(const DomainBox&) const = default;
};

/// Ordered modes with eigenvalues for one heat source block.
/// Modes are orthonormal under the volume-weighted inner product; the full
/// Gram spectrum (zero-padded past the numerical rank) is retained for the
/// theoretical error estimate.
struct PodBasis {
    std::string hsb_id;
    Eigen::MatrixXd modes;       // cells x M, descending eigenvalue order
    Eigen::VectorXd eigenvalues; // the M retained eigenvalues (K^2 m^3)
    Eigen::VectorXd spectrum;    // full length N_s
    int n_snapshots = 0;
    std::optional<DomainBox> domain;  // set for truncated-domain bases

    int mode_count() const { return int(modes.cols()); }
};

/// Method of snapshots: eigendecompose the N_s x N_s volume-weighted Gram
/// matrix (1/N_s) * integral(T_a T_b), then lift eigenvectors to mode fields.
/// Eigenvalues below 1e-12 * lambda_1 are treated as numerical noise.
PodBasis solve_modes(const SnapshotSet& snapshots, int max_modes);

/// Per-mode equivalent eigenvalues: area-fraction-weighted sum over blocks,
/// each spectrum zero-padded to `length`.
Eigen::VectorXd equivalent_spectrum(const std::vector<const PodBasis*>& bases,
                                    const std::vector<double>& weights, int length);

/// A-priori relative error of an M-mode truncation from the spectrum tail.
double lse_theoretical(const Eigen::VectorXd& spectrum, int n_modes, int n_snapshots);

} // namespace thermrom
