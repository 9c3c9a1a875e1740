#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "thermrom/model.hpp"
#include "thermrom/partition.hpp"
#include "thermrom/pod.hpp"
#include "thermrom/power.hpp"
#include "thermrom/rom.hpp"

namespace thermrom {

/// Knobs for the per-block training runs. The seed is a base value: block n
/// trains with seed + n so runs are reproducible yet decorrelated.
struct TrainingConfig {
    int n_steps = 400;
    int hold_steps = 5;
    double p_max = 10.0;
    std::uint64_t seed = 0;
    double time_step = 1e-4;
    int sample_every = 1;
    int max_modes = 20;
    double linear_tolerance = 1e-9;
    int jobs = 1;

    void validate() const;
};

/// One block's trained basis plus its reduced system.
struct BlockRom {
    PodBasis basis;
    RomSystem rom;
};

/// The trained library for a whole partition, block order matching it.
struct Ensemble {
    Grid3D grid;
    double ambient = 0.0;
    std::uint64_t partition_hash = 0;
    std::vector<BlockRom> blocks;

    int min_mode_count() const;
    /// Weighted spectrum across blocks (weights = block area fractions).
    Eigen::VectorXd equivalent_spectrum(const HsbPartition& part) const;
};

/// Trains one block: excite it with a random hold sequence (seed + block
/// index) while the others stay cold, snapshot the response, extract modes,
/// project against the given operator.
BlockRom train_ensemble_block(const ChipModel& model, const HsbPartition& part,
                              const ThermalOperator& op, const TrainingConfig& cfg,
                              std::size_t block);

/// Trains every block of the partition. Blocks are independent, so cfg.jobs
/// of them run concurrently.
Ensemble train_ensemble(const ChipModel& model, const HsbPartition& part, const TrainingConfig& cfg);

/// Reduced coefficient histories for one power trace, one per block.
struct EnsembleTrajectories {
    std::vector<Eigen::MatrixXd> coeffs; // each (n_steps+1) x n_modes
    int n_modes = 0;
    double time_step = 0.0;
    double seconds = 0.0; // wall time spent integrating
};

/// Integrates every block ROM against its column of the trace. Throws when a
/// block has fewer trained modes than requested, naming the offenders.
EnsembleTrajectories integrate_ensemble(const Ensemble& ens, const HsbPartition& part,
                                        const PowerTrace& trace, int n_modes);

/// Full absolute-temperature field at one step: ambient plus the sum of the
/// block reconstructions. Truncated bases scatter into their sub-box; cells
/// outside every box stay at the superposed background.
Eigen::VectorXd ensemble_field(const Ensemble& ens, const EnsembleTrajectories& traj, int step);

/// Same superposition restricted to one z-layer (layer cells are contiguous
/// in flat order, so this touches only the needed mode rows).
Eigen::VectorXd ensemble_layer(const Ensemble& ens, const EnsembleTrajectories& traj, int step,
                               int k_layer);

} // namespace thermrom
