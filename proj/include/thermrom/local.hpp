#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "thermrom/ensemble.hpp"
#include "thermrom/thermal_length.hpp"

namespace thermrom {

/// Lateral sub-domain around one block: its footprint dilated by a multiple
/// of the thermal length, clipped at the chip boundary, full z extent. The
/// cut faces are adiabatic (the field is near-ambient there by construction);
/// faces coinciding with real chip faces keep the chip's conditions.
struct TruncatedDomain {
    std::string hsb_id;
    DomainBox box;
    std::array<bool, 4> clipped{};  // xmin, xmax, ymin, ymax hit the chip edge
    std::vector<std::int64_t> footprint_local;  // block cells, box-local flat order
    BoundarySpec boundary;

    bool operator==(const TruncatedDomain&) const = default;
};

TruncatedDomain truncate_domain(const ChipModel& model, const HsbPartition& part,
                                std::size_t block, const ThermalLengthTable& table,
                                double multiple = 5.0);

/// Standalone chip model of a truncated domain (shifted origin, same stack).
ChipModel truncated_model(const ChipModel& model, const TruncatedDomain& dom);

/// Single-block partition over a truncated domain, for training runs.
HsbPartition local_partition(const ChipModel& model, const HsbPartition& part, std::size_t block,
                             const TruncatedDomain& dom);

/// Blocks whose truncated domains are exact translates of one shape — same
/// box size, same clipping, same relative footprint — share one class and
/// hence one trained library.
struct MemberPlacement {
    std::string hsb_id;
    int di = 0, dj = 0;  // canonical box -> member box, in cells
};

struct GenericBlockClass {
    std::string class_id;
    TruncatedDomain canonical;
    std::vector<MemberPlacement> members;
};

std::vector<GenericBlockClass> classify_generic_blocks(const ChipModel& model,
                                                       const HsbPartition& part,
                                                       const ThermalLengthTable& table,
                                                       double multiple = 5.0);

/// One trained library per generic class, plus the per-block routing needed
/// to run all blocks through their shared class systems.
struct LocalEnsemble {
    Grid3D grid;
    double ambient = 0.0;
    std::uint64_t partition_hash = 0;
    double truncation_multiple = 5.0;
    std::vector<GenericBlockClass> classes;
    std::vector<BlockRom> class_roms;   // basis.domain = the canonical box
    std::vector<int> block_class;       // partition block -> class index
    std::vector<DomainBox> block_box;   // member's translated box

    int min_mode_count() const;
    Eigen::VectorXd equivalent_spectrum(const HsbPartition& part) const;
};

/// Trains one truncated domain (deterministic in `seed`) on its own local
/// grid; the returned basis carries the domain box.
BlockRom train_truncated(const ChipModel& model, const HsbPartition& part, std::size_t block,
                         const TruncatedDomain& dom, const TrainingConfig& cfg,
                         std::uint64_t seed);

/// Classifies, then trains each class once on its canonical domain. A class
/// trains with seed = cfg.seed + (partition index of its canonical member),
/// so a degenerate truncation that covers the whole chip reproduces the
/// untruncated ensemble exactly. Classes train concurrently under cfg.jobs.
LocalEnsemble train_local(const ChipModel& model, const HsbPartition& part,
                          const ThermalLengthTable& table, const TrainingConfig& cfg,
                          double multiple = 5.0);

/// Integrates every block through its class ROM with its own power column.
EnsembleTrajectories integrate_local(const LocalEnsemble& ens, const HsbPartition& part,
                                     const PowerTrace& trace, int n_modes);

/// Global field at one step: each member's reconstructed local field is
/// translated to its position and summed; cells outside every box stay at
/// the superposed background. The sum follows partition order, so it is
/// deterministic regardless of how the coefficients were produced.
Eigen::VectorXd local_field(const LocalEnsemble& ens, const EnsembleTrajectories& traj, int step);

/// Same superposition restricted to one z-layer.
Eigen::VectorXd local_layer(const LocalEnsemble& ens, const EnsembleTrajectories& traj, int step,
                            int k_layer);

} // namespace thermrom
