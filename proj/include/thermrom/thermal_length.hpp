#pragma once

#include <vector>

#include "thermrom/model.hpp"

namespace thermrom {

/// One calibration point: a centered block of `block_width` on the reference
/// stack decays to `decay_threshold` of its edge rise within `lambda_th`.
struct ThermalLengthEntry {
    double block_width = 0.0;  // m
    double aspect = 1.0;       // width / height of the calibration block
    double thickness = 0.0;    // m, chip thickness it was calibrated on
    double lambda_th = 0.0;    // m
};

struct ThermalLengthTable {
    double decay_threshold = 0.05;
    std::vector<ThermalLengthEntry> entries;  // ascending block_width

    /// Interpolated length for a block width: linear between the bracketing
    /// entries, clamped to the sweep's end points.
    double lookup(double block_width) const;
};

/// Measures the lateral decay length of a single centered block: puts one
/// `block_width` x `block_width / aspect` source on a copy of the model's
/// stack, solves the steady state, and walks the device-layer centerline
/// outward until the rise drops below `decay_threshold` of the rise at the
/// block edge. Crossings are located by linear interpolation between cell
/// centers. Doubling the power changes nothing: the threshold is relative.
double estimate_thermal_length(const ChipModel& model, double block_width, double aspect,
                               double static_power, double decay_threshold = 0.05);

/// Sweeps estimate_thermal_length over the given widths into a lookup table.
ThermalLengthTable calibrate_thermal_lengths(const ChipModel& model,
                                             const std::vector<double>& block_widths,
                                             double aspect, double static_power,
                                             double decay_threshold = 0.05);

} // namespace thermrom
