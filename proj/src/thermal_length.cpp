#include "thermrom/thermal_length.hpp"

#include <algorithm>
#include <cmath>

#include "thermrom/dns.hpp"
#include "thermrom/error.hpp"
#include "thermrom/partition.hpp"

namespace thermrom {

double ThermalLengthTable::lookup(double block_width) const {
    if (entries.empty()) throw ValidationError("thermal length table is empty");
    if (block_width <= 0.0) throw ValidationError("thermal length lookup: width must be positive");
    if (block_width <= entries.front().block_width) return entries.front().lambda_th;
    if (block_width >= entries.back().block_width) return entries.back().lambda_th;
    for (std::size_t e = 1; e < entries.size(); ++e) {
        const ThermalLengthEntry& lo = entries[e - 1];
        const ThermalLengthEntry& hi = entries[e];
        if (block_width <= hi.block_width) {
            const double t = (block_width - lo.block_width) / (hi.block_width - lo.block_width);
            return lo.lambda_th + t * (hi.lambda_th - lo.lambda_th);
        }
    }
    return entries.back().lambda_th;  // unreachable; entries are sorted
}

double estimate_thermal_length(const ChipModel& model, double block_width, double aspect,
                               double static_power, double decay_threshold) {
    if (block_width <= 0.0 || aspect <= 0.0)
        throw ValidationError("thermal length: block width and aspect must be positive");
    if (static_power <= 0.0)
        throw ValidationError("thermal length: calibration power must be positive");
    if (decay_threshold <= 0.0 || decay_threshold >= 1.0)
        throw ValidationError("thermal length: decay threshold must lie in (0, 1)");

    const Grid3D& g = model.grid;
    const double block_height = block_width / aspect;
    if (block_width >= g.width() || block_height >= g.height())
        throw ValidationError("thermal length: calibration block wider than the chip");

    // Same stack and boundaries, a single centered source.
    ChipModel probe = model;
    probe.units.clear();
    probe.units.push_back({"probe", g.origin[0] + 0.5 * (g.width() - block_width),
                           g.origin[1] + 0.5 * (g.height() - block_height), block_width,
                           block_height, true});
    probe.validate();

    const HsbPartition part = make_partition(probe);
    Eigen::VectorXd power(1);
    power << static_power;
    const ThermalField steady = steady_state(probe, part, power);

    const int j = g.ny / 2;
    const int k = probe.device_layer;
    const double ambient = probe.ambient();
    const double x_edge = g.origin[0] + 0.5 * (g.width() + block_width);

    auto rise_at = [&](int i) { return steady.values[g.flat(i, j, k)] - ambient; };
    auto rise_interp = [&](double x) {
        // linear between the two bracketing cell centers, clamped at the ends
        const double s = (x - g.origin[0]) / g.dx - 0.5;
        const int lo = std::clamp(int(std::floor(s)), 0, g.nx - 2);
        const double t = std::clamp(s - lo, 0.0, 1.0);
        return (1.0 - t) * rise_at(lo) + t * rise_at(lo + 1);
    };

    const double edge_rise = rise_interp(x_edge);
    if (edge_rise <= 0.0)
        throw NumericalError("thermal length: no temperature rise at the block edge");
    const double target = decay_threshold * edge_rise;

    int i = int(std::ceil((x_edge - g.origin[0]) / g.dx - 0.5));
    i = std::max(i, 0);
    double prev_x = x_edge, prev_rise = edge_rise;
    for (; i < g.nx; ++i) {
        const double x = g.xc(i);
        if (x <= x_edge) continue;
        const double r = rise_at(i);
        if (r < target) {
            const double t = (prev_rise - target) / (prev_rise - r);
            return prev_x + t * (x - prev_x) - x_edge;
        }
        prev_x = x;
        prev_rise = r;
    }
    throw ValidationError("thermal length: domain too small to calibrate (rise stays above "
                          "threshold up to the chip edge)");
}

ThermalLengthTable calibrate_thermal_lengths(const ChipModel& model,
                                             const std::vector<double>& block_widths,
                                             double aspect, double static_power,
                                             double decay_threshold) {
    if (block_widths.empty())
        throw ValidationError("thermal length calibration: no widths given");
    std::vector<double> widths = block_widths;
    std::sort(widths.begin(), widths.end());

    ThermalLengthTable table;
    table.decay_threshold = decay_threshold;
    for (double w : widths)
        table.entries.push_back({w, aspect, model.grid.thickness(),
                                 estimate_thermal_length(model, w, aspect, static_power,
                                                         decay_threshold)});
    return table;
}

} // namespace thermrom
