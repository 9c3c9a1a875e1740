#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "thermrom/model.hpp"

namespace thermrom {

/// Device-layer cells covered by one functional unit (center-inclusion rule).
struct UnitFootprint {
    std::string unit;
    std::vector<std::int64_t> cells;  // global flat indices in the device layer
    double area = 0.0;                // covered area, m^2
};

/// Maps every unit to the device-layer cells whose centers fall inside its
/// rectangle (half-open on the max edges, so adjacent units stay disjoint).
/// Throws if a unit covers no cell, or if two powered units overlap.
std::vector<UnitFootprint> rasterize_floorplan(const ChipModel& model);

struct HeatSourceBlock {
    std::string id;
    std::vector<std::string> member_units;
    std::vector<std::int64_t> cells;  // global flat indices, sorted
    double area = 0.0;
};

struct Grouping {
    enum class Kind { PerUnit, Grouped };
    Kind kind = Kind::PerUnit;
    std::vector<std::vector<std::string>> groups;  // used when kind == Grouped

    static Grouping per_unit() { return {}; }
    static Grouping grouped(std::vector<std::vector<std::string>> g) {
        return Grouping{Kind::Grouped, std::move(g)};
    }
};

struct HsbPartition {
    std::vector<HeatSourceBlock> blocks;
    std::vector<double> area_fractions;  // w_n, sums to 1
    int device_layer = 0;

    std::size_t size() const { return blocks.size(); }
    int index_of(const std::string& id) const;  // -1 when absent

    /// FNV-1a over block ids and footprints; ties libraries to the partition
    /// they were trained for.
    std::uint64_t hash() const;
};

HsbPartition build_partition(const ChipModel& model,
                             const std::vector<UnitFootprint>& footprints,
                             const Grouping& grouping);

/// rasterize_floorplan + build_partition in one step.
HsbPartition make_partition(const ChipModel& model, const Grouping& grouping = {});

} // namespace thermrom
