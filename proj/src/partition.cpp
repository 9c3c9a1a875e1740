#include "thermrom/partition.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "thermrom/error.hpp"

namespace thermrom {

std::vector<UnitFootprint> rasterize_floorplan(const ChipModel& model) {
    model.validate();
    const Grid3D& g = model.grid;
    const int k = model.device_layer;

    std::vector<UnitFootprint> out;
    out.reserve(model.units.size());
    std::vector<int> owner(std::size_t(g.nx) * g.ny, -1);  // powered-unit overlap detection

    for (std::size_t u = 0; u < model.units.size(); ++u) {
        const FunctionalUnit& unit = model.units[u];
        UnitFootprint fp;
        fp.unit = unit.name;

        // Candidate index range, then exact center-inclusion test:
        // x0 <= xc < x0 + width (half-open keeps shared edges unambiguous).
        const int i_lo = std::max(0, int(std::floor((unit.x0 - g.origin[0]) / g.dx - 0.5)));
        const int i_hi = std::min(g.nx - 1, int(std::ceil((unit.x0 + unit.width - g.origin[0]) / g.dx)));
        const int j_lo = std::max(0, int(std::floor((unit.y0 - g.origin[1]) / g.dy - 0.5)));
        const int j_hi = std::min(g.ny - 1, int(std::ceil((unit.y0 + unit.height - g.origin[1]) / g.dy)));

        for (int j = j_lo; j <= j_hi; ++j) {
            for (int i = i_lo; i <= i_hi; ++i) {
                const double xc = g.xc(i), yc = g.yc(j);
                if (xc >= unit.x0 && xc < unit.x0 + unit.width &&
                    yc >= unit.y0 && yc < unit.y0 + unit.height) {
                    fp.cells.push_back(g.flat(i, j, k));
                    if (unit.powered) {
                        int& o = owner[std::size_t(j) * g.nx + i];
                        if (o >= 0)
                            throw ValidationError("powered units '" + model.units[o].name +
                                                  "' and '" + unit.name + "' overlap at cell (" +
                                                  std::to_string(i) + "," + std::to_string(j) + ")");
                        o = int(u);
                    }
                }
            }
        }
        if (fp.cells.empty())
            throw ValidationError("unit '" + unit.name +
                                  "' covers no grid cell (resolution too coarse)");
        fp.area = double(fp.cells.size()) * g.dx * g.dy;
        std::sort(fp.cells.begin(), fp.cells.end());
        out.push_back(std::move(fp));
    }
    return out;
}

int HsbPartition::index_of(const std::string& id) const {
    for (std::size_t n = 0; n < blocks.size(); ++n)
        if (blocks[n].id == id) return int(n);
    return -1;
}

std::uint64_t HsbPartition::hash() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    };
    for (const auto& b : blocks) {
        mix(b.id.data(), b.id.size());
        mix(b.cells.data(), b.cells.size() * sizeof(std::int64_t));
    }
    mix(&device_layer, sizeof(device_layer));
    return h;
}

HsbPartition build_partition(const ChipModel& model,
                             const std::vector<UnitFootprint>& footprints,
                             const Grouping& grouping) {
    std::unordered_map<std::string, const UnitFootprint*> by_name;
    for (const auto& fp : footprints) by_name[fp.unit] = &fp;

    std::vector<std::vector<std::string>> groups;
    if (grouping.kind == Grouping::Kind::PerUnit) {
        for (const auto& u : model.units)
            if (u.powered) groups.push_back({u.name});
    } else {
        std::unordered_set<std::string> seen;
        for (const auto& grp : grouping.groups) {
            if (grp.empty()) throw ValidationError("partition: empty unit group");
            for (const auto& name : grp) {
                if (!by_name.count(name))
                    throw ValidationError("partition: group references unknown unit '" + name + "'");
                if (!seen.insert(name).second)
                    throw ValidationError("partition: unit '" + name + "' appears in two groups");
            }
        }
        // every powered unit must be covered exactly once
        for (const auto& u : model.units)
            if (u.powered && !seen.count(u.name))
                throw ValidationError("partition: powered unit '" + u.name + "' not covered by any group");
        groups = grouping.groups;
    }
    if (groups.empty()) throw ValidationError("partition: no powered units");

    HsbPartition part;
    part.device_layer = model.device_layer;
    double total_area = 0.0;
    std::set<std::int64_t> claimed;

    for (const auto& grp : groups) {
        HeatSourceBlock b;
        b.member_units = grp;
        b.id = grp.size() == 1 ? grp[0] : grp[0] + "+" + std::to_string(grp.size() - 1);
        for (const auto& name : grp) {
            const UnitFootprint& fp = *by_name.at(name);
            for (std::int64_t c : fp.cells) {
                if (!claimed.insert(c).second)
                    throw ValidationError("partition: block footprints overlap at cell " +
                                          std::to_string(c));
                b.cells.push_back(c);
            }
            b.area += fp.area;
        }
        std::sort(b.cells.begin(), b.cells.end());
        total_area += b.area;
        part.blocks.push_back(std::move(b));
    }

    part.area_fractions.resize(part.blocks.size());
    for (std::size_t n = 0; n < part.blocks.size(); ++n)
        part.area_fractions[n] = part.blocks[n].area / total_area;
    return part;
}

HsbPartition make_partition(const ChipModel& model, const Grouping& grouping) {
    return build_partition(model, rasterize_floorplan(model), grouping);
}

} // namespace thermrom
