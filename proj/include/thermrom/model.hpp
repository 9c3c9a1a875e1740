#pragma once

#include <array>
#include <string>
#include <vector>

#include "thermrom/grid.hpp"

namespace thermrom {

/// One z-slab of the material stack, bottom-up.
struct MaterialLayer {
    int cells = 0;        // z extent in grid cells
    double rho = 0.0;     // kg/m^3
    double c_heat = 0.0;  // J/(kg K)
    double k_cond = 0.0;  // W/(m K)
};

enum class Face : int { XMin = 0, XMax, YMin, YMax, ZMin, ZMax };

inline const char* face_name(Face f) {
    static const char* names[] = {"xmin", "xmax", "ymin", "ymax", "zmin", "zmax"};
    return names[int(f)];
}

struct FaceBc {
    bool robin = false;      // false: adiabatic
    double h = 0.0;          // W/(m^2 K)
    double t_ambient = 0.0;  // K
};

struct BoundarySpec {
    std::array<FaceBc, 6> faces{};

    const FaceBc& at(Face f) const { return faces[int(f)]; }
    FaceBc& at(Face f) { return faces[int(f)]; }
    bool any_robin() const;
    double min_ambient() const;
    void validate() const;
};

/// Axis-aligned floorplan rectangle dissipating (or not) uniform power.
struct FunctionalUnit {
    std::string name;
    double x0 = 0.0, y0 = 0.0;       // lower-left corner, meters
    double width = 0.0, height = 0.0;
    bool powered = true;
};

/// Chip geometry, material stack, floorplan and boundary conditions.
/// Immutable after construction; all operations treat it as read-only.
struct ChipModel {
    Grid3D grid;
    std::vector<MaterialLayer> layers;
    BoundarySpec boundary;
    std::vector<FunctionalUnit> units;
    int device_layer = 0;  // z-cell index where power dissipates

    void validate() const;

    int layer_of(int k) const;
    double rho_c(int k) const;   // volumetric heat capacity of z-slice k, J/(m^3 K)
    double k_cond(int k) const;

    /// Reference ambient temperature T_o: ambient of the first Robin face.
    double ambient() const;

    const FunctionalUnit* find_unit(const std::string& name) const;
};

} // namespace thermrom
