#include "thermrom/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "thermrom/error.hpp"

namespace thermrom {

void Grid3D::validate() const {
    if (nx < 2 || ny < 2 || nz < 2)
        throw ValidationError("grid: nx, ny, nz must each be >= 2");
    if (!(dx > 0.0) || !(dy > 0.0) || !(dz > 0.0))
        throw ValidationError("grid: dx, dy, dz must be positive");
}

bool BoundarySpec::any_robin() const {
    return std::any_of(faces.begin(), faces.end(), [](const FaceBc& f) { return f.robin; });
}

double BoundarySpec::min_ambient() const {
    double t = std::numeric_limits<double>::infinity();
    for (const auto& f : faces)
        if (f.robin) t = std::min(t, f.t_ambient);
    return t;
}

void BoundarySpec::validate() const {
    if (!any_robin())
        throw ValidationError("boundary: at least one face must be Robin");
    for (int i = 0; i < 6; ++i) {
        const FaceBc& f = faces[i];
        if (f.robin && !(f.h > 0.0))
            throw ValidationError(std::string("boundary: h must be positive on Robin face ") +
                                  face_name(Face(i)));
    }
}

void ChipModel::validate() const {
    grid.validate();
    boundary.validate();

    if (layers.empty()) throw ValidationError("model: material stack is empty");
    int total = 0;
    for (const auto& l : layers) {
        if (l.cells < 1) throw ValidationError("model: layer cell count must be >= 1");
        if (!(l.rho > 0.0) || !(l.c_heat > 0.0) || !(l.k_cond > 0.0))
            throw ValidationError("model: material properties must be strictly positive");
        total += l.cells;
    }
    if (total != grid.nz)
        throw ValidationError("model: layer cells sum to " + std::to_string(total) +
                              " but grid.nz = " + std::to_string(grid.nz));

    if (device_layer < 0 || device_layer >= grid.nz)
        throw ValidationError("model: device_layer out of range");

    std::set<std::string> names;
    for (const auto& u : units) {
        if (u.name.empty()) throw ValidationError("unit names must be nonempty");
        if (!names.insert(u.name).second)
            throw ValidationError("duplicate unit name '" + u.name + "'");
        if (!(u.width > 0.0) || !(u.height > 0.0))
            throw ValidationError("unit '" + u.name + "': width/height must be positive");
        const double eps = 1e-9 * std::max(grid.width(), grid.height());
        if (u.x0 < grid.origin[0] - eps || u.y0 < grid.origin[1] - eps ||
            u.x0 + u.width > grid.origin[0] + grid.width() + eps ||
            u.y0 + u.height > grid.origin[1] + grid.height() + eps)
            throw ValidationError("unit '" + u.name + "' lies outside the chip footprint");
    }
}

int ChipModel::layer_of(int k) const {
    int z = 0;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        z += layers[l].cells;
        if (k < z) return int(l);
    }
    return int(layers.size()) - 1;
}

double ChipModel::rho_c(int k) const {
    const MaterialLayer& l = layers[layer_of(k)];
    return l.rho * l.c_heat;
}

double ChipModel::k_cond(int k) const { return layers[layer_of(k)].k_cond; }

double ChipModel::ambient() const {
    for (const auto& f : boundary.faces)
        if (f.robin) return f.t_ambient;
    return 0.0;
}

const FunctionalUnit* ChipModel::find_unit(const std::string& name) const {
    for (const auto& u : units)
        if (u.name == name) return &u;
    return nullptr;
}

} // namespace thermrom
