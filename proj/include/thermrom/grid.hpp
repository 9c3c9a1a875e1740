#pragma once

#include <array>
#include <cstdint>

namespace thermrom {

/// Structured 3D cell grid. Cell (i,j,k) has its center at
/// origin + ((i+1/2)dx, (j+1/2)dy, (k+1/2)dz); flat indices run x-fastest.
struct Grid3D {
    int nx = 0, ny = 0, nz = 0;
    double dx = 0.0, dy = 0.0, dz = 0.0;
    std::array<double, 3> origin{0.0, 0.0, 0.0};

    std::int64_t cell_count() const {
        return std::int64_t(nx) * ny * nz;
    }
    double cell_volume() const { return dx * dy * dz; }

    std::int64_t flat(int i, int j, int k) const {
        return std::int64_t(k) * ny * nx + std::int64_t(j) * nx + i;
    }
    std::array<int, 3> unflat(std::int64_t f) const {
        const std::int64_t plane = std::int64_t(nx) * ny;
        const int k = int(f / plane);
        const std::int64_t r = f % plane;
        return {int(r % nx), int(r / nx), k};
    }

    double xc(int i) const { return origin[0] + (i + 0.5) * dx; }
    double yc(int j) const { return origin[1] + (j + 0.5) * dy; }
    double zc(int k) const { return origin[2] + (k + 0.5) * dz; }

    double width() const { return nx * dx; }
    double height() const { return ny * dy; }
    double thickness() const { return nz * dz; }

    bool operator==(const Grid3D&) const = default;

    void validate() const; // throws ValidationError
};

} // namespace thermrom
