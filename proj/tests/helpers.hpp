// Shared fixtures for the test suite: small chip models that exercise every
// code path while keeping single-core runtimes low.
#pragma once

#include <Eigen/Dense>

#include "thermrom/model.hpp"
#include "thermrom/partition.hpp"

namespace testing {

using namespace thermrom;

/// 12 x 12 x 4 two-layer chip with three powered units and one dark one.
inline ChipModel tiny_model() {
    ChipModel m;
    m.grid = {12, 12, 4, 2.5e-4, 2.5e-4, 1.0e-4, {0.0, 0.0, 0.0}};
    m.layers = {{3, 2330.0, 700.0, 130.0}, {1, 2200.0, 730.0, 1.4}};
    m.boundary.faces[int(Face::ZMin)] = {true, 2.0e4, 300.0};
    m.device_layer = 2;
    m.units = {
        {"left", 0.0, 0.0, 1.5e-3, 1.5e-3, true},
        {"right", 1.5e-3, 0.0, 1.5e-3, 1.5e-3, true},
        {"top", 0.0, 1.5e-3, 3.0e-3, 1.25e-3, true},
        {"dark", 0.0, 2.75e-3, 3.0e-3, 0.25e-3, false},
    };
    m.validate();
    return m;
}

/// Homogeneous 3 x 3 block array for truncated-domain tests.
inline ChipModel mini_many(int cells_per_block = 4, int gap_cells = 6, int nz = 4) {
    const int lateral = 3 * cells_per_block + 4 * gap_cells;
    ChipModel m;
    m.grid = {lateral, lateral, nz, 2.5e-4, 2.5e-4, 1.0e-4, {0.0, 0.0, 0.0}};
    m.layers = {{nz, 2330.0, 700.0, 130.0}};
    m.boundary.faces[int(Face::ZMin)] = {true, 2.0e5, 300.0};
    m.device_layer = nz - 2;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            FunctionalUnit u;
            u.name = "b" + std::to_string(r) + std::to_string(c);
            u.x0 = (gap_cells + c * (cells_per_block + gap_cells)) * m.grid.dx;
            u.y0 = (gap_cells + r * (cells_per_block + gap_cells)) * m.grid.dy;
            u.width = cells_per_block * m.grid.dx;
            u.height = cells_per_block * m.grid.dy;
            m.units.push_back(u);
        }
    m.validate();
    return m;
}

inline double rel_err(const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
    const double denom = want.norm();
    return denom > 0.0 ? (got - want).norm() / denom : (got - want).norm();
}

} // namespace testing
