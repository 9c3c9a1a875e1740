#include "thermrom/operator.hpp"

#include <cmath>
#include <vector>

#include "thermrom/error.hpp"

namespace thermrom {

namespace {

// Conductance of the face between two cells a distance d apart, with
// conductivities k1, k2 on either side: series resistance of two half-cells.
double face_conductance(double k1, double k2, double area, double d) {
    return area * 2.0 * k1 * k2 / (d * (k1 + k2));
}

} // namespace

ThermalOperator assemble_operator(const ChipModel& model) {
    model.validate();
    const Grid3D& g = model.grid;
    const std::int64_t n = g.cell_count();

    ThermalOperator op;
    op.grid = g;
    op.heat_capacity.resize(n);
    op.boundary_source = Eigen::VectorXd::Zero(n);
    op.robin_conductance = Eigen::VectorXd::Zero(n);

    const double ax = g.dy * g.dz;  // face areas per axis
    const double ay = g.dx * g.dz;
    const double az = g.dx * g.dy;
    const double vcell = g.cell_volume();

    // per-slice properties (material varies only in z)
    std::vector<double> kz(g.nz), rc(g.nz);
    for (int k = 0; k < g.nz; ++k) {
        kz[k] = model.k_cond(k);
        rc[k] = model.rho_c(k);
    }

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(std::size_t(n) * 7);

    auto robin = [&](std::int64_t c, Face f, double area) {
        const FaceBc& bc = model.boundary.at(f);
        if (!bc.robin) return;
        trip.emplace_back(int(c), int(c), bc.h * area);
        op.robin_conductance[c] += bc.h * area;
        op.boundary_source[c] += bc.h * area * bc.t_ambient;
    };

    for (int k = 0; k < g.nz; ++k) {
        for (int j = 0; j < g.ny; ++j) {
            for (int i = 0; i < g.nx; ++i) {
                const std::int64_t c = g.flat(i, j, k);
                op.heat_capacity[c] = rc[k] * vcell;

                // +x / +y neighbors share the slice conductivity
                if (i + 1 < g.nx) {
                    const double gc = kz[k] * ax / g.dx;
                    const std::int64_t nb = g.flat(i + 1, j, k);
                    trip.emplace_back(int(c), int(c), gc);
                    trip.emplace_back(int(nb), int(nb), gc);
                    trip.emplace_back(int(c), int(nb), -gc);
                    trip.emplace_back(int(nb), int(c), -gc);
                }
                if (j + 1 < g.ny) {
                    const double gc = kz[k] * ay / g.dy;
                    const std::int64_t nb = g.flat(i, j + 1, k);
                    trip.emplace_back(int(c), int(c), gc);
                    trip.emplace_back(int(nb), int(nb), gc);
                    trip.emplace_back(int(c), int(nb), -gc);
                    trip.emplace_back(int(nb), int(c), -gc);
                }
                // +z neighbor may cross a material interface
                if (k + 1 < g.nz) {
                    const double gc = face_conductance(kz[k], kz[k + 1], az, g.dz);
                    const std::int64_t nb = g.flat(i, j, k + 1);
                    trip.emplace_back(int(c), int(c), gc);
                    trip.emplace_back(int(nb), int(nb), gc);
                    trip.emplace_back(int(c), int(nb), -gc);
                    trip.emplace_back(int(nb), int(c), -gc);
                }

                if (i == 0) robin(c, Face::XMin, ax);
                if (i == g.nx - 1) robin(c, Face::XMax, ax);
                if (j == 0) robin(c, Face::YMin, ay);
                if (j == g.ny - 1) robin(c, Face::YMax, ay);
                if (k == 0) robin(c, Face::ZMin, az);
                if (k == g.nz - 1) robin(c, Face::ZMax, az);
            }
        }
    }

    op.conduction.resize(n, n);
    op.conduction.setFromTriplets(trip.begin(), trip.end());
    op.conduction.makeCompressed();

    // symmetry check; assembly above is symmetric by construction
    Eigen::SparseMatrix<double> skew = Eigen::SparseMatrix<double>(op.conduction.transpose()) - op.conduction;
    const double scale = op.conduction.coeffs().cwiseAbs().maxCoeff();
    if (skew.coeffs().size() > 0 && skew.coeffs().cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw NumericalError("internal error: conduction operator is not symmetric");

    return op;
}

} // namespace thermrom
