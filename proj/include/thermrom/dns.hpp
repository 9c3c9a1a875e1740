#pragma once

#include <Eigen/IterativeLinearSolvers>
#include <functional>
#include <optional>
#include <vector>

#include "thermrom/operator.hpp"
#include "thermrom/power.hpp"

namespace thermrom {

struct DnsConfig {
    double time_step = 1e-4;          // s
    double linear_tolerance = 1e-9;   // relative residual
    int max_linear_iters = 10000;
    std::optional<double> initial_temperature;  // K; defaults to model ambient

    void validate() const;
};

/// Temperature sample on the grid, absolute kelvin.
struct ThermalField {
    Grid3D grid;
    Eigen::VectorXd values;
    double timestamp = 0.0;
};

/// Backward-Euler time stepper for M dT/dt = -A T + b + q, solved each step
/// with Jacobi-preconditioned CG. Internally works on the ambient-relative
/// field so a zero-power chip stays exactly at equilibrium.
class TransientSolver {
public:
    TransientSolver(const ChipModel& model, const ThermalOperator& op, const DnsConfig& cfg);

    ThermalField initial_field() const;

    /// One implicit step under cell-integrated power q (W per cell).
    void step(ThermalField& state, const Eigen::VectorXd& cell_power_w);

    int last_iterations() const { return last_iterations_; }

private:
    const ThermalOperator* op_;
    DnsConfig cfg_;
    double ambient_;
    Eigen::VectorXd rel_source_;
    Eigen::SparseMatrix<double> lhs_;
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                             Eigen::DiagonalPreconditioner<double>>
        cg_;
    int last_iterations_ = 0;
};

/// Convenience single step: volumetric power density in, advanced field out.
ThermalField step_transient(const ChipModel& model, const ThermalOperator& op,
                            const ThermalField& state, const Eigen::VectorXd& power_density,
                            const DnsConfig& cfg);

struct TransientResult {
    std::vector<ThermalField> fields;  // sampled, plus always the final step
    int steps = 0;
    long cg_iterations = 0;
    double seconds = 0.0;  // wall clock of the marching loop
};

/// Marches the whole trace from a uniform initial field, emitting every
/// sample_every-th field and always the final one. `on_step` (if set) sees
/// every step in order.
TransientResult run_transient(const ChipModel& model, const HsbPartition& part,
                              const PowerTrace& trace, const DnsConfig& cfg, int sample_every,
                              const std::function<void(int, const ThermalField&)>& on_step = {});

/// Steady solution of A T = b + q under constant block powers.
ThermalField steady_state(const ChipModel& model, const HsbPartition& part,
                          const Eigen::VectorXd& static_powers, const DnsConfig& cfg = {});

} // namespace thermrom
