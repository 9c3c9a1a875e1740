#include "thermrom/dns.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "thermrom/error.hpp"

namespace thermrom {

void DnsConfig::validate() const {
    if (!(time_step > 0.0)) throw ValidationError("dns: time_step must be positive");
    if (!(linear_tolerance > 0.0 && linear_tolerance < 1.0))
        throw ValidationError("dns: linear_tolerance must lie in (0, 1)");
    if (max_linear_iters < 1) throw ValidationError("dns: max_linear_iters must be >= 1");
}

TransientSolver::TransientSolver(const ChipModel& model, const ThermalOperator& op,
                                 const DnsConfig& cfg)
    : op_(&op), cfg_(cfg), ambient_(model.ambient()) {
    cfg_.validate();
    rel_source_ = op.relative_boundary_source(ambient_);

    lhs_ = op.conduction;
    for (std::int64_t c = 0; c < op.grid.cell_count(); ++c)
        lhs_.coeffRef(c, c) += op.heat_capacity[c] / cfg_.time_step;
    lhs_.makeCompressed();

    cg_.setTolerance(cfg_.linear_tolerance);
    cg_.setMaxIterations(cfg_.max_linear_iters);
    cg_.compute(lhs_);
}

ThermalField TransientSolver::initial_field() const {
    ThermalField f;
    f.grid = op_->grid;
    f.values = Eigen::VectorXd::Constant(op_->grid.cell_count(),
                                         cfg_.initial_temperature.value_or(ambient_));
    f.timestamp = 0.0;
    return f;
}

void TransientSolver::step(ThermalField& state, const Eigen::VectorXd& cell_power_w) {
    const double inv_dt = 1.0 / cfg_.time_step;
    Eigen::VectorXd theta = state.values.array() - ambient_;
    Eigen::VectorXd rhs =
        (op_->heat_capacity.array() * inv_dt * theta.array()).matrix() + cell_power_w + rel_source_;

    theta = cg_.solve(rhs);
    last_iterations_ = int(cg_.iterations());
    if (cg_.info() != Eigen::Success)
        throw NumericalError("transient CG failed to converge within " +
                             std::to_string(cfg_.max_linear_iters) +
                             " iterations (relative residual " + std::to_string(cg_.error()) + ")");

    state.values = theta.array() + ambient_;
    state.timestamp += cfg_.time_step;
}

ThermalField step_transient(const ChipModel& model, const ThermalOperator& op,
                            const ThermalField& state, const Eigen::VectorXd& power_density,
                            const DnsConfig& cfg) {
    if (state.values.size() != op.grid.cell_count())
        throw ValidationError("step_transient: field size does not match grid");
    if (!power_density.allFinite())
        throw ValidationError("step_transient: power density must be finite");
    TransientSolver solver(model, op, cfg);
    ThermalField next = state;
    solver.step(next, power_density * op.grid.cell_volume());
    return next;
}

TransientResult run_transient(const ChipModel& model, const HsbPartition& part,
                              const PowerTrace& trace, const DnsConfig& cfg, int sample_every,
                              const std::function<void(int, const ThermalField&)>& on_step) {
    trace.validate();
    if (sample_every < 1) throw ValidationError("run_transient: sample_every must be >= 1");
    if (std::fabs(trace.time_step - cfg.time_step) > 1e-12 * cfg.time_step)
        throw ValidationError("run_transient: trace time_step differs from solver time_step");

    const ThermalOperator op = assemble_operator(model);
    TransientSolver solver(model, op, cfg);
    const std::vector<int> cols = trace.column_map(part);

    TransientResult out;
    ThermalField state = solver.initial_field();
    const int n = trace.n_steps();
    Eigen::VectorXd block_powers(part.size());

    const auto t0 = std::chrono::steady_clock::now();
    for (int k = 0; k < n; ++k) {
        for (std::size_t b = 0; b < part.size(); ++b) block_powers[b] = trace.powers(k, cols[b]);
        solver.step(state, cell_power(model, part, block_powers));
        out.cg_iterations += solver.last_iterations();
        if (on_step) on_step(k + 1, state);
        if ((k + 1) % sample_every == 0 || k + 1 == n) out.fields.push_back(state);
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.steps = n;
    return out;
}

ThermalField steady_state(const ChipModel& model, const HsbPartition& part,
                          const Eigen::VectorXd& static_powers, const DnsConfig& cfg) {
    model.validate();
    cfg.validate();
    const ThermalOperator op = assemble_operator(model);
    const double ambient = model.ambient();

    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                             Eigen::DiagonalPreconditioner<double>>
        cg;
    cg.setTolerance(cfg.linear_tolerance);
    cg.setMaxIterations(cfg.max_linear_iters);
    cg.compute(op.conduction);

    const Eigen::VectorXd rhs =
        cell_power(model, part, static_powers) + op.relative_boundary_source(ambient);
    const Eigen::VectorXd theta = cg.solve(rhs);
    if (cg.info() != Eigen::Success)
        throw NumericalError("steady-state CG failed to converge within " +
                             std::to_string(cfg.max_linear_iters) +
                             " iterations (relative residual " + std::to_string(cg.error()) + ")");

    ThermalField f;
    f.grid = model.grid;
    f.values = theta.array() + ambient;
    f.timestamp = 0.0;
    return f;
}

} // namespace thermrom
