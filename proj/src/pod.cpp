#include "thermrom/pod.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

#include "thermrom/error.hpp"

namespace thermrom {

PowerTrace random_excitation(const HsbPartition& part, std::size_t active_block,
                             double time_step, const ExcitationConfig& cfg) {
    if (active_block >= part.size())
        throw ValidationError("random_excitation: block index out of range");
    if (!(cfg.p_max > 0.0)) throw ValidationError("random_excitation: p_max must be positive");
    if (cfg.hold_steps < 1) throw ValidationError("random_excitation: hold_steps must be >= 1");
    if (cfg.n_steps < 1) throw ValidationError("random_excitation: n_steps must be >= 1");

    PowerTrace trace;
    trace.time_step = time_step;
    for (const auto& b : part.blocks) trace.block_ids.push_back(b.id);
    trace.powers = Eigen::MatrixXd::Zero(cfg.n_steps, part.size());

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> level(0.0, cfg.p_max);
    for (int k = 0; k < cfg.n_steps; k += cfg.hold_steps) {
        const double p = level(rng);
        const int end = std::min(cfg.n_steps, k + cfg.hold_steps);
        for (int s = k; s < end; ++s) trace.powers(s, active_block) = p;
    }
    return trace;
}

PowerTrace random_power_map(const HsbPartition& part, double time_step,
                            const ExcitationConfig& cfg) {
    if (!(cfg.p_max > 0.0)) throw ValidationError("random_power_map: p_max must be positive");
    if (cfg.hold_steps < 1) throw ValidationError("random_power_map: hold_steps must be >= 1");
    if (cfg.n_steps < 1) throw ValidationError("random_power_map: n_steps must be >= 1");

    PowerTrace trace;
    trace.time_step = time_step;
    for (const auto& b : part.blocks) trace.block_ids.push_back(b.id);
    trace.powers = Eigen::MatrixXd::Zero(cfg.n_steps, part.size());

    for (std::size_t n = 0; n < part.size(); ++n) {
        std::mt19937_64 rng(cfg.seed + n);
        std::uniform_real_distribution<double> level(0.0, cfg.p_max);
        for (int k = 0; k < cfg.n_steps; k += cfg.hold_steps) {
            const double p = level(rng);
            const int end = std::min(cfg.n_steps, k + cfg.hold_steps);
            for (int s = k; s < end; ++s) trace.powers(s, n) = p;
        }
    }
    return trace;
}

SnapshotSet collect_snapshots(const ChipModel& model, const HsbPartition& part,
                              const PowerTrace& excitation, const DnsConfig& cfg,
                              int sample_every) {
    int active = -1;
    for (int c = 0; c < excitation.powers.cols(); ++c) {
        if (excitation.powers.col(c).any()) {
            if (active >= 0)
                throw ValidationError("collect_snapshots: excitation powers more than one block");
            active = c;
        }
    }

    const double ambient = model.ambient();
    TransientResult run = run_transient(model, part, excitation, cfg, sample_every);

    SnapshotSet set;
    set.grid = model.grid;
    set.columns.resize(model.grid.cell_count(), long(run.fields.size()));
    for (std::size_t s = 0; s < run.fields.size(); ++s)
        set.columns.col(long(s)) = run.fields[s].values.array() - ambient;

    set.volume_weights =
        Eigen::VectorXd::Constant(model.grid.cell_count(), model.grid.cell_volume());
    return set;
}

PodBasis solve_modes(const SnapshotSet& snapshots, int max_modes) {
    const int ns = snapshots.count();
    if (ns < 2) throw ValidationError("solve_modes: need at least 2 snapshots");
    if (max_modes < 1) throw ValidationError("solve_modes: max_modes must be >= 1");
    if (!snapshots.columns.allFinite())
        throw ValidationError("solve_modes: snapshots contain non-finite values");

    // volume-weighted Gram matrix K_ab = (1/N_s) * integral(T_a T_b)
    const Eigen::MatrixXd weighted =
        snapshots.volume_weights.asDiagonal() * snapshots.columns;
    Eigen::MatrixXd gram = (snapshots.columns.transpose() * weighted) / double(ns);
    gram = 0.5 * (gram + gram.transpose().eval());

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success)
        throw NumericalError("solve_modes: Gram eigendecomposition failed");

    // ascending from Eigen; flip to descending
    Eigen::VectorXd lambda(ns);
    Eigen::MatrixXd vecs(ns, ns);
    for (int i = 0; i < ns; ++i) {
        lambda[i] = eig.eigenvalues()[ns - 1 - i];
        vecs.col(i) = eig.eigenvectors().col(ns - 1 - i);
    }

    if (!(lambda[0] > 0.0)) throw ValidationError("solve_modes: degenerate training data");

    const double floor = 1e-12 * lambda[0];
    int rank = 0;
    while (rank < ns && lambda[rank] > floor) ++rank;

    PodBasis basis;
    basis.n_snapshots = ns;
    basis.spectrum = lambda.cwiseMax(0.0);
    const int m = std::min(max_modes, rank);
    basis.eigenvalues = lambda.head(m);
    basis.modes.resize(snapshots.columns.rows(), m);
    for (int i = 0; i < m; ++i) {
        // eigenvector lifts to a field; normalize under the weighted product
        basis.modes.col(i) = snapshots.columns * vecs.col(i) / std::sqrt(double(ns) * lambda[i]);
    }

    // Roundoff near the rank floor leaves ~1e-7 cross terms; one symmetric
    // polish restores orthonormality to machine precision without reordering.
    const Eigen::MatrixXd small =
        basis.modes.transpose() * snapshots.volume_weights.asDiagonal() * basis.modes;
    const Eigen::LLT<Eigen::MatrixXd> llt(small);
    if (llt.info() == Eigen::Success)
        basis.modes = llt.matrixL().solve(basis.modes.transpose()).transpose();
    return basis;
}

Eigen::VectorXd equivalent_spectrum(const std::vector<const PodBasis*>& bases,
                                    const std::vector<double>& weights, int length) {
    if (bases.size() != weights.size() || bases.empty())
        throw ValidationError("equivalent_spectrum: bases/weights count mismatch");
    Eigen::VectorXd eq = Eigen::VectorXd::Zero(length);
    for (std::size_t n = 0; n < bases.size(); ++n) {
        const Eigen::VectorXd& s = bases[n]->spectrum;
        const int take = std::min(length, int(s.size()));
        eq.head(take) += weights[n] * s.head(take);
    }
    return eq;
}

double lse_theoretical(const Eigen::VectorXd& spectrum, int n_modes, int n_snapshots) {
    if (n_modes < 1 || n_modes >= n_snapshots)
        throw ValidationError("lse_theoretical: need 1 <= M < N_s");
    if (spectrum.size() < n_snapshots)
        throw ValidationError("lse_theoretical: spectrum shorter than N_s");
    const double total = spectrum.head(n_snapshots).sum();
    if (!(total > 0.0)) throw ValidationError("lse_theoretical: zero total spectrum");
    const double tail = spectrum.segment(n_modes, n_snapshots - n_modes).sum();
    return std::sqrt(std::max(0.0, tail) / total);
}

} // namespace thermrom
