#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>

#include "helpers.hpp"
#include "thermrom/dns.hpp"
#include "thermrom/error.hpp"
#include "thermrom/pod.hpp"

using namespace thermrom;

namespace {

SnapshotSet train_set(const ChipModel& m, const HsbPartition& part, std::size_t block,
                      int n_steps, std::uint64_t seed) {
    ExcitationConfig ex;
    ex.n_steps = n_steps;
    ex.hold_steps = 4;
    ex.p_max = 5.0;
    ex.seed = seed;
    DnsConfig cfg;
    cfg.time_step = 1e-3;
    return collect_snapshots(m, part, random_excitation(part, block, cfg.time_step, ex), cfg,
                             1);
}

} // namespace

TEST_CASE("random excitation drives exactly one block with held levels") {
    const ChipModel m = testing::tiny_model();
    const HsbPartition part = make_partition(m);
    ExcitationConfig ex;
    ex.n_steps = 11;
    ex.hold_steps = 4;
    ex.p_max = 7.0;
    ex.seed = 9;
    const PowerTrace t = random_excitation(part, 1, 1e-4, ex);
    t.validate();
    REQUIRE(t.n_steps() == 11);
    CHECK(t.powers.col(0).cwiseAbs().maxCoeff() == 0.0);
    CHECK(t.powers.col(2).cwiseAbs().maxCoeff() == 0.0);
    // piecewise-constant holds of 4, last one truncated
    for (int s : {0, 1, 2, 3}) CHECK(t.powers(s, 1) == t.powers(0, 1));
    for (int s : {4, 5, 6, 7}) CHECK(t.powers(s, 1) == t.powers(4, 1));
    CHECK(t.powers(0, 1) != t.powers(4, 1));
    CHECK(t.powers.col(1).maxCoeff() < 7.0);
    CHECK(t.powers.col(1).minCoeff() >= 0.0);
    // deterministic in the seed
    CHECK(random_excitation(part, 1, 1e-4, ex).powers == t.powers);
    ex.seed = 10;
    CHECK(random_excitation(part, 1, 1e-4, ex).powers != t.powers);
    CHECK_THROWS_AS(random_excitation(part, 5, 1e-4, ex), ValidationError);
}

TEST_CASE("random power map excites every block independently") {
    const ChipModel m = testing::tiny_model();
    const HsbPartition part = make_partition(m);
    ExcitationConfig ex;
    ex.n_steps = 8;
    ex.hold_steps = 4;
    ex.seed = 100;
    const PowerTrace t = random_power_map(part, 1e-4, ex);
    t.validate();
    for (int c = 0; c < 3; ++c) CHECK(t.powers.col(c).maxCoeff() > 0.0);
    // block n draws the stream seeded with seed + n
    ExcitationConfig one = ex;
    one.seed = 101;
    CHECK(t.powers.col(1) == random_excitation(part, 1, 1e-4, one).powers.col(1));
}

TEST_CASE("snapshots are ambient-relative and volume-weighted") {
    const ChipModel m = testing::tiny_model();
    const HsbPartition part = make_partition(m);
    const SnapshotSet s = train_set(m, part, 0, 12, 3);
    REQUIRE(s.count() == 12);
    REQUIRE(s.columns.rows() == m.grid.cell_count());
    CHECK(s.columns.col(0).minCoeff() >= 0.0);  // heating only
    CHECK(s.columns.col(11).maxCoeff() > 0.0);
    CHECK(s.volume_weights.size() == m.grid.cell_count());
    CHECK(s.volume_weights.minCoeff() == doctest::Approx(m.grid.cell_volume()));
    CHECK(s.volume_weights.maxCoeff() == doctest::Approx(m.grid.cell_volume()));

    SUBCASE("sampling every k-th field") {
        const PowerTrace ex = random_excitation(part, 0, 1e-3, {12, 4, 5.0, 3});
        DnsConfig cfg;
        cfg.time_step = 1e-3;
        const SnapshotSet s3 = collect_snapshots(m, part, ex, cfg, 3);
        REQUIRE(s3.count() == 4);
        CHECK(s3.columns.col(3) == s.columns.col(11));
    }
    SUBCASE("multi-block excitation is rejected") {
        ExcitationConfig ex;
        ex.n_steps = 4;
        DnsConfig cfg;
        CHECK_THROWS_AS(collect_snapshots(m, part, random_power_map(part, 1e-4, ex), cfg, 1),
                        ValidationError);
    }
}

TEST_CASE("solve_modes reproduces a dense gram eigensolve") {
    const ChipModel m = testing::tiny_model();
    const HsbPartition part = make_partition(m);
    const SnapshotSet s = train_set(m, part, 1, 10, 7);
    const PodBasis basis = solve_modes(s, 10);

    // independent oracle: dense Gram K_ab = (1/N_s) sum_c w_c T_a(c) T_b(c)
    const Eigen::MatrixXd K =
        s.columns.transpose() * s.volume_weights.asDiagonal() * s.columns / double(s.count());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
    REQUIRE(es.info() == Eigen::Success);
    Eigen::VectorXd lam = es.eigenvalues().reverse();  // descending

    REQUIRE(basis.n_snapshots == 10);
    REQUIRE(basis.spectrum.size() == 10);
    for (int i = 0; i < basis.mode_count(); ++i)
        CHECK(basis.eigenvalues[i] == doctest::Approx(lam[i]).epsilon(1e-9));
    for (int i = 0; i < 10; ++i)
        CHECK(basis.spectrum[i] == doctest::Approx(std::max(lam[i], 0.0)).epsilon(1e-9));

    // descending order, positive retained eigenvalues
    for (int i = 1; i < basis.mode_count(); ++i)
        CHECK(basis.eigenvalues[i] <= basis.eigenvalues[i - 1]);
    CHECK(basis.eigenvalues.minCoeff() > 0.0);
}

TEST_CASE("modes are orthonormal under the volume-weighted inner product") {
    const ChipModel m = testing::tiny_model();
    const HsbPartition part = make_partition(m);
    const SnapshotSet s = train_set(m, part, 2, 14, 21);
    const PodBasis basis = solve_modes(s, 6);
    REQUIRE(basis.mode_count() > 1);

    const Eigen::MatrixXd gram =
        basis.modes.transpose() * s.volume_weights.asDiagonal() * basis.modes;
    CHECK((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() <
          1e-8);

    // snapshots lie in the span at full rank: projection reproduces them
    const PodBasis full = solve_modes(s, 14);
    const Eigen::MatrixXd coeffs =
        full.modes.transpose() * s.volume_weights.asDiagonal() * s.columns;
    CHECK((full.modes * coeffs - s.columns).norm() < 1e-5 * s.columns.norm());
}

TEST_CASE("solve_modes is deterministic and truncates noise modes") {
    const ChipModel m = testing::tiny_model();
    const HsbPartition part = make_partition(m);
    const SnapshotSet s = train_set(m, part, 0, 9, 5);
    const PodBasis a = solve_modes(s, 20);
    const PodBasis b = solve_modes(s, 20);
    CHECK(a.modes == b.modes);  // bitwise determinism
    CHECK(a.eigenvalues == b.eigenvalues);
    CHECK(a.mode_count() <= 9);
    CHECK_FALSE(a.domain.has_value());

    // duplicated snapshots do not add rank
    SnapshotSet dup = s;
    dup.columns.conservativeResize(Eigen::NoChange, 18);
    dup.columns.rightCols(9) = s.columns;
    const PodBasis c = solve_modes(dup, 20);
    CHECK(c.mode_count() <= a.mode_count() + 1);
}

TEST_CASE("equivalent spectrum is the area-weighted sum of padded spectra") {
    PodBasis a, b;
    a.spectrum = Eigen::Vector3d(4.0, 1.0, 0.25);
    b.spectrum = Eigen::Vector2d(2.0, 0.5);
    const Eigen::VectorXd eq = equivalent_spectrum({&a, &b}, {0.75, 0.25}, 3);
    CHECK(eq[0] == doctest::Approx(0.75 * 4.0 + 0.25 * 2.0));
    CHECK(eq[1] == doctest::Approx(0.75 * 1.0 + 0.25 * 0.5));
    CHECK(eq[2] == doctest::Approx(0.75 * 0.25));
    CHECK_THROWS_AS(equivalent_spectrum({&a}, {0.5, 0.5}, 3), ValidationError);
}

TEST_CASE("theoretical error is the normalized spectral tail") {
    Eigen::VectorXd lam(4);
    lam << 8.0, 4.0, 2.0, 2.0;
    CHECK(lse_theoretical(lam, 1, 4) == doctest::Approx(std::sqrt(8.0 / 16.0)));
    CHECK(lse_theoretical(lam, 2, 4) == doctest::Approx(std::sqrt(4.0 / 16.0)));
    CHECK(lse_theoretical(lam, 3, 4) == doctest::Approx(std::sqrt(2.0 / 16.0)));
    // defined for 1 <= M < N_s only
    CHECK_THROWS_AS(lse_theoretical(lam, 0, 4), ValidationError);
    CHECK_THROWS_AS(lse_theoretical(lam, 4, 4), ValidationError);
    // monotone nonincreasing in M
    double prev = 1.0;
    for (int mcount = 1; mcount < 4; ++mcount) {
        const double v = lse_theoretical(lam, mcount, 4);
        CHECK(v <= prev + 1e-15);
        prev = v;
    }
}
