#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "thermrom/dns.hpp"
#include "thermrom/error.hpp"
#include "thermrom/metrics.hpp"

using namespace thermrom;

namespace {

/// 2 x 2 x 1 unit-cell grid for hand-checkable norms.
Grid3D unit_grid() { return {2, 2, 1, 1.0, 1.0, 1.0, {0.0, 0.0, 0.0}}; }

ThermalField field_of(const Grid3D& g, std::initializer_list<double> vals, double t) {
    ThermalField f;
    f.grid = g;
    f.values = Eigen::Map<const Eigen::VectorXd>(std::data(vals), std::ssize(vals));
    f.timestamp = t;
    return f;
}

Ensemble quick_ensemble(const ChipModel& m, const HsbPartition& part) {
    TrainingConfig cfg;
    cfg.n_steps = 40;
    cfg.hold_steps = 4;
    cfg.p_max = 5.0;
    cfg.time_step = 2e-4;
    cfg.max_modes = 12;
    return train_ensemble(m, part, cfg);
}

PowerTrace bench_trace(const HsbPartition& part, int n_steps, double dt) {
    ExcitationConfig ex;
    ex.n_steps = n_steps;
    ex.hold_steps = 5;
    ex.p_max = 4.0;
    ex.seed = 99;
    return random_power_map(part, dt, ex);
}

} // namespace

TEST_CASE("regions resolve to inclusive grid bounds") {
    const Grid3D g{12, 10, 4, 1e-4, 1e-4, 1e-4, {0.0, 0.0, 0.0}};

    CHECK(Region::all().bounds(g) == std::array<int, 6>{0, 11, 0, 9, 0, 3});
    CHECK(Region::device_layer(2).bounds(g) == std::array<int, 6>{0, 11, 0, 9, 2, 2});
    CHECK(Region::lateral(DomainBox{2, 3, 4, 5}).bounds(g) ==
          std::array<int, 6>{2, 5, 3, 7, 0, 3});

    CHECK_THROWS_AS(Region::device_layer(4).bounds(g), ValidationError);
    CHECK_THROWS_AS(Region::lateral(DomainBox{10, 0, 4, 2}).bounds(g), ValidationError);
    CHECK_THROWS_AS((Region{{}, 3, 1}).bounds(g), ValidationError);
    CHECK_THROWS_AS((Region{{}, -1, 2}).bounds(g), ValidationError);
}

TEST_CASE("error norm matches a hand computation and is decomposable") {
    const Grid3D g = unit_grid();
    const Eigen::VectorXd ref = (Eigen::VectorXd(4) << 301.0, 302.0, 303.0, 304.0).finished();
    const Eigen::VectorXd pred = (Eigen::VectorXd(4) << 302.0, 301.0, 305.0, 304.0).finished();

    SUBCASE("hand value") {
        LseParts p;
        p.accumulate(g, ref, pred, Region::all(), 300.0);
        // errors 1, -1, 2, 0 -> num 6; rises 1..4 -> den 30
        CHECK(p.num == doctest::Approx(6.0));
        CHECK(p.den == doctest::Approx(30.0));
        CHECK(p.value() == doctest::Approx(std::sqrt(6.0 / 30.0)));
    }

    SUBCASE("volume weighting scales numerator and denominator together") {
        Grid3D gs = g;
        gs.dx = 2.0;  // cells twice as large
        LseParts a, b;
        a.accumulate(g, ref, pred, Region::all(), 300.0);
        b.accumulate(gs, ref, pred, Region::all(), 300.0);
        CHECK(b.num == doctest::Approx(2.0 * a.num));
        CHECK(b.value() == doctest::Approx(a.value()));
    }

    SUBCASE("a perfect prediction scores zero") {
        LseParts p;
        p.accumulate(g, ref, ref, Region::all(), 300.0);
        CHECK(p.num == 0.0);
        CHECK(p.value() == 0.0);
    }

    SUBCASE("disjoint lateral halves add up to the whole") {
        LseParts whole, left, right;
        whole.accumulate(g, ref, pred, Region::all(), 300.0);
        left.accumulate(g, ref, pred, Region::lateral(DomainBox{0, 0, 1, 2}), 300.0);
        right.accumulate(g, ref, pred, Region::lateral(DomainBox{1, 0, 1, 2}), 300.0);
        LseParts sum = left;
        sum += right;
        CHECK(sum.num == doctest::Approx(whole.num).epsilon(1e-12));
        CHECK(sum.den == doctest::Approx(whole.den).epsilon(1e-12));
    }

    SUBCASE("an all-ambient reference has no norm to divide by") {
        LseParts p;
        const Eigen::VectorXd flat = Eigen::VectorXd::Constant(4, 300.0);
        p.accumulate(g, flat, pred, Region::all(), 300.0);
        CHECK_THROWS_AS(p.value(), NumericalError);
    }

    SUBCASE("field sizes must match the grid") {
        LseParts p;
        CHECK_THROWS_AS(p.accumulate(g, Eigen::VectorXd::Zero(3), pred, Region::all(), 300.0),
                        ValidationError);
    }
}

TEST_CASE("stepwise norm aligns fields pairwise") {
    const Grid3D g = unit_grid();
    const std::vector<ThermalField> ref = {field_of(g, {301, 302, 303, 304}, 0.1),
                                           field_of(g, {302, 303, 304, 305}, 0.2)};
    std::vector<ThermalField> pred = ref;
    pred[0].values[2] += 2.0;  // num 4, den over both steps 30 + 54

    CHECK(lse_numerical(ref, pred, Region::all(), 300.0) ==
          doctest::Approx(std::sqrt(4.0 / 84.0)));

    SUBCASE("mismatched inputs are rejected") {
        CHECK_THROWS_AS(lse_numerical({}, {}, Region::all(), 300.0), ValidationError);
        CHECK_THROWS_AS(lse_numerical(ref, {pred[0]}, Region::all(), 300.0), ValidationError);

        std::vector<ThermalField> late = ref;
        late[1].timestamp += 1e-6;
        CHECK_THROWS_AS(lse_numerical(ref, late, Region::all(), 300.0), ValidationError);

        std::vector<ThermalField> other = ref;
        other[0].grid.dx = 2.0;
        CHECK_THROWS_AS(lse_numerical(ref, other, Region::all(), 300.0), ValidationError);
    }
}

TEST_CASE("peak series records value, time and first-occurrence location") {
    const Grid3D g = unit_grid();
    const std::vector<ThermalField> fields = {field_of(g, {300, 305, 305, 300}, 0.0),
                                              field_of(g, {307, 301, 300, 300}, 0.5)};
    const auto series = max_temp_series(fields);
    REQUIRE(series.size() == 2);
    CHECK(series[0].t == doctest::Approx(0.0));
    CHECK(series[0].value == doctest::Approx(305.0));
    CHECK(series[0].cell == 1);  // tie resolves to the lowest flat index
    CHECK(series[1].value == doctest::Approx(307.0));
    CHECK(series[1].cell == 0);
    CHECK_THROWS_AS(max_temp_series(std::vector<ThermalField>{}), ValidationError);
}

TEST_CASE("reduced-path peak series agrees with explicit layer reconstruction") {
    const ChipModel m = testing::tiny_model();
    const HsbPartition part = make_partition(m);
    const Ensemble ens = quick_ensemble(m, part);
    const PowerTrace trace = bench_trace(part, 20, 2e-4);
    const EnsembleTrajectories traj = integrate_ensemble(ens, part, trace, 3);

    const auto series = max_temp_series(ens, traj, m.device_layer);
    REQUIRE(series.size() == 21);  // every trajectory row, including t = 0
    const std::int64_t plane = std::int64_t(m.grid.nx) * m.grid.ny;
    for (int s : {0, 7, 20}) {
        const Eigen::VectorXd layer = ensemble_layer(ens, traj, s, m.device_layer);
        Eigen::Index idx = 0;
        CHECK(series[s].value == doctest::Approx(layer.maxCoeff(&idx)));
        CHECK(series[s].cell == m.device_layer * plane + idx);
        CHECK(series[s].t == doctest::Approx(s * trace.time_step));
    }
    CHECK(series[0].value == doctest::Approx(m.ambient()));  // starts cold
}

TEST_CASE("bench mode names are stable") {
    CHECK(std::string(bench_mode_name(BenchMode::FullField)) == "full-field");
    CHECK(std::string(bench_mode_name(BenchMode::DeviceLayer)) == "device-layer");
    CHECK(std::string(bench_mode_name(BenchMode::PeakOnly)) == "peak-only");
}

TEST_CASE("speedup benchmark reports the error an external referee computes") {
    const ChipModel m = testing::tiny_model();
    const HsbPartition part = make_partition(m);
    const Ensemble ens = quick_ensemble(m, part);
    const PowerTrace trace = bench_trace(part, 30, 2e-4);
    const DnsConfig cfg{2e-4, 1e-9, 10000, {}};
    const int sample_every = 7;

    // referee: independent direct solve and reduced trajectories
    const TransientResult dns = run_transient(m, part, trace, cfg, sample_every);
    const EnsembleTrajectories traj = integrate_ensemble(ens, part, trace, 4);
    const std::vector<int> steps = {7, 14, 21, 28, 30};
    REQUIRE(dns.fields.size() == steps.size());

    SUBCASE("full-field mode") {
        const BenchReport rep =
            bench_speedup(m, part, ens, trace, 4, BenchMode::FullField, sample_every, cfg);
        CHECK(rep.n_modes == 4);
        CHECK(rep.n_steps == 30);
        CHECK(rep.n_outputs == 5);
        CHECK(rep.grid_dof == m.grid.cell_count());
        CHECK(rep.rom_dof == 4 * std::int64_t(part.size()));
        CHECK(rep.dns_seconds > 0.0);
        CHECK(rep.rom_seconds > 0.0);
        CHECK(rep.speedup == doctest::Approx(rep.dns_seconds / rep.rom_seconds));

        LseParts referee;
        for (std::size_t s = 0; s < steps.size(); ++s)
            referee.accumulate(m.grid, dns.fields[s].values, ensemble_field(ens, traj, steps[s]),
                               Region::all(), m.ambient());
        CHECK(rep.lse == doctest::Approx(referee.value()).epsilon(1e-12));
        CHECK(rep.lse < 0.2);  // near-full-rank run stays accurate
    }

    SUBCASE("device-layer mode") {
        const BenchReport rep =
            bench_speedup(m, part, ens, trace, 4, BenchMode::DeviceLayer, sample_every, cfg);
        const std::int64_t plane = std::int64_t(m.grid.nx) * m.grid.ny;
        Grid3D layer_grid = m.grid;
        layer_grid.nz = 1;
        LseParts referee;
        for (std::size_t s = 0; s < steps.size(); ++s)
            referee.accumulate(layer_grid,
                               dns.fields[s].values.segment(m.device_layer * plane, plane),
                               ensemble_layer(ens, traj, steps[s], m.device_layer),
                               Region::all(), m.ambient());
        CHECK(rep.lse == doctest::Approx(referee.value()).epsilon(1e-12));
    }

    SUBCASE("peak-only mode") {
        const BenchReport rep =
            bench_speedup(m, part, ens, trace, 4, BenchMode::PeakOnly, sample_every, cfg);
        double num = 0.0, den = 0.0;
        for (std::size_t s = 0; s < steps.size(); ++s) {
            const double got =
                ensemble_layer(ens, traj, steps[s], m.device_layer).maxCoeff();
            const double ref = dns.fields[s].values.maxCoeff();
            num += (got - ref) * (got - ref);
            den += (ref - m.ambient()) * (ref - m.ambient());
        }
        CHECK(rep.lse == doctest::Approx(std::sqrt(num / den)).epsilon(1e-9));
    }

    SUBCASE("invalid setups are rejected") {
        CHECK_THROWS_AS(
            bench_speedup(m, part, ens, trace, 4, BenchMode::FullField, 0, cfg),
            ValidationError);
        // a library trained for a different partition must be refused
        const HsbPartition grouped =
            make_partition(m, Grouping::grouped({{"left", "right"}, {"top"}}));
        const PowerTrace gtrace = bench_trace(grouped, 10, 2e-4);
        CHECK_THROWS_AS(
            bench_speedup(m, grouped, ens, gtrace, 2, BenchMode::FullField, 5, cfg),
            ValidationError);
        // more modes than any block holds
        CHECK_THROWS_AS(
            bench_speedup(m, part, ens, trace, 99, BenchMode::FullField, 5, cfg),
            ValidationError);
    }
}
