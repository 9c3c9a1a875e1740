// Acceptance suite: every release gate in one binary, one [PASS]/[FAIL] line
// per criterion. Criteria run at their stated tolerances on the shipped
// reference configurations (configs/) plus small in-code models where a
// criterion pins grid size or material stack explicitly. Expensive shared
// artifacts (reference solves, trained libraries) are built once and reused.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "thermrom/dns.hpp"
#include "thermrom/ensemble.hpp"
#include "thermrom/io.hpp"
#include "thermrom/local.hpp"
#include "thermrom/metrics.hpp"
#include "thermrom/operator.hpp"
#include "thermrom/pod.hpp"
#include "thermrom/power.hpp"
#include "thermrom/rom.hpp"
#include "thermrom/thermal_length.hpp"

using namespace thermrom;
namespace fs = std::filesystem;

namespace {

// ------------------------------------------------------------------ report

bool report(int idx, const char* name, bool ok, const std::string& details) {
    std::printf("[%s] %2d. %-28s %s\n", ok ? "PASS" : "FAIL", idx, name, details.c_str());
    std::fflush(stdout);
    return ok;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ------------------------------------------------- shared reference assets

fs::path config_dir() { return THERMROM_CONFIG_DIR; }

const ModelFile& quadcore() {
    static const ModelFile mf = read_model_file(config_dir() / "quadcore_analog.toml");
    return mf;
}

const ModelFile& manycore() {
    static const ModelFile mf = read_model_file(config_dir() / "manycore_analog.toml");
    return mf;
}

PowerTrace load_trace(const std::string& name) {
    return read_trace_csv(config_dir() / "traces" / name);
}

/// Reference transient: sampled fields plus the marching wall time.
struct DnsRun {
    std::vector<ThermalField> fields;
    std::vector<int> steps;
    double seconds = 0.0;
};

constexpr int kSampleEvery = 5;

std::vector<int> sampled_steps(int n_steps, int sample_every) {
    std::vector<int> steps;
    for (int k = 1; k <= n_steps; ++k)
        if (k % sample_every == 0 || k == n_steps) steps.push_back(k);
    return steps;
}

DnsRun dns_run(const ChipModel& model, const HsbPartition& part, const PowerTrace& trace) {
    DnsConfig cfg;
    cfg.time_step = trace.time_step;
    TransientResult r = run_transient(model, part, trace, cfg, kSampleEvery);
    return {std::move(r.fields), sampled_steps(trace.n_steps(), kSampleEvery), r.seconds};
}

/// Nine-block reference chip, all-blocks solve of test trace A.
const DnsRun& quad_dns_a() {
    static const DnsRun run = [] {
        const ModelFile& mf = quadcore();
        return dns_run(mf.model, make_partition(mf.model, mf.grouping),
                       load_trace("quadcore_test_a.csv"));
    }();
    return run;
}

TrainingConfig quad_training() {
    TrainingConfig cfg;
    cfg.n_steps = 400;
    cfg.hold_steps = 5;
    cfg.p_max = 10.0;
    cfg.seed = 0;
    cfg.time_step = 1e-3;  // spans several thermal time constants, like the traces
    cfg.max_modes = 30;
    cfg.jobs = 1;
    return cfg;
}

const Ensemble& quad_lib() {
    static const Ensemble ens = [] {
        const ModelFile& mf = quadcore();
        return train_ensemble(mf.model, make_partition(mf.model, mf.grouping), quad_training());
    }();
    return ens;
}

/// Many-core reference chip: all-blocks solve of its test trace.
const DnsRun& many_dns() {
    static const DnsRun run = [] {
        const ModelFile& mf = manycore();
        return dns_run(mf.model, make_partition(mf.model, mf.grouping),
                       load_trace("manycore_test.csv"));
    }();
    return run;
}

/// Truncated-domain library for the many-core chip, calibrated lengths.
const LocalEnsemble& many_lib() {
    static const LocalEnsemble ens = [] {
        const ModelFile& mf = manycore();
        const HsbPartition part = make_partition(mf.model, mf.grouping);
        const ThermalLengthTable table =
            calibrate_thermal_lengths(mf.model, {2.0e-3}, 1.0, 1.0);
        TrainingConfig cfg;  // defaults: 400 snapshots, dt 1e-4, 20 modes max
        cfg.jobs = 1;
        return train_local(mf.model, part, table, cfg, 5.0);
    }();
    return ens;
}

/// Numerical LSE of a reduced run against a reference run over a region.
double reduced_lse(const std::function<Eigen::VectorXd(int)>& field_at, const DnsRun& ref,
                   const Grid3D& grid, const Region& region, double ambient) {
    LseParts parts;
    for (std::size_t s = 0; s < ref.steps.size(); ++s)
        parts.accumulate(grid, ref.fields[s].values, field_at(ref.steps[s]), region, ambient);
    return parts.value();
}

double ensemble_lse(const Ensemble& ens, const HsbPartition& part, const PowerTrace& trace,
                    const DnsRun& ref, int n_modes, const Region& region) {
    const EnsembleTrajectories traj = integrate_ensemble(ens, part, trace, n_modes);
    return reduced_lse([&](int s) { return ensemble_field(ens, traj, s); }, ref, ens.grid,
                       region, ens.ambient);
}

double local_lse(const LocalEnsemble& ens, const HsbPartition& part, const PowerTrace& trace,
                 const DnsRun& ref, int n_modes, const Region& region) {
    const EnsembleTrajectories traj = integrate_local(ens, part, trace, n_modes);
    return reduced_lse([&](int s) { return local_field(ens, traj, s); }, ref, ens.grid, region,
                       ens.ambient);
}

// ---------------------------------------------------- in-code gate models

/// Uniform slab with adiabatic sides: exact 1D heat flow in z.
ChipModel slab_model(int nz, double thickness, double h, double k_cond) {
    ChipModel m;
    m.grid = {2, 2, nz, 1.0e-3, 1.0e-3, thickness / nz, {0.0, 0.0, 0.0}};
    m.layers = {{nz, 2330.0, 700.0, k_cond}};
    m.boundary.faces[int(Face::ZMin)] = {true, h, 300.0};
    m.device_layer = nz - 1;
    m.units = {{"slab", 0.0, 0.0, 2.0e-3, 2.0e-3, true}};
    m.validate();
    return m;
}

/// 30 x 30 mm nine-block chip on a 120 x 120 x 8 grid (115,200 cells) for
/// the wall-clock speedup gate.
ChipModel speedup_model() {
    ChipModel m;
    m.grid = {120, 120, 8, 2.5e-4, 2.5e-4, 9.0e-5, {0.0, 0.0, 0.0}};
    m.layers = {{8, 2330.0, 700.0, 130.0}};
    m.boundary.faces[int(Face::ZMin)] = {true, 1.0e4, 300.0};
    m.device_layer = 6;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            FunctionalUnit u;
            u.name = "b" + std::to_string(r) + std::to_string(c);
            u.x0 = c * 1.0e-2;
            u.y0 = r * 1.0e-2;
            u.width = 1.0e-2;
            u.height = 1.0e-2;
            m.units.push_back(u);
        }
    m.validate();
    return m;
}

/// Silicon stack at 720 um over a strong bottom-side sink, 37.5 mm wide,
/// for the thermal-length calibration gate.
ChipModel calibration_stack() {
    ChipModel m;
    m.grid = {150, 150, 6, 2.5e-4, 2.5e-4, 1.2e-4, {0.0, 0.0, 0.0}};
    m.layers = {{6, 2330.0, 700.0, 130.0}};
    m.boundary.faces[int(Face::ZMin)] = {true, 2.0e5, 300.0};
    m.device_layer = 4;
    m.units = {{"probe", 0.0, 0.0, 1.0e-3, 1.0e-3, true}};
    m.validate();
    return m;
}

} // namespace

// ===========================================================================

TEST_CASE("superposition of single-block responses") {
    const auto t0 = std::chrono::steady_clock::now();
    const ModelFile& mf = quadcore();
    const HsbPartition part = make_partition(mf.model, mf.grouping);
    const PowerTrace trace = load_trace("quadcore_test_a.csv");
    const double ambient = mf.model.ambient();

    const DnsRun& all = quad_dns_a();
    std::vector<Eigen::VectorXd> sum(all.fields.size());
    for (auto& v : sum) v = Eigen::VectorXd::Zero(mf.model.grid.cell_count());

    for (int c = 0; c < int(part.size()); ++c) {
        PowerTrace single = trace;
        single.powers = Eigen::MatrixXd::Zero(trace.powers.rows(), trace.powers.cols());
        single.powers.col(c) = trace.powers.col(c);
        const DnsRun run = dns_run(mf.model, part, single);
        for (std::size_t s = 0; s < sum.size(); ++s)
            sum[s] += run.fields[s].values.array().matrix() -
                      Eigen::VectorXd::Constant(run.fields[s].values.size(), ambient);
    }

    double err2 = 0.0, ref2 = 0.0;
    for (std::size_t s = 0; s < sum.size(); ++s) {
        const Eigen::VectorXd ref =
            all.fields[s].values - Eigen::VectorXd::Constant(sum[s].size(), ambient);
        err2 += (sum[s] - ref).squaredNorm();
        ref2 += ref.squaredNorm();
    }
    const double rel = std::sqrt(err2 / ref2);
    const double wall = seconds_since(t0);

    const bool ok = rel <= 1e-6 && wall <= 300.0;
    CHECK(report(1, "superposition", ok,
                 "rel_l2=" + num(rel) + " (limit 1e-06), wall=" + num(wall) +
                     " s (limit 300 s)"));
}

TEST_CASE("full-rank reduced model reproduces its training data") {
    const ModelFile& mf = quadcore();
    const HsbPartition part = make_partition(mf.model, mf.grouping);
    const double dt = 1e-3;

    ExcitationConfig ex;
    ex.n_steps = 80;
    ex.hold_steps = 5;
    ex.p_max = 10.0;
    ex.seed = 7;
    const PowerTrace exc = random_excitation(part, 0, dt, ex);

    DnsConfig dcfg;
    dcfg.time_step = dt;
    const SnapshotSet snaps = collect_snapshots(mf.model, part, exc, dcfg, 1);
    const PodBasis basis = solve_modes(snaps, snaps.count());  // keep the full rank
    const ThermalOperator op = assemble_operator(mf.model);
    const RomSystem rom = assemble_rom(basis, mf.model, op, part.blocks[0].cells);

    const int col = exc.column_map(part)[0];
    const Eigen::MatrixXd a = integrate_odes(rom, exc.powers.col(col), dt);

    double err2 = 0.0, ref2 = 0.0;
    for (int j = 0; j < snaps.count(); ++j) {  // column j holds step j+1
        const Eigen::VectorXd recon = basis.modes * a.row(j + 1).transpose();
        err2 += (recon - snaps.columns.col(j)).squaredNorm();
        ref2 += snaps.columns.col(j).squaredNorm();
    }
    const double rel = std::sqrt(err2 / ref2);

    const bool ok = rel <= 1e-5;
    CHECK(report(2, "full-rank completeness", ok,
                 "rank=" + std::to_string(basis.mode_count()) + "/" +
                     std::to_string(snaps.count()) + " snapshots, rel=" + num(rel) +
                     " (limit 1e-05)"));
}

TEST_CASE("a-priori error estimate tracks the measured error") {
    const ModelFile& mf = quadcore();
    const HsbPartition part = make_partition(mf.model, mf.grouping);
    const PowerTrace trace = load_trace("quadcore_test_a.csv");
    const Ensemble& lib = quad_lib();
    const DnsRun& ref = quad_dns_a();

    const Eigen::VectorXd equiv = lib.equivalent_spectrum(part);
    const int n_snapshots = lib.blocks.front().basis.n_snapshots;

    int floor_m = 0;  // precision floor: last mode count still above 1e-6 a-priori
    for (int m = 1; m <= lib.min_mode_count(); ++m)
        if (lse_theoretical(equiv, m, n_snapshots) >= 1e-6) floor_m = m;
    REQUIRE(floor_m >= 2);

    std::vector<double> theo, meas;
    for (int m = 2; m <= floor_m; ++m) {
        theo.push_back(lse_theoretical(equiv, m, n_snapshots));
        meas.push_back(ensemble_lse(lib, part, trace, ref, m, Region::all()));
    }

    bool in_band = true, monotone = true;
    double worst_ratio = 1.0;
    for (std::size_t i = 0; i < theo.size(); ++i) {
        const double ratio = meas[i] / theo[i];
        if (std::abs(std::log(ratio)) > std::abs(std::log(worst_ratio))) worst_ratio = ratio;
        if (ratio < 0.5 || ratio > 2.0) in_band = false;
        if (i > 0 && (meas[i] > meas[i - 1] * 1.05 || theo[i] > theo[i - 1] * 1.05))
            monotone = false;
        std::printf("       M=%-2zu  estimate=%-10.3g measured=%-10.3g ratio=%.2f\n", i + 2,
                    theo[i], meas[i], ratio);
    }

    const bool ok = in_band && monotone;
    CHECK(report(3, "error-estimate tracking", ok,
                 "M=2.." + std::to_string(floor_m) + ", worst ratio=" + num(worst_ratio) +
                     " (band [0.5,2]), monotone=" + (monotone ? "yes" : "NO")));
}

TEST_CASE("accuracy is stable across workloads") {
    const ModelFile& mf = quadcore();
    const HsbPartition part = make_partition(mf.model, mf.grouping);
    const Ensemble& lib = quad_lib();
    const int m = 4;

    const double lse_a = ensemble_lse(lib, part, load_trace("quadcore_test_a.csv"), quad_dns_a(),
                                      m, Region::all());
    double lo = lse_a, hi = lse_a;
    for (const char* name : {"quadcore_test_b.csv", "quadcore_test_c.csv"}) {
        const PowerTrace trace = load_trace(name);
        const DnsRun ref = dns_run(mf.model, part, trace);
        const double v = ensemble_lse(lib, part, trace, ref, m, Region::all());
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double spread = hi - lo;

    const bool ok = spread <= 0.002;
    CHECK(report(4, "workload robustness", ok,
                 "lse@M=4 in [" + num(lo) + ", " + num(hi) + "], spread=" + num(spread) +
                     " (limit 0.002)"));
}

TEST_CASE("truncated domains stay within the error budget") {
    const ModelFile& mf = manycore();
    const HsbPartition part = make_partition(mf.model, mf.grouping);
    const PowerTrace trace = load_trace("manycore_test.csv");
    const LocalEnsemble& lib = many_lib();
    const DnsRun& ref = many_dns();
    const int m = 4;

    const double entire = local_lse(lib, part, trace, ref, m, Region::all());
    const double device =
        local_lse(lib, part, trace, ref, m, Region::device_layer(mf.model.device_layer));
    const int n_snapshots = lib.class_roms.front().basis.n_snapshots;
    const double theo = lse_theoretical(lib.equivalent_spectrum(part), m, n_snapshots);

    const bool ok = entire <= 0.05 && entire >= theo && device <= entire;
    CHECK(report(5, "truncation degradation", ok,
                 "entire=" + num(entire) + " (limit 0.05, a-priori " + num(theo) +
                     "), device=" + num(device) + " (must be <= entire)"));
}

TEST_CASE("peak temperature is trustworthy at few modes") {
    const ModelFile& mf = manycore();
    const HsbPartition part = make_partition(mf.model, mf.grouping);
    const PowerTrace trace = load_trace("manycore_test.csv");
    const LocalEnsemble& lib = many_lib();
    const DnsRun& ref = many_dns();
    const double ambient = mf.model.ambient();

    const EnsembleTrajectories traj = integrate_local(lib, part, trace, 3);
    const std::vector<MaxTempSample> dns_peak = max_temp_series(ref.fields);

    double err = 0.0, rise = 0.0;
    for (std::size_t s = 0; s < ref.steps.size(); ++s) {
        const double rom_peak = local_field(lib, traj, ref.steps[s]).maxCoeff();
        err = std::max(err, std::abs(rom_peak - dns_peak[s].value));
        rise = std::max(rise, dns_peak[s].value - ambient);
    }

    const bool ok = err <= 0.05 * rise;
    CHECK(report(6, "peak-temperature fidelity", ok,
                 "max err=" + num(err) + " K over rise=" + num(rise) + " K (limit " +
                     num(0.05 * rise) + " K)"));
}

TEST_CASE("class-shared models match member-trained ones") {
    const ChipModel model = testing::mini_many(4, 10, 4);  // homogeneous 3x3 array
    const HsbPartition part = make_partition(model);

    ThermalLengthTable table;  // fixed length: every member is an exact translate
    table.entries = {{4 * model.grid.dx, 1.0, model.grid.nz * model.grid.dz,
                      2.0 * model.grid.dx}};

    TrainingConfig cfg;
    cfg.n_steps = 200;
    cfg.hold_steps = 5;
    cfg.p_max = 8.0;
    cfg.seed = 11;
    cfg.time_step = 2e-4;
    cfg.max_modes = 12;
    cfg.jobs = 1;

    const LocalEnsemble lib = train_local(model, part, table, cfg, 5.0);
    REQUIRE(lib.classes.size() == 1);  // one shape, nine translated members

    const std::size_t member = 7;  // an off-canonical member ("b21")
    const int canon = part.index_of(lib.classes[0].canonical.hsb_id);
    REQUIRE(canon >= 0);
    const TruncatedDomain dom = truncate_domain(model, part, member, table, 5.0);
    const BlockRom own = train_truncated(model, part, member, dom, cfg, cfg.seed + canon);

    ExcitationConfig ex;
    ex.n_steps = 60;
    ex.hold_steps = 4;
    ex.p_max = 6.0;
    ex.seed = 123;
    const PowerTrace trace = random_power_map(part, 5e-4, ex);
    const int m = std::min(lib.class_roms[0].basis.mode_count(), own.basis.mode_count());

    const EnsembleTrajectories shared = integrate_local(lib, part, trace, m);
    const Eigen::MatrixXd mine =
        integrate_odes(own.rom, trace.powers.col(trace.column_map(part)[member]),
                       trace.time_step, m);
    const double rel = (shared.coeffs[member] - mine).norm() / mine.norm();

    const bool ok = rel <= 1e-6;
    CHECK(report(7, "generic-block equivalence", ok,
                 "trajectory rel err=" + num(rel) + " (limit 1e-06) at M=" + std::to_string(m)));
}

TEST_CASE("reduced runs clear the speedup floors") {
    const ChipModel model = speedup_model();
    const HsbPartition part = make_partition(model);

    TrainingConfig tcfg;
    tcfg.n_steps = 60;
    tcfg.hold_steps = 5;
    tcfg.p_max = 10.0;
    tcfg.seed = 0;
    tcfg.time_step = 1e-3;
    tcfg.max_modes = 8;
    tcfg.jobs = 1;
    const Ensemble ens = train_ensemble(model, part, tcfg);

    ExcitationConfig ex;
    ex.n_steps = 200;
    ex.hold_steps = 5;
    ex.p_max = 10.0;
    ex.seed = 42;
    const PowerTrace trace = random_power_map(part, 1e-3, ex);

    DnsConfig dcfg;
    dcfg.time_step = trace.time_step;
    const BenchReport full =
        bench_speedup(model, part, ens, trace, 3, BenchMode::FullField, 20, dcfg);
    const BenchReport peak =
        bench_speedup(model, part, ens, trace, 3, BenchMode::PeakOnly, 20, dcfg);

    const bool ok = full.grid_dof >= 100000 && full.speedup >= 100.0 && peak.speedup >= 1000.0;
    CHECK(report(8, "speedup floors", ok,
                 std::to_string(full.grid_dof) + " cells: full-field " + num(full.speedup) +
                     "x (floor 100x), peak-only " + num(peak.speedup) + "x (floor 1000x)"));
}

TEST_CASE("direct solver verification suite") {
    // analytic 1D slab: conduction drop q*L/k, sink-side rise q/h
    const double L = 7.2e-4, h = 1.0e4, k = 130.0, q = 1.0e5;
    const ChipModel slab = slab_model(128, L, h, k);
    const HsbPartition spart = make_partition(slab);
    Eigen::VectorXd p(1);
    p << q * 4.0e-6;  // flux times chip area
    const ThermalField sf = steady_state(slab, spart, p);
    const double drop = sf.values[slab.grid.flat(0, 0, slab.grid.nz - 1)] -
                        sf.values[slab.grid.flat(0, 0, 0)];
    const double rise = sf.values[slab.grid.flat(0, 0, 0)] - 300.0;
    const double drop_err = std::abs(drop - q * L / k) / (q * L / k);
    const double rise_err = std::abs(rise - q / h) / (q / h);

    // steady-state global energy balance
    const ChipModel tiny = testing::tiny_model();
    const HsbPartition tpart = make_partition(tiny);
    Eigen::VectorXd tp(3);
    tp << 1.3, 0.7, 2.1;
    const ThermalField tf = steady_state(tiny, tpart, tp);
    const ThermalOperator top = assemble_operator(tiny);
    const double balance =
        std::abs(top.robin_conductance.dot(tf.values) - top.boundary_source.sum() - tp.sum()) /
        tp.sum();

    // first-order convergence of the implicit stepper
    Eigen::VectorXd cp(3);
    cp << 2.0, 0.0, 1.0;
    const Eigen::VectorXd cq = cell_power(tiny, tpart, cp);
    const double t_end = 0.02;
    const auto solve_at = [&](double dt) {
        DnsConfig cfg;
        cfg.time_step = dt;
        cfg.linear_tolerance = 1e-12;
        TransientSolver solver(tiny, top, cfg);
        ThermalField f = solver.initial_field();
        const int n = int(std::lround(t_end / dt));
        for (int s = 0; s < n; ++s) solver.step(f, cq);
        return f.values;
    };
    const Eigen::VectorXd fine = solve_at(t_end / 160.0);
    const double ratio =
        (solve_at(t_end / 5.0) - fine).norm() / (solve_at(t_end / 10.0) - fine).norm();

    const bool ok = drop_err <= 0.01 && rise_err <= 0.01 && balance <= 1e-8 &&
                    ratio >= 1.4 && ratio <= 2.6;
    CHECK(report(9, "direct solver verification", ok,
                 "slab drop err=" + num(drop_err) + ", rise err=" + num(rise_err) +
                     " (limit 0.01), energy=" + num(balance) +
                     " (limit 1e-08), step-halving ratio=" + num(ratio) + " (2.0+-0.6)"));
}

TEST_CASE("thermal-length calibration is sane and repeatable") {
    const ChipModel stack = calibration_stack();
    const std::vector<double> widths = {1.0e-3, 5.0e-3, 1.0e-2, 1.9e-2};

    const ThermalLengthTable first = calibrate_thermal_lengths(stack, widths, 1.0, 1.0);
    const ThermalLengthTable second = calibrate_thermal_lengths(stack, widths, 1.0, 1.0);
    REQUIRE(first.entries.size() == widths.size());
    REQUIRE(second.entries.size() == widths.size());

    bool in_band = true, repeatable = true;
    double lo = first.entries.front().lambda_th, hi = lo;
    for (std::size_t i = 0; i < widths.size(); ++i) {
        const double l1 = first.entries[i].lambda_th, l2 = second.entries[i].lambda_th;
        lo = std::min(lo, l1);
        hi = std::max(hi, l1);
        if (l1 < 0.3e-3 || l1 > 3.0e-3) in_band = false;
        if (std::abs(l1 - l2) > stack.grid.dx) repeatable = false;
    }

    const bool ok = in_band && repeatable;
    CHECK(report(10, "thermal-length sanity", ok,
                 "lambda in [" + num(lo * 1e3) + ", " + num(hi * 1e3) +
                     "] mm (band [0.3, 3] mm), repeatable to one cell: " +
                     (repeatable ? "yes" : "NO")));
}
