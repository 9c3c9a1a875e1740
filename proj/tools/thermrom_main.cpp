// Command-line front end: dns / train / simulate / compare / bench.
// Exit codes: 0 success, 1 usage, 2 invalid input, 3 numerical failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "thermrom/error.hpp"
#include "thermrom/io.hpp"
#include "thermrom/metrics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace thermrom;

namespace {

int default_jobs() {
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : int(n);
}

std::string step_name(int step) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "step_%06d", step);
    return buf;
}

std::vector<int> sample_steps(int n_steps, int sample_every) {
    std::vector<int> steps;
    for (int k = 1; k <= n_steps; ++k)
        if (k % sample_every == 0 || k == n_steps) steps.push_back(k);
    return steps;
}

std::string sanitize(const std::string& id) {
    std::string out;
    for (char c : id) out += (std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    return out;
}

json read_run(const fs::path& dir) {
    std::ifstream is(dir / "run.json");
    if (!is) throw ValidationError("no run.json in " + dir.string() + " (not a run directory?)");
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw ValidationError("unreadable run.json in " + dir.string() + ": " + e.what());
    }
    return j;
}

void write_run(const fs::path& dir, const json& j) {
    std::ofstream os(dir / "run.json");
    if (!os) throw ValidationError("cannot write run.json in " + dir.string());
    os << j.dump(2) << '\n';
}

// --------------------------------------------------------------------- dns

struct DnsArgs {
    std::string model, trace, out;
    double dt = 0.0;  // 0 = take the trace's
    int sample_every = 1;
    double tol = 1e-9;
};

void run_dns(const DnsArgs& a) {
    const ModelFile mf = read_model_file(a.model);
    const HsbPartition part = make_partition(mf.model, mf.grouping);
    const PowerTrace trace = read_trace_csv(a.trace);

    DnsConfig cfg;
    cfg.time_step = a.dt > 0.0 ? a.dt : trace.time_step;
    cfg.linear_tolerance = a.tol;

    std::cout << "dns configuration\n"
              << "  model:        " << a.model << '\n'
              << "  trace:        " << a.trace << " (" << trace.n_steps() << " steps)\n"
              << "  grid:         " << mf.model.grid.nx << "x" << mf.model.grid.ny << "x"
              << mf.model.grid.nz << " (" << mf.model.grid.cell_count() << " cells)\n"
              << "  blocks:       " << part.size() << '\n'
              << "  dt:           " << cfg.time_step << '\n'
              << "  sample_every: " << a.sample_every << '\n'
              << "  tol:          " << cfg.linear_tolerance << '\n';

    const TransientResult result = run_transient(mf.model, part, trace, cfg, a.sample_every);
    const std::vector<int> steps = sample_steps(trace.n_steps(), a.sample_every);

    fs::create_directories(a.out);
    for (std::size_t s = 0; s < steps.size(); ++s)
        write_field(fs::path(a.out) / step_name(steps[s]), result.fields[s]);

    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx", (unsigned long long)part.hash());
    write_run(a.out, json{{"kind", "dns"},
                          {"model", a.model},
                          {"trace", a.trace},
                          {"time_step", cfg.time_step},
                          {"sample_every", a.sample_every},
                          {"tol", cfg.linear_tolerance},
                          {"n_steps", trace.n_steps()},
                          {"steps", steps},
                          {"device_layer", mf.model.device_layer},
                          {"partition_hash", hash},
                          {"seconds", result.seconds},
                          {"cg_iterations", result.cg_iterations}});

    std::cout << "marched " << result.steps << " steps in " << result.seconds << " s ("
              << result.cg_iterations << " CG iterations), wrote " << steps.size()
              << " fields to " << a.out << '\n';
}

// ------------------------------------------------------------------- train

struct TrainArgs {
    std::string model, out;
    bool local = false;
    int modes_max = 20;
    std::uint64_t seed = 0;
    int snapshots = 400;
    int hold = 5;
    double p_max = 10.0;
    double dt = 1e-4;
    int sample_every = 1;
    double tol = 1e-9;
    int jobs = default_jobs();
    double multiple = 5.0;
    double decay_threshold = 0.05;
};

TrainingConfig training_config(const TrainArgs& a) {
    TrainingConfig cfg;
    cfg.n_steps = a.snapshots;
    cfg.hold_steps = a.hold;
    cfg.p_max = a.p_max;
    cfg.seed = a.seed;
    cfg.time_step = a.dt;
    cfg.sample_every = a.sample_every;
    cfg.max_modes = a.modes_max;
    cfg.linear_tolerance = a.tol;
    cfg.jobs = a.jobs;
    return cfg;
}

/// Distinct block widths (larger footprint side) drive the calibration sweep.
std::vector<double> block_widths(const ChipModel& model, const HsbPartition& part) {
    std::set<long> cells_wide;
    std::vector<double> widths;
    for (const HeatSourceBlock& b : part.blocks) {
        int imin = model.grid.nx, imax = -1, jmin = model.grid.ny, jmax = -1;
        for (std::int64_t c : b.cells) {
            const auto [i, j, k] = model.grid.unflat(c);
            imin = std::min(imin, i);
            imax = std::max(imax, i);
            jmin = std::min(jmin, j);
            jmax = std::max(jmax, j);
        }
        const double w = std::max((imax - imin + 1) * model.grid.dx,
                                  (jmax - jmin + 1) * model.grid.dy);
        const long key = std::lround(w * 1e9);  // dedupe at nanometer resolution
        if (cells_wide.insert(key).second) widths.push_back(w);
    }
    std::sort(widths.begin(), widths.end());
    return widths;
}

void run_train(const TrainArgs& a) {
    const ModelFile mf = read_model_file(a.model);
    const HsbPartition part = make_partition(mf.model, mf.grouping);
    const TrainingConfig cfg = training_config(a);

    std::cout << "training configuration\n"
              << "  model:        " << a.model << '\n'
              << "  out:          " << a.out << '\n'
              << "  mode:         " << (a.local ? "local (truncated domains)" : "ensemble") << '\n'
              << "  blocks:       " << part.size() << '\n'
              << "  snapshots:    " << cfg.n_steps << " (hold " << cfg.hold_steps << ", p_max "
              << cfg.p_max << " W, dt " << cfg.time_step << ", sample_every "
              << cfg.sample_every << ")\n"
              << "  modes_max:    " << cfg.max_modes << '\n'
              << "  seed:         " << cfg.seed << '\n'
              << "  tol:          " << cfg.linear_tolerance << '\n'
              << "  jobs:         " << cfg.jobs << '\n';

    if (!a.local) {
        const Ensemble ens = ensure_ensemble_library(a.out, mf.model, part, cfg);
        std::cout << "trained " << ens.blocks.size() << " block libraries:\n";
        for (const BlockRom& b : ens.blocks)
            std::cout << "  " << b.basis.hsb_id << ": " << b.basis.mode_count() << " modes, "
                      << b.basis.n_snapshots << " snapshots, lambda_1 = "
                      << (b.basis.eigenvalues.size() ? b.basis.eigenvalues[0] : 0.0) << '\n';
        return;
    }

    std::cout << "  truncation:   " << a.multiple << " thermal lengths, decay threshold "
              << a.decay_threshold << '\n';
    const std::vector<double> widths = block_widths(mf.model, part);
    const ThermalLengthTable table =
        calibrate_thermal_lengths(mf.model, widths, 1.0, 1.0, a.decay_threshold);
    std::cout << "thermal lengths:\n";
    for (const ThermalLengthEntry& e : table.entries)
        std::cout << "  width " << e.block_width * 1e3 << " mm -> lambda_th "
                  << e.lambda_th * 1e3 << " mm\n";
    write_length_table(fs::path(a.out) / "thermal_lengths.csv", table);

    const LocalEnsemble ens = ensure_local_library(a.out, mf.model, part, table, cfg, a.multiple);
    std::cout << "generic building blocks: " << ens.classes.size() << " classes cover "
              << part.size() << " blocks\n";
    for (std::size_t c = 0; c < ens.classes.size(); ++c) {
        const GenericBlockClass& cls = ens.classes[c];
        std::cout << "  " << cls.class_id << ": box " << cls.canonical.box.nx << "x"
                  << cls.canonical.box.ny << ", " << cls.members.size() << " member(s), "
                  << ens.class_roms[c].basis.mode_count() << " modes\n";
    }
}

// ---------------------------------------------------------------- simulate

struct SimArgs {
    std::string library, model, trace, out;
    int modes = 0;
    std::string output = "field";
    int sample_every = 1;
    bool local = false;
    bool coeffs = false;
};

void write_coeff_csvs(const fs::path& dir, const HsbPartition& part,
                      const EnsembleTrajectories& traj) {
    for (std::size_t n = 0; n < part.size(); ++n) {
        std::ofstream os(dir / ("coeffs_" + sanitize(part.blocks[n].id) + ".csv"));
        os << 't';
        for (int m = 1; m <= traj.n_modes; ++m) os << ",a" << m;
        os << '\n';
        char buf[64];
        for (Eigen::Index k = 0; k < traj.coeffs[n].rows(); ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", double(k) * traj.time_step);
            os << buf;
            for (int m = 0; m < traj.n_modes; ++m) {
                std::snprintf(buf, sizeof buf, "%.17g", traj.coeffs[n](k, m));
                os << ',' << buf;
            }
            os << '\n';
        }
    }
}

void run_simulate(const SimArgs& a) {
    const ModelFile mf = read_model_file(a.model);
    const HsbPartition part = make_partition(mf.model, mf.grouping);
    const PowerTrace trace = read_trace_csv(a.trace);
    const std::string kind = library_kind(a.library);
    if (a.local && kind != "local")
        throw ValidationError("--local given but " + a.library + " holds an ensemble library");

    std::cout << "simulate configuration\n"
              << "  library:      " << a.library << " (" << kind << ")\n"
              << "  model:        " << a.model << '\n'
              << "  trace:        " << a.trace << " (" << trace.n_steps() << " steps)\n"
              << "  modes:        " << a.modes << '\n'
              << "  output:       " << a.output << '\n'
              << "  sample_every: " << a.sample_every << '\n';

    fs::create_directories(a.out);
    const std::vector<int> steps = sample_steps(trace.n_steps(), a.sample_every);
    const Grid3D& grid = mf.model.grid;
    const double dt = trace.time_step;
    double seconds = 0.0;

    EnsembleTrajectories traj;
    std::function<Eigen::VectorXd(int)> field_at, layer_at;
    if (kind == "ensemble") {
        static Ensemble ens;  // keep alive for the lambdas below
        ens = load_ensemble_library(a.library, part);
        traj = integrate_ensemble(ens, part, trace, a.modes);
        field_at = [&, e = &ens](int s) { return ensemble_field(*e, traj, s); };
        layer_at = [&, e = &ens](int s) {
            return ensemble_layer(*e, traj, s, mf.model.device_layer);
        };
    } else {
        static LocalEnsemble lens;
        lens = load_local_library(a.library, part);
        traj = integrate_local(lens, part, trace, a.modes);
        field_at = [&, e = &lens](int s) { return local_field(*e, traj, s); };
        layer_at = [&, e = &lens](int s) { return local_layer(*e, traj, s, mf.model.device_layer); };
    }
    seconds += traj.seconds;

    const auto t0 = std::chrono::steady_clock::now();
    if (a.output == "field") {
        for (int s : steps) {
            ThermalField f{grid, field_at(s), s * dt};
            write_field(fs::path(a.out) / step_name(s), f);
        }
    } else if (a.output == "device") {
        Grid3D layer_grid = grid;
        layer_grid.nz = 1;
        for (int s : steps) {
            ThermalField f{layer_grid, layer_at(s), s * dt};
            write_field(fs::path(a.out) / step_name(s), f);
        }
    } else {  // peak: one row per trace step
        std::ofstream os(fs::path(a.out) / "peak.csv");
        os << "t,t_max,i,j,k\n";
        char buf[64];
        for (int s = 1; s <= trace.n_steps(); ++s) {
            const Eigen::VectorXd layer = layer_at(s);
            Eigen::Index idx = 0;
            const double v = layer.maxCoeff(&idx);
            const auto [i, j, k2] =
                grid.unflat(std::int64_t(mf.model.device_layer) * grid.nx * grid.ny + idx);
            std::snprintf(buf, sizeof buf, "%.17g,%.17g", s * dt, v);
            os << buf << ',' << i << ',' << j << ',' << k2 << '\n';
        }
    }
    seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (a.coeffs) write_coeff_csvs(a.out, part, traj);

    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx", (unsigned long long)part.hash());
    write_run(a.out, json{{"kind", std::string("rom-") + a.output},
                          {"library", a.library},
                          {"model", a.model},
                          {"trace", a.trace},
                          {"time_step", dt},
                          {"sample_every", a.sample_every},
                          {"n_modes", a.modes},
                          {"n_steps", trace.n_steps()},
                          {"steps", steps},
                          {"device_layer", mf.model.device_layer},
                          {"partition_hash", hash},
                          {"seconds", seconds}});
    std::cout << "reduced run (" << part.size() << " blocks x " << a.modes << " modes) took "
              << seconds << " s, outputs in " << a.out << '\n';
}

// ----------------------------------------------------------------- compare

struct CompareArgs {
    std::string dns, rom, out;
    int modes_max = 0;  // 0 = library maximum
};

void run_compare(const CompareArgs& a) {
    const json dns_run = read_run(a.dns);
    const json rom_run = read_run(a.rom);
    if (dns_run.value("kind", "") != "dns")
        throw ValidationError(a.dns + " is not a dns run directory");
    const std::string rom_kind = rom_run.value("kind", "");
    if (rom_kind != "rom-field" && rom_kind != "rom-device")
        throw ValidationError(a.rom + " must be a rom field or device run (got '" + rom_kind +
                              "'); peak runs carry too little data to compare fields");
    if (dns_run.value("partition_hash", "") != rom_run.value("partition_hash", ""))
        throw ValidationError("runs use different partitions; regenerate one of them");

    const std::vector<int> dns_steps = dns_run.at("steps").get<std::vector<int>>();
    const std::vector<int> rom_steps = rom_run.at("steps").get<std::vector<int>>();
    std::vector<int> steps;
    std::set_intersection(dns_steps.begin(), dns_steps.end(), rom_steps.begin(), rom_steps.end(),
                          std::back_inserter(steps));
    if (steps.empty()) throw ValidationError("runs share no sampled steps");
    const int device_layer = rom_run.at("device_layer").get<int>();

    std::cout << "compare configuration\n"
              << "  dns run:      " << a.dns << '\n'
              << "  rom run:      " << a.rom << " (" << rom_kind << ")\n"
              << "  common steps: " << steps.size() << '\n';

    std::vector<ThermalField> ref, pred;
    for (int s : steps) {
        ref.push_back(read_field(fs::path(a.dns) / step_name(s)));
        pred.push_back(read_field(fs::path(a.rom) / step_name(s)));
    }
    const double t_ambient = [&] {
        // ambient is the library's reference temperature
        const json manifest = [&] {
            std::ifstream is(fs::path(rom_run.at("library").get<std::string>()) / "manifest.json");
            json j;
            if (is) is >> j;
            return j;
        }();
        if (!manifest.contains("ambient"))
            throw ValidationError("cannot read ambient from the library manifest");
        return manifest.at("ambient").get<double>();
    }();

    fs::create_directories(a.out);

    // error norms
    std::vector<std::pair<std::string, double>> lse_rows;
    if (rom_kind == "rom-field") {
        lse_rows.emplace_back("all", lse_numerical(ref, pred, Region::all(), t_ambient));
        lse_rows.emplace_back("device_layer",
                              lse_numerical(ref, pred, Region::device_layer(device_layer),
                                            t_ambient));
    } else {
        // layer dumps: cut the DNS fields down to the same plane
        std::vector<ThermalField> ref_layer;
        const Grid3D g = ref.front().grid;
        const std::int64_t plane = std::int64_t(g.nx) * g.ny;
        for (const ThermalField& f : ref) {
            ThermalField lf;
            lf.grid = g;
            lf.grid.nz = 1;
            lf.timestamp = f.timestamp;
            lf.values = f.values.segment(device_layer * plane, plane);
            ref_layer.push_back(std::move(lf));
        }
        lse_rows.emplace_back("device_layer",
                              lse_numerical(ref_layer, pred, Region::all(), t_ambient));
    }
    {
        std::ofstream os(fs::path(a.out) / "lse.csv");
        os << "region,lse\n";
        char buf[64];
        for (const auto& [region, v] : lse_rows) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            os << region << ',' << buf << '\n';
            std::cout << "  lse[" << region << "] = " << v * 100 << " %\n";
        }
    }

    // hotspot series
    {
        const std::vector<MaxTempSample> mref = max_temp_series(ref);
        const std::vector<MaxTempSample> mpred = max_temp_series(pred);
        std::ofstream os(fs::path(a.out) / "max_temp.csv");
        os << "t,dns_max,rom_max,error\n";
        double worst = 0.0;
        char buf[160];
        for (std::size_t s = 0; s < mref.size(); ++s) {
            const double err = mpred[s].value - mref[s].value;
            worst = std::max(worst, std::abs(err));
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g", mref[s].t, mref[s].value,
                          mpred[s].value, err);
            os << buf << '\n';
        }
        std::cout << "  max hotspot error = " << worst << " K over " << mref.size() << " steps\n";
    }

    // a-priori curve from the library spectra
    {
        const LibrarySpectrum spec = library_spectrum(rom_run.at("library").get<std::string>());
        const int top = a.modes_max > 0 ? std::min(a.modes_max, spec.min_modes) : spec.min_modes;
        std::ofstream os(fs::path(a.out) / "lse_theo.csv");
        os << "modes,lse_theo\n";
        char buf[64];
        for (int m = 1; m <= top && m < spec.n_snapshots; ++m) {
            const double v = lse_theoretical(spec.equivalent, m, spec.n_snapshots);
            std::snprintf(buf, sizeof buf, "%.17g", v);
            os << m << ',' << buf << '\n';
        }
    }
    std::cout << "wrote lse.csv, max_temp.csv, lse_theo.csv to " << a.out << '\n';
}

// ------------------------------------------------------------------- bench

struct BenchArgs {
    std::string model, library, trace, out;
    int modes = 3;
    std::string mode = "all";
    int sample_every = 20;
    double tol = 1e-9;
};

void run_bench(const BenchArgs& a) {
    const ModelFile mf = read_model_file(a.model);
    const HsbPartition part = make_partition(mf.model, mf.grouping);
    const PowerTrace trace = read_trace_csv(a.trace);
    if (library_kind(a.library) != "ensemble")
        throw ValidationError("bench expects an ensemble library");
    const Ensemble ens = load_ensemble_library(a.library, part);

    DnsConfig cfg;
    cfg.time_step = trace.time_step;
    cfg.linear_tolerance = a.tol;

    std::cout << "bench configuration\n"
              << "  model:        " << a.model << " (" << mf.model.grid.cell_count()
              << " cells)\n"
              << "  library:      " << a.library << '\n'
              << "  trace:        " << a.trace << " (" << trace.n_steps() << " steps)\n"
              << "  modes:        " << a.modes << '\n'
              << "  sample_every: " << a.sample_every << '\n'
              << "  tol:          " << cfg.linear_tolerance << '\n';

    std::vector<BenchMode> modes;
    if (a.mode == "all")
        modes = {BenchMode::FullField, BenchMode::DeviceLayer, BenchMode::PeakOnly};
    else if (a.mode == "full")
        modes = {BenchMode::FullField};
    else if (a.mode == "device")
        modes = {BenchMode::DeviceLayer};
    else
        modes = {BenchMode::PeakOnly};

    std::vector<BenchReport> reports;
    for (BenchMode m : modes)
        reports.push_back(bench_speedup(mf.model, part, ens, trace, a.modes, m, a.sample_every,
                                        cfg));

    std::printf("%-14s %10s %12s %12s %10s %10s\n", "mode", "outputs", "dns [s]", "rom [s]",
                "speedup", "lse");
    for (const BenchReport& r : reports)
        std::printf("%-14s %10d %12.4f %12.6f %10.1f %10.3e\n", bench_mode_name(r.mode),
                    r.n_outputs, r.dns_seconds, r.rom_seconds, r.speedup, r.lse);
    const BenchReport& r0 = reports.front();
    std::printf("degrees of freedom: %lld (grid) vs %lld (reduced), ratio %.1f\n",
                (long long)r0.grid_dof, (long long)r0.rom_dof,
                double(r0.grid_dof) / double(r0.rom_dof));

    if (!a.out.empty()) {
        std::ofstream os(a.out);
        if (!os) throw ValidationError("cannot write " + a.out);
        os << "mode,n_modes,n_steps,n_outputs,grid_dof,rom_dof,dns_seconds,rom_seconds,speedup,"
              "lse\n";
        char buf[256];
        for (const BenchReport& r : reports) {
            std::snprintf(buf, sizeof buf, "%s,%d,%d,%d,%lld,%lld,%.17g,%.17g,%.17g,%.17g",
                          bench_mode_name(r.mode), r.n_modes, r.n_steps, r.n_outputs,
                          (long long)r.grid_dof, (long long)r.rom_dof, r.dns_seconds,
                          r.rom_seconds, r.speedup, r.lse);
            os << buf << '\n';
        }
        std::cout << "wrote " << a.out << '\n';
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reduced-order transient thermal simulation for many-core chips"};
    app.require_subcommand(1);

    DnsArgs dns;
    CLI::App* cdns = app.add_subcommand("dns", "Run the direct finite-volume solver on a trace");
    cdns->add_option("--model", dns.model, "chip model file")->required();
    cdns->add_option("--trace", dns.trace, "power trace CSV")->required();
    cdns->add_option("--out", dns.out, "output run directory")->required();
    cdns->add_option("--dt", dns.dt, "time step override (must match the trace)");
    cdns->add_option("--sample-every", dns.sample_every, "dump every k-th field")
        ->check(CLI::PositiveNumber);
    cdns->add_option("--tol", dns.tol, "linear solver tolerance")->check(CLI::PositiveNumber);
    cdns->callback([&] { run_dns(dns); });

    TrainArgs train;
    CLI::App* ctrain = app.add_subcommand("train", "Train per-block reduced models");
    ctrain->add_option("--model", train.model, "chip model file")->required();
    ctrain->add_option("--out", train.out, "library directory")->required();
    ctrain->add_flag("--local", train.local, "truncated-domain training with generic blocks");
    ctrain->add_option("--modes-max", train.modes_max, "modes kept per block")
        ->check(CLI::PositiveNumber);
    ctrain->add_option("--seed", train.seed, "base RNG seed");
    ctrain->add_option("--snapshots", train.snapshots, "training excitation steps")
        ->check(CLI::PositiveNumber);
    ctrain->add_option("--hold", train.hold, "steps each random power level is held")
        ->check(CLI::PositiveNumber);
    ctrain->add_option("--p-max", train.p_max, "excitation amplitude [W]")
        ->check(CLI::PositiveNumber);
    ctrain->add_option("--dt", train.dt, "training time step")->check(CLI::PositiveNumber);
    ctrain->add_option("--sample-every", train.sample_every, "keep every k-th snapshot")
        ->check(CLI::PositiveNumber);
    ctrain->add_option("--tol", train.tol, "linear solver tolerance")
        ->check(CLI::PositiveNumber);
    ctrain->add_option("--jobs", train.jobs, "parallel training workers")
        ->check(CLI::PositiveNumber);
    ctrain->add_option("--truncation-multiple", train.multiple,
                       "thermal-length multiple for --local")
        ->check(CLI::PositiveNumber);
    ctrain->add_option("--decay-threshold", train.decay_threshold,
                       "thermal-length decay threshold for --local");
    ctrain->callback([&] { run_train(train); });

    SimArgs sim;
    CLI::App* csim = app.add_subcommand("simulate", "Run a trained reduced model on a trace");
    csim->add_option("--library", sim.library, "library directory")->required();
    csim->add_option("--model", sim.model, "chip model file")->required();
    csim->add_option("--trace", sim.trace, "power trace CSV")->required();
    csim->add_option("--out", sim.out, "output run directory")->required();
    csim->add_option("--modes", sim.modes, "modes per block")
        ->required()
        ->check(CLI::PositiveNumber);
    csim->add_option("--output", sim.output, "what to write per step")
        ->check(CLI::IsMember({"field", "device", "peak"}));
    csim->add_option("--sample-every", sim.sample_every, "dump every k-th step")
        ->check(CLI::PositiveNumber);
    csim->add_flag("--local", sim.local, "require a truncated-domain library");
    csim->add_flag("--coeffs", sim.coeffs, "also dump per-block coefficient CSVs");
    csim->callback([&] { run_simulate(sim); });

    CompareArgs cmp;
    CLI::App* ccmp = app.add_subcommand("compare", "Compare a reduced run against a dns run");
    ccmp->add_option("--dns", cmp.dns, "dns run directory")->required();
    ccmp->add_option("--rom", cmp.rom, "reduced run directory")->required();
    ccmp->add_option("--out", cmp.out, "output directory for CSV tables")->required();
    ccmp->add_option("--modes-max", cmp.modes_max, "limit of the a-priori error curve")
        ->check(CLI::PositiveNumber);
    ccmp->callback([&] { run_compare(cmp); });

    BenchArgs bench;
    CLI::App* cbench = app.add_subcommand("bench", "Wall-clock comparison of both solvers");
    cbench->add_option("--model", bench.model, "chip model file")->required();
    cbench->add_option("--library", bench.library, "ensemble library directory")->required();
    cbench->add_option("--trace", bench.trace, "power trace CSV")->required();
    cbench->add_option("--modes", bench.modes, "modes per block")->check(CLI::PositiveNumber);
    cbench->add_option("--mode", bench.mode, "post-processing mode")
        ->check(CLI::IsMember({"all", "full", "device", "peak"}));
    cbench->add_option("--sample-every", bench.sample_every, "output cadence")
        ->check(CLI::PositiveNumber);
    cbench->add_option("--tol", bench.tol, "linear solver tolerance")
        ->check(CLI::PositiveNumber);
    cbench->add_option("--out", bench.out, "also write the report as CSV");
    cbench->callback([&] { run_bench(bench); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
