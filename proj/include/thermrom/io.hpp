#pragma once

#include <filesystem>
#include <string>

#include "thermrom/dns.hpp"
#include "thermrom/ensemble.hpp"
#include "thermrom/local.hpp"
#include "thermrom/thermal_length.hpp"

namespace thermrom {

/// A parsed model file: the chip itself plus how to group units into blocks.
struct ModelFile {
    ChipModel model;
    Grouping grouping;
};

/// Reads the structured-text chip description (see README for the schema:
/// [grid], [[layer]], [boundary.<face>], [model], [[unit]], [partition]).
/// Parse and schema errors carry file:line positions.
ModelFile read_model_file(const std::filesystem::path& path);

/// Writes a model file that read_model_file reproduces bit-for-bit
/// (doubles are printed with 17 significant digits).
void write_model_file(const std::filesystem::path& path, const ChipModel& model,
                      const Grouping& grouping);

/// Power trace CSV with header `t,<block_id>,...`; row k carries the power
/// held over the k-th step and is stamped with the interval's end time
/// (k+1)*dt, so the step size is the first row's t.
PowerTrace read_trace_csv(const std::filesystem::path& path);
void write_trace_csv(const std::filesystem::path& path, const PowerTrace& trace);

/// Field dump: `<base>.f64` holds the cells as little-endian doubles in
/// x-fastest order; `<base>.hdr` is a text sidecar with nx ny nz dx dy dz
/// and the timestamp.
void write_field(const std::filesystem::path& base, const ThermalField& field);
ThermalField read_field(const std::filesystem::path& base);

/// Library directories: manifest.json plus one binary file per trained block
/// (modes, spectra and the reduced matrices round-trip exactly). The manifest
/// records the partition hash and the full training configuration; loading
/// against a different partition is refused.
void save_ensemble_library(const std::filesystem::path& dir, const Ensemble& ens,
                           const HsbPartition& part, const TrainingConfig& cfg);
Ensemble load_ensemble_library(const std::filesystem::path& dir, const HsbPartition& part);

void save_local_library(const std::filesystem::path& dir, const LocalEnsemble& ens,
                        const HsbPartition& part, const TrainingConfig& cfg,
                        const ThermalLengthTable& table);
LocalEnsemble load_local_library(const std::filesystem::path& dir, const HsbPartition& part);

/// Spectral summary of a library directory, read from the stored blocks and
/// the manifest's area fractions — what the a-priori error curve is computed
/// from without reloading the model.
struct LibrarySpectrum {
    Eigen::VectorXd equivalent;  // area-weighted per-mode eigenvalues
    int n_snapshots = 0;         // largest snapshot count across blocks
    int min_modes = 0;           // smallest trained mode count
};
LibrarySpectrum library_spectrum(const std::filesystem::path& dir);

/// Train-or-resume: block (or class) files already present in `dir` with a
/// matching manifest are reused, the rest are trained and saved as they
/// finish. A manifest for a different partition or training setup is refused
/// (delete the directory or pick another one).
Ensemble ensure_ensemble_library(const std::filesystem::path& dir, const ChipModel& model,
                                 const HsbPartition& part, const TrainingConfig& cfg);
LocalEnsemble ensure_local_library(const std::filesystem::path& dir, const ChipModel& model,
                                   const HsbPartition& part, const ThermalLengthTable& table,
                                   const TrainingConfig& cfg, double multiple = 5.0);

/// Kind of library a directory holds ("ensemble" or "local"); throws when
/// there is no readable manifest.
std::string library_kind(const std::filesystem::path& dir);

/// The thermal-length table as CSV (block_width, aspect, thickness, lambda_th).
void write_length_table(const std::filesystem::path& path, const ThermalLengthTable& table);
ThermalLengthTable read_length_table(const std::filesystem::path& path);

} // namespace thermrom
