#pragma once
// Batch front door: JSON run configs, the CSV/meta file formats, and the four
// runners (forward, invert, roundtrip, check). Everything here is a library
// function so the formats and orchestration are unit-testable; the executable
// in tools/ only maps argv onto these calls.

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nodal/inverse.hpp"
#include "nodal/model.hpp"

namespace nodal::cli {

// Process exit codes shared by the runners and the executable.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;       // config file unreadable / schema violation
constexpr int kExitSpectrumGap = 3;  // eigenvalue bracket never changed sign
constexpr int kExitNodalData = 4;    // nodal arrays failed validation

// Generic file-format failure (unreadable file, malformed row).
struct CliError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Nodal data files that parse but fail structural validation; mapped to
// kExitNodalData.
struct DataError : CliError {
    using CliError::CliError;
};

// Schema or value error in the run config; key_path names the offending key
// ("problem.theta", "inversion.n_list", ...).
struct ConfigError : CliError {
    std::string key_path;
    ConfigError(std::string path, const std::string& msg)
        : CliError(path.empty() ? msg : path + ": " + msg), key_path(std::move(path)) {}
};

struct SpectrumConfig {
    int n_min = 1;
    int n_max = 40;
    double tol = 1e-11;  // bisection stop width for eigenvalues
};

struct InversionConfig {
    std::vector<int> n_list{50, 100, 200, 400};
    double grid_lo = 0.05;
    double grid_hi = PI - 0.05;
    int grid_points = 101;
    // Either the literal "from-problem" (compute the antisymmetric-kernel
    // integral from the problem's kernel entries) or an expression in x.
    std::string l_spec = "from-problem";
};

// Gates applied by run_roundtrip when comparing the reconstruction to the
// problem's own coefficients (sup norms over the interior window).
struct RoundtripTolerances {
    double theta = 5e-3;
    double omega_pi = 5e-2;
    double mu = 1e-2;
    double p_plus_r = 5e-2;
    double v_sq = 5e-2;
    double p = 1e-1;
    double r = 1e-1;
};

struct RunConfig {
    model::Problem problem;  // grid already sized to grid_n
    int grid_n = 4000;
    SpectrumConfig spectrum;
    InversionConfig inversion;
    RoundtripTolerances roundtrip;
};

// Parse and fully validate a config. Unknown keys, type mismatches, range
// violations, and unparsable expressions all throw ConfigError with the key
// path. load_config additionally throws ConfigError when the file cannot be
// read.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);

// Flag overrides applied on top of a loaded config.
struct RunFlags {
    std::filesystem::path out_dir = ".";
    bool allow_gaps = false;
    std::optional<int> grid_n;
    std::optional<std::vector<int>> n_list;
    std::optional<double> tol;
};
void apply_flags(RunConfig& cfg, const RunFlags& flags);

// ---- file formats -------------------------------------------------------
// All floating-point fields are written with 17 significant digits, so every
// reader below reproduces the written values bit-for-bit: for each format,
// read(write(x)) == x.

struct SpectrumRow {
    int n = 0;
    double lambda = 0.0;
    double residual = 0.0;
    bool operator==(const SpectrumRow&) const = default;
};

struct NodeRow {
    int n = 0;
    int j = 0;
    double x = 0.0;
    bool operator==(const NodeRow&) const = default;
};

struct ReconstructionTable {
    std::vector<double> x, mu, mu_prime, v_sq, v, p, r;
    bool operator==(const ReconstructionTable&) const = default;
};

// Ordered key/value lines ("key = value"), the .meta container.
using MetaEntries = std::vector<std::pair<std::string, std::string>>;

// One row of asym_report.csv. Sections: "residual" (per-n sweep values),
// "slope" (fitted log-log decay rates), "typo" (printed-vs-derived
// reconstruction-formula divergences). n < 0 means the field is blank.
struct ReportRow {
    std::string section;
    std::string name;
    int n = -1;
    double value = 0.0;
    std::string extra;
    bool operator==(const ReportRow&) const = default;
};

void write_spectrum_csv(const std::filesystem::path& path,
                        const std::vector<SpectrumRow>& rows);
std::vector<SpectrumRow> read_spectrum_csv(const std::filesystem::path& path);

void write_nodes_csv(const std::filesystem::path& path, const std::vector<NodeRow>& rows);
std::vector<NodeRow> read_nodes_csv(const std::filesystem::path& path);

// Node rows grouped into per-level arrays. Throws DataError when a level's
// j indices are not 0..k-1 in order (truncated or shuffled file).
inverse::NodalSet to_nodal_set(const std::vector<NodeRow>& rows, std::string provenance);
std::vector<NodeRow> from_nodal_set(const inverse::NodalSet& set);

void write_reconstruction_csv(const std::filesystem::path& path,
                              const inverse::Reconstruction& rec);
ReconstructionTable read_reconstruction_csv(const std::filesystem::path& path);

MetaEntries reconstruction_meta(const inverse::Reconstruction& rec,
                                const std::vector<int>& n_list);
void write_meta(const std::filesystem::path& path, const MetaEntries& entries);
MetaEntries read_meta(const std::filesystem::path& path);

void write_report_csv(const std::filesystem::path& path,
                      const std::vector<ReportRow>& rows);
std::vector<ReportRow> read_report_csv(const std::filesystem::path& path);

// ---- runners -------------------------------------------------------------
// Each runner writes its files into flags.out_dir (created if missing) and
// returns a process exit code. Config/schema problems and nodal-data problems
// surface as ConfigError / DataError (or inverse::InverseError) exceptions;
// the executable maps those to kExitConfig / kExitNodalData.

// Solves the spectrum block's levels; writes spectrum.csv and nodes.csv.
// Returns kExitSpectrumGap when any bracket failed, unless flags.allow_gaps.
int run_forward(const RunConfig& cfg, const RunFlags& flags);

// Reads a nodes.csv, runs the reconstruction with the inversion block's
// settings, writes reconstruction.csv and reconstruction.meta.
int run_invert(const std::filesystem::path& nodes_path, const RunConfig& cfg,
               const RunFlags& flags);

// Forward-solves exactly the inversion levels, reconstructs, compares against
// the problem's own coefficients, and writes spectrum.csv, nodes.csv,
// reconstruction.csv, reconstruction.meta, and roundtrip.meta.
int run_roundtrip(const RunConfig& cfg, const RunFlags& flags);

// Asymptotic-formula audit: per-level spectral/nodal/characteristic residuals
// with fitted decay slopes, plus the printed-vs-derived reconstruction-formula
// divergence table. Writes asym_report.csv.
int run_check(const RunConfig& cfg, const RunFlags& flags);

}  // namespace nodal::cli
