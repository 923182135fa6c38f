#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chainstack/draws.hpp"

namespace chainstack {

/// Plain-CSV ingestion for per-chain output.
///
/// Layout: one row per post-warmup draw, `,` delimiter, UTF-8. A single header
/// row is detected automatically when any cell of the first row is not a
/// number. Every data cell must parse as a finite real; `NaN`/`inf` are
/// rejected. Errors report 1-based file line and column numbers.
struct CsvLoadOptions {
  std::size_t skip_rows = 0;  // data rows dropped from the top (manual warmup trim)
  std::string chain_id;       // defaults to the file stem
};

struct CsvTable {
  std::vector<std::string> header;  // empty when the file had none
  Matrix values;
};

CsvTable read_csv_table(const std::filesystem::path& path, std::size_t skip_rows = 0);

/// Log-likelihood CSV (draws x observations) to a chain without parameters.
ChainDraws load_chain_csv(const std::filesystem::path& path, const CsvLoadOptions& options = {});

/// Parameter CSV. A leading column headed `iter` is treated as a draw index and dropped.
ParamTable load_param_csv(const std::filesystem::path& path, std::size_t skip_rows = 0);

/// Log-likelihood CSV plus an optional parameter CSV with the same row count.
ChainDraws load_chain(const std::filesystem::path& log_lik_path,
                      const std::optional<std::filesystem::path>& params_path,
                      const CsvLoadOptions& options = {});

/// Fixed 17-significant-digit rendering; parses back to the same double.
std::string format_double(double value);

void write_matrix_csv(const std::filesystem::path& path, const Matrix& values,
                      std::span<const std::string> header = {});

/// Files making up one run, as recorded in `manifest.json` next to the CSVs.
struct ChainFileEntry {
  std::string chain_id;
  std::filesystem::path log_lik;
  std::optional<std::filesystem::path> params;
};

struct DrawManifest {
  std::vector<ChainFileEntry> chains;
  std::size_t n_obs = 0;
  std::vector<std::string> provenance;
};

/// Writes `manifest.json` into `dir`; file paths are stored relative to `dir`.
void write_manifest(const std::filesystem::path& dir, const DrawManifest& manifest);

/// Reads `dir/manifest.json` when present, otherwise discovers `*.log_lik.csv`
/// files (sorted by name) with optional sibling `*.params.csv`.
DrawManifest discover_inputs(const std::filesystem::path& dir);

/// Loads every chain listed in the manifest and assembles them.
DrawSet load_draw_set(const DrawManifest& manifest, std::size_t skip_rows = 0, std::size_t threads = 1);

}  // namespace chainstack
