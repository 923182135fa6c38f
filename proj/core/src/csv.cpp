#include "chainstack/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "chainstack/error.hpp"
#include "chainstack/parallel.hpp"

namespace chainstack {

namespace fs = std::filesystem;

namespace {

constexpr const char* kModule = "draws-core";

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

std::optional<double> parse_number(std::string_view cell) {
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc{} || ptr != cell.data() + cell.size() || cell.empty()) return std::nullopt;
  return value;
}

std::string location(const fs::path& path, std::size_t line, std::size_t column) {
  return path.string() + ":" + std::to_string(line) + ":" + std::to_string(column);
}

}  // namespace

CsvTable read_csv_table(const fs::path& path, std::size_t skip_rows) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, kModule, "cannot open file").at(path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  CsvTable table;
  std::vector<double> cells;
  std::size_t width = 0;
  std::size_t rows = 0;
  std::size_t skipped = 0;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool first_line = true;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string_view line = trim(std::string_view(text).substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_cells(line);
    if (first_line) {
      first_line = false;
      const bool numeric = std::all_of(fields.begin(), fields.end(),
                                       [](std::string_view f) { return parse_number(f).has_value(); });
      width = fields.size();
      if (!numeric) {
        for (auto f : fields) table.header.emplace_back(f);
        continue;
      }
    }
    if (fields.size() != width)
      throw Error(ErrorCode::parse, kModule,
                  "ragged row: expected " + std::to_string(width) + " cells, found " +
                      std::to_string(fields.size()))
          .at(location(path, line_no, fields.size()));
    if (skipped < skip_rows) {
      ++skipped;
      continue;
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const auto value = parse_number(fields[c]);
      if (!value)
        throw Error(ErrorCode::parse, kModule, "non-numeric cell '" + std::string(fields[c]) + "'")
            .at(location(path, line_no, c + 1));
      if (!std::isfinite(*value))
        throw Error(ErrorCode::parse, kModule, "non-finite cell '" + std::string(fields[c]) + "'")
            .at(location(path, line_no, c + 1));
      cells.push_back(*value);
    }
    ++rows;
  }
  table.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < width; ++c)
      table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = cells[r * width + c];
  return table;
}

ChainDraws load_chain_csv(const fs::path& path, const CsvLoadOptions& options) {
  auto table = read_csv_table(path, options.skip_rows);
  std::string id = options.chain_id;
  if (id.empty()) {
    id = path.filename().string();
    if (const auto dot = id.find('.'); dot != std::string::npos) id.resize(dot);
  }
  if (table.values.rows() < 2)
    throw Error(ErrorCode::too_few_draws, kModule,
                "need at least 2 draws, found " + std::to_string(table.values.rows()))
        .at(path.string());
  return ChainDraws(std::move(id), std::move(table.values));
}

ParamTable load_param_csv(const fs::path& path, std::size_t skip_rows) {
  auto table = read_csv_table(path, skip_rows);
  ParamTable params;
  params.names = table.header;
  params.values = std::move(table.values);
  if (!params.names.empty() && params.names.front() == "iter") {
    params.names.erase(params.names.begin());
    params.values = Matrix(params.values.rightCols(params.values.cols() - 1));
  }
  if (params.names.empty()) params.names.assign(static_cast<std::size_t>(params.values.cols()), "");
  return params;
}

ChainDraws load_chain(const fs::path& log_lik_path, const std::optional<fs::path>& params_path,
                      const CsvLoadOptions& options) {
  ChainDraws ll = load_chain_csv(log_lik_path, options);
  if (!params_path) return ll;
  auto params = load_param_csv(*params_path, options.skip_rows);
  return ChainDraws(ll.chain_id(), ll.log_lik(), std::move(params));
}

std::string format_double(double value) {
  char buf[40];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
  return ec == std::errc{} ? std::string(buf, ptr) : std::string("nan");
}

void write_matrix_csv(const fs::path& path, const Matrix& values, std::span<const std::string> header) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, kModule, "cannot write file").at(path.string());
  if (!header.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    out << '\n';
  }
  std::string line;
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    line.clear();
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      if (c) line += ',';
      line += format_double(values(r, c));
    }
    line += '\n';
    out << line;
  }
  if (!out) throw Error(ErrorCode::io, kModule, "write failed").at(path.string());
}

void write_manifest(const fs::path& dir, const DrawManifest& manifest) {
  nlohmann::ordered_json j;
  j["schema"] = 1;
  j["n_obs"] = manifest.n_obs;
  j["provenance"] = manifest.provenance;
  auto& chains = j["chains"] = nlohmann::ordered_json::array();
  for (const auto& c : manifest.chains) {
    nlohmann::ordered_json e;
    e["chain_id"] = c.chain_id;
    e["log_lik"] = c.log_lik.lexically_relative(dir).generic_string();
    if (c.params) e["params"] = c.params->lexically_relative(dir).generic_string();
    chains.push_back(std::move(e));
  }
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, kModule, "cannot write manifest").at((dir / "manifest.json").string());
  out << j.dump(2) << '\n';
}

DrawManifest discover_inputs(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::io, kModule, "input directory not found").at(dir.string());
  DrawManifest manifest;
  const auto manifest_path = dir / "manifest.json";
  if (fs::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    nlohmann::json j;
    try {
      in >> j;
      manifest.n_obs = j.at("n_obs").get<std::size_t>();
      if (j.contains("provenance")) manifest.provenance = j["provenance"].get<std::vector<std::string>>();
      for (const auto& e : j.at("chains")) {
        ChainFileEntry entry{e.at("chain_id").get<std::string>(), dir / e.at("log_lik").get<std::string>(), {}};
        if (e.contains("params")) entry.params = dir / e["params"].get<std::string>();
        manifest.chains.push_back(std::move(entry));
      }
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::parse, kModule, std::string("malformed manifest: ") + ex.what())
          .at(manifest_path.string());
    }
    return manifest;
  }
  const std::string suffix = ".log_lik.csv";
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.size() > suffix.size() && name.ends_with(suffix)) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorCode::io, kModule, "no *.log_lik.csv files").at(dir.string());
  for (const auto& f : files) {
    auto name = f.filename().string();
    const auto id = name.substr(0, name.size() - suffix.size());
    ChainFileEntry entry{id, f, {}};
    const auto params = dir / (id + ".params.csv");
    if (fs::exists(params)) entry.params = params;
    manifest.chains.push_back(std::move(entry));
  }
  return manifest;
}

DrawSet load_draw_set(const DrawManifest& manifest, std::size_t skip_rows, std::size_t threads) {
  std::vector<std::optional<ChainDraws>> loaded(manifest.chains.size());
  parallel_for(manifest.chains.size(), threads, [&](std::size_t k) {
    const auto& e = manifest.chains[k];
    loaded[k].emplace(load_chain(e.log_lik, e.params, CsvLoadOptions{skip_rows, e.chain_id}));
  });
  std::vector<ChainDraws> chains;
  chains.reserve(loaded.size());
  for (auto& c : loaded) chains.push_back(std::move(*c));
  auto ds = assemble(std::move(chains));
  if (manifest.n_obs != 0 && ds.n_obs() != manifest.n_obs)
    throw Error(ErrorCode::dimension_mismatch, kModule,
                "manifest declares " + std::to_string(manifest.n_obs) + " observations, files have " +
                    std::to_string(ds.n_obs()));
  return ds;
}

}  // namespace chainstack
