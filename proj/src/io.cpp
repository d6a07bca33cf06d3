#include "qmon/io.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "qmon/format.hpp"

namespace qmon {

namespace {

const char* const kRequiredProvenance[] = {"qmon", "config_hash", "seed", "realizations", "generated"};

}  // namespace

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

const std::map<std::string, std::vector<std::string>>& csv_schemas() {
  static const std::map<std::string, std::vector<std::string>> schemas{
      {"density", {"time", "site", "value"}},
      {"series", {"time", "value"}},
      {"pair_correlation", {"time", "site", "site2", "value"}},
      {"events", {"time", "channel", "outcome", "pre_jump_norm"}},
      {"rho", {"row", "col", "real", "imag"}},
  };
  return schemas;
}

void write_csv(std::ostream& out, const Provenance& prov, const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows) {
  out << "# qmon: " << prov.version << "\n";
  out << "# config_hash: " << hex64(prov.config_hash) << "\n";
  out << "# seed: " << prov.seed << "\n";
  out << "# realizations: " << prov.realizations << "\n";
  out << "# generated: " << prov.generated << "\n";
  for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << format_double(row[c]);
    out << "\n";
  }
}

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  std::size_t number = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!header && !line.empty() && line[0] == '#') {
      const auto colon = line.find(':');
      if (colon == std::string::npos)
        throw ParseError("line " + std::to_string(number) + ": provenance line without 'key: value'");
      auto key = line.substr(1, colon - 1);
      key.erase(0, key.find_first_not_of(' '));
      auto value = line.substr(colon + 1);
      value.erase(0, value.find_first_not_of(' '));
      table.provenance[key] = value;
      continue;
    }
    if (!header) {
      for (const char* key : kRequiredProvenance)
        if (!table.provenance.count(key))
          throw ParseError("line " + std::to_string(number) + ": missing provenance field '" + key + "'");
      std::istringstream cells(line);
      std::string cell;
      while (std::getline(cells, cell, ',')) table.columns.push_back(cell);
      bool known = false;
      for (const auto& [kind, cols] : csv_schemas()) known = known || cols == table.columns;
      if (!known) throw ParseError("line " + std::to_string(number) + ": header '" + line + "' matches no schema");
      header = true;
      continue;
    }
    std::vector<double> row;
    std::size_t start = 0;
    while (start <= line.size()) {
      const auto end = std::min(line.find(',', start), line.size());
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(line.data() + start, line.data() + end, v);
      if (ec != std::errc() || ptr != line.data() + end || end == start)
        throw ParseError("line " + std::to_string(number) + ": non-numeric cell");
      row.push_back(v);
      start = end + 1;
    }
    if (row.size() != table.columns.size())
      throw ParseError("line " + std::to_string(number) + ": expected " +
                       std::to_string(table.columns.size()) + " cells");
    table.rows.push_back(std::move(row));
  }
  if (!header) throw ParseError("no header row");
  return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return read_csv(in);
}

std::vector<std::vector<double>> density_rows(const std::vector<double>& times,
                                              const Eigen::MatrixXd& density) {
  std::vector<std::vector<double>> rows;
  for (std::size_t t = 0; t < times.size(); ++t)
    for (Eigen::Index m = 0; m < density.cols(); ++m)
      rows.push_back({times[t], static_cast<double>(m), density(static_cast<Eigen::Index>(t), m)});
  return rows;
}

std::vector<std::vector<double>> series_rows(const std::vector<double>& times,
                                             const std::vector<double>& values) {
  std::vector<std::vector<double>> rows;
  for (std::size_t t = 0; t < times.size() && t < values.size(); ++t) rows.push_back({times[t], values[t]});
  return rows;
}

std::vector<std::vector<double>> pair_rows(const std::vector<double>& times,
                                           const std::vector<Eigen::MatrixXd>& pairs) {
  std::vector<std::vector<double>> rows;
  for (std::size_t t = 0; t < times.size() && t < pairs.size(); ++t)
    for (Eigen::Index m = 0; m < pairs[t].rows(); ++m)
      for (Eigen::Index l = 0; l < pairs[t].cols(); ++l)
        rows.push_back({times[t], static_cast<double>(m), static_cast<double>(l), pairs[t](m, l)});
  return rows;
}

std::vector<std::vector<double>> event_rows(const std::vector<JumpEvent>& events) {
  std::vector<std::vector<double>> rows;
  for (const auto& e : events)
    rows.push_back({e.time, static_cast<double>(e.channel), e.outcome, e.pre_jump_norm});
  return rows;
}

std::vector<std::vector<double>> rho_rows(const DensityMatrix& rho) {
  std::vector<std::vector<double>> rows;
  for (Eigen::Index a = 0; a < rho.rows(); ++a)
    for (Eigen::Index b = 0; b < rho.cols(); ++b)
      rows.push_back({static_cast<double>(a), static_cast<double>(b), rho(a, b).real(), rho(a, b).imag()});
  return rows;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace qmon
