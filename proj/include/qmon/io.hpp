#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "qmon/core.hpp"
#include "qmon/observables.hpp"

namespace qmon {

/// Leading '#' lines of every emitted file, one "key: value" pair each.
/// `generated` (the wall-clock timestamp) is the only field that differs
/// between two runs of the same config and seed.
struct Provenance {
  std::string version = kVersion;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::size_t realizations = 1;
  std::string generated;
};

std::string hex64(std::uint64_t value);
/// UTC time formatted as ISO 8601.
std::string utc_timestamp();

/// Output CSV schema. After the provenance block comes one header row and
/// then numeric rows; every value is written in shortest round-trip form.
///   density / *_stderr density:  time,site,value
///   scalar series:               time,value
///   pair_correlation:            time,site,site2,value
///   events:                      time,channel,outcome,pre_jump_norm
///   rho:                         row,col,real,imag
struct CsvTable {
  std::map<std::string, std::string> provenance;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

/// The documented column sets, by file kind.
const std::map<std::string, std::vector<std::string>>& csv_schemas();

void write_csv(std::ostream& out, const Provenance& prov, const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows);

/// Parse and check against the schema: provenance keys present, header row
/// one of csv_schemas(), numeric cells, uniform row width. Throws
/// ParseError with a line number.
CsvTable read_csv(std::istream& in);
CsvTable read_csv(const std::filesystem::path& path);

std::vector<std::vector<double>> density_rows(const std::vector<double>& times,
                                              const Eigen::MatrixXd& density);
std::vector<std::vector<double>> series_rows(const std::vector<double>& times,
                                             const std::vector<double>& values);
std::vector<std::vector<double>> pair_rows(const std::vector<double>& times,
                                           const std::vector<Eigen::MatrixXd>& pairs);
std::vector<std::vector<double>> event_rows(const std::vector<JumpEvent>& events);
std::vector<std::vector<double>> rho_rows(const DensityMatrix& rho);

/// Write `text` to `path`, creating parent directories.
void write_file(const std::filesystem::path& path, const std::string& text);

}  // namespace qmon
