#pragma once

// Experiment-log ingestion. The CSV header is
//
//   direction,data_size_millions,sampling_ratio,eval_cross_entropy[,point_id]
//
// Blank lines and lines starting with '#' are ignored. Rows sharing a
// direction and data size form one series. The optional point_id column
// groups rows that came from the same training run (one sweep point).

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dplopt {

struct Observation {
  std::string direction;
  double data_size = 0.0;       ///< millions of examples
  double sampling_ratio = 0.0;  ///< in (0, 1)
  double eval_loss = 0.0;       ///< cross-entropy
  std::optional<long long> point_id;

  void validate() const;
};

struct Series {
  std::string direction;
  double data_size = 0.0;
  std::vector<Observation> observations;
};

/// Groups by (direction, data size) in first-appearance order.
std::vector<Series> group_series(std::span<const Observation> observations);

std::vector<Observation> parse_observations_csv(std::istream& in);
std::vector<Observation> read_observations_csv(const std::filesystem::path& path);

/// Writes the header and rows; the point_id column is emitted when every
/// row carries one.
void write_observations_csv(std::ostream& out, std::span<const Observation> observations);

/// Generic comma-separated table used for self-consumption of every CSV the
/// tool emits. Comment and blank lines are skipped.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  ///< 1-based source line per row
};

CsvTable parse_csv(std::istream& in);

/// "%.17g" formatting used for all floating-point CSV output.
std::string format_double(double value);

/// Parses a finite double; throws ParseError naming `line`.
double parse_double(const std::string& text, std::size_t line, const char* field);

}  // namespace dplopt
