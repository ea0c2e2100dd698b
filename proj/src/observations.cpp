#include "dplopt/observations.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "dplopt/error.hpp"

namespace dplopt {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

const std::vector<std::string> kHeader = {"direction", "data_size_millions", "sampling_ratio",
                                          "eval_cross_entropy"};

}  // namespace

void Observation::validate() const {
  if (direction.empty()) throw DomainError("observation without a direction name");
  if (!(std::isfinite(data_size) && data_size > 0.0)) {
    throw DomainError("data size must be > 0 for direction '" + direction + "'");
  }
  if (!(sampling_ratio > 0.0 && sampling_ratio < 1.0)) {
    throw DomainError("sampling ratio must lie in (0, 1) for direction '" + direction + "'");
  }
  if (!std::isfinite(eval_loss)) throw DomainError("evaluation loss must be finite");
}

std::vector<Series> group_series(std::span<const Observation> observations) {
  std::vector<Series> out;
  for (const auto& obs : observations) {
    auto it = std::find_if(out.begin(), out.end(), [&](const Series& s) {
      return s.direction == obs.direction && s.data_size == obs.data_size;
    });
    if (it == out.end()) {
      out.push_back({obs.direction, obs.data_size, {}});
      it = std::prev(out.end());
    }
    it->observations.push_back(obs);
  }
  return out;
}

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

double parse_double(const std::string& text, std::size_t line, const char* field) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw ParseError(std::string("invalid number for ") + field + ": '" + text + "'", line);
  }
  if (!std::isfinite(v)) throw ParseError(std::string("non-finite ") + field, line);
  return v;
}

CsvTable parse_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  std::size_t number = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++number;
    if (number == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
      line.erase(0, 3);
    }
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto cells = split(t);
    if (!have_header) {
      table.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw ParseError("expected " + std::to_string(table.header.size()) + " fields, found " +
                           std::to_string(cells.size()),
                       number);
    }
    table.rows.push_back(std::move(cells));
    table.line_numbers.push_back(number);
  }
  return table;
}

std::vector<Observation> parse_observations_csv(std::istream& in) {
  const CsvTable table = parse_csv(in);
  if (table.header.empty()) throw ParseError("no observations");
  const bool with_point = table.header.size() == 5 && table.header[4] == "point_id";
  std::vector<std::string> base(table.header.begin(),
                                table.header.begin() + std::min<std::size_t>(4, table.header.size()));
  if (base != kHeader || (table.header.size() != 4 && !with_point)) {
    throw ParseError(
        "header must be direction,data_size_millions,sampling_ratio,eval_cross_entropy"
        "[,point_id]",
        1);
  }
  std::vector<Observation> out;
  out.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = table.line_numbers[r];
    Observation obs;
    obs.direction = row[0];
    if (obs.direction.empty()) throw ParseError("empty direction name", line);
    obs.data_size = parse_double(row[1], line, "data_size_millions");
    obs.sampling_ratio = parse_double(row[2], line, "sampling_ratio");
    obs.eval_loss = parse_double(row[3], line, "eval_cross_entropy");
    if (with_point) {
      long long id = 0;
      const auto& s = row[4];
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), id);
      if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        throw ParseError("invalid point_id '" + s + "'", line);
      }
      obs.point_id = id;
    }
    try {
      obs.validate();
    } catch (const DomainError& e) {
      throw ParseError(e.what(), line);
    }
    out.push_back(std::move(obs));
  }
  if (out.empty()) throw ParseError("no observations");
  return out;
}

std::vector<Observation> read_observations_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return parse_observations_csv(in);
}

void write_observations_csv(std::ostream& out, std::span<const Observation> observations) {
  bool with_point = !observations.empty();
  for (const auto& o : observations) with_point = with_point && o.point_id.has_value();
  out << "direction,data_size_millions,sampling_ratio,eval_cross_entropy";
  if (with_point) out << ",point_id";
  out << '\n';
  for (const auto& o : observations) {
    out << o.direction << ',' << format_double(o.data_size) << ',' << format_double(o.sampling_ratio)
        << ',' << format_double(o.eval_loss);
    if (with_point) out << ',' << *o.point_id;
    out << '\n';
  }
}

}  // namespace dplopt
