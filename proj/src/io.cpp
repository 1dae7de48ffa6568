#include "vecchia/io.hpp"

#include <array>
#include <cmath>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>
#include <vector>

namespace vecchia::io {

std::string format_double(double value) {
  std::array<char, 64> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value,
                                       std::chars_format::general, 17);
  if (ec != std::errc{}) throw Error("cannot format number");
  return std::string(buf.data(), end);
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  for (;;) {
    const auto comma = line.find(',', pos);
    fields.push_back(trim(line.substr(pos, comma == std::string_view::npos ? comma : comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return fields;
}

double parse_number(std::string_view text, Index line, std::string_view column) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
    throw ParseError("invalid number '" + std::string(text) + "' in column " + std::string(column), line);
  if (!std::isfinite(value)) throw ParseError("non-finite value in column " + std::string(column), line);
  return value;
}

}  // namespace

Dataset read_dataset_csv(std::istream& in, std::optional<Metric> metric) {
  std::string line;
  Index line_no = 1;
  if (!std::getline(in, line)) throw ParseError("missing header", 1);
  const auto header = split(line);
  if (header.size() != 3)
    throw ParseError("expected header x,y,value or lon,lat,value (got " + std::to_string(header.size()) +
                         " columns)",
                     1);
  const bool planar = header[0] == "x" && header[1] == "y";
  const bool spherical = header[0] == "lon" && header[1] == "lat";
  if ((!planar && !spherical) || header[2] != "value")
    throw ParseError("expected header x,y,value or lon,lat,value", 1);

  Dataset ds;
  ds.metric = metric ? *metric : (spherical ? Metric::great_circle() : Metric::euclidean());
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    if (fields.size() != 3)
      throw ParseError("expected 3 columns, got " + std::to_string(fields.size()), line_no);
    Location loc{parse_number(fields[0], line_no, header[0]), parse_number(fields[1], line_no, header[1])};
    if (ds.metric.kind() == Metric::Kind::great_circle && std::abs(loc.y) > 90.0)
      throw ParseError("latitude outside [-90, 90]", line_no);
    ds.locations.push_back(loc);
    values.push_back(parse_number(fields[2], line_no, header[2]));
  }
  if (ds.locations.empty()) throw ParseError("no data rows", line_no);
  ds.observations = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Index>(values.size()));
  return ds;
}

Dataset read_dataset_csv(const std::filesystem::path& path, std::optional<Metric> metric) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return read_dataset_csv(in, metric);
}

void write_dataset_csv(std::ostream& out, const Dataset& dataset) {
  out << (dataset.metric.kind() == Metric::Kind::great_circle ? "lon,lat,value\n" : "x,y,value\n");
  for (Index i = 0; i < dataset.size(); ++i) {
    const auto& loc = dataset.locations[static_cast<std::size_t>(i)];
    out << format_double(loc.x) << ',' << format_double(loc.y) << ','
        << format_double(dataset.observations[i]) << '\n';
  }
}

}  // namespace vecchia::io
