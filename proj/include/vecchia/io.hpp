#ifndef VECCHIA_IO_HPP
#define VECCHIA_IO_HPP

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "vecchia/geo.hpp"

namespace vecchia::io {

/// Shortest-form-independent text for a double: 17 significant digits,
/// '.' decimal point, no locale.
std::string format_double(double value);

/// Reads a three-column CSV with header `x,y,value` (planar) or
/// `lon,lat,value` (great-circle). Without an explicit metric the header
/// decides: lon,lat selects great-circle distance on the Earth radius.
/// Errors are ParseError carrying the 1-based line number.
Dataset read_dataset_csv(std::istream& in, std::optional<Metric> metric = std::nullopt);
Dataset read_dataset_csv(const std::filesystem::path& path, std::optional<Metric> metric = std::nullopt);

void write_dataset_csv(std::ostream& out, const Dataset& dataset);

}  // namespace vecchia::io

#endif  // VECCHIA_IO_HPP
