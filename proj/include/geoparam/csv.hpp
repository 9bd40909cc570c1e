#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace geoparam::csv {

/// Shortest text that parses back to the same double.
std::string format_double(double v);

/// Splits one line on commas. Surrounding whitespace and double quotes are
/// stripped from each field; quoted commas are not supported.
std::vector<std::string> split_line(std::string_view line);

/// Parses a whole field as a double. Returns false on trailing junk.
bool parse_double(std::string_view field, double& out);

/// Opens `path` for writing, creating parent directories. Throws IoError.
std::ofstream open_output(const std::filesystem::path& path);
/// Throws IoError when the file is missing or unreadable.
std::ifstream open_input(const std::filesystem::path& path);

/// Joins fields with commas and a trailing newline.
void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace geoparam::csv
