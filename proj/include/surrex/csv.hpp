#pragma once

#include <optional>
#include <string>
#include <vector>

namespace surrex::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // column index by name, -1 when absent
  int column(const std::string& name) const;
  int require_column(const std::string& name, const std::string& context) const;
};

// Lines starting with '#' are skipped (writers may emit metadata comments).
Table parse(const std::string& text);
Table read_file(const std::string& path);

std::string escape_field(const std::string& field);
std::string join_row(const std::vector<std::string>& fields);

double parse_double(const std::string& field, const std::string& context);
long parse_long(const std::string& field, const std::string& context);
std::optional<double> parse_optional_double(const std::string& field,
                                            const std::string& context);

void write_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace surrex::csv
