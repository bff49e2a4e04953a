#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "app.hpp"

namespace magnon::app {

std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void ResultTable::add_row(std::vector<double> row) {
  if (row.size() != columns.size())
    throw std::invalid_argument("table " + name + ": row has " + std::to_string(row.size()) + " values for " +
                                std::to_string(columns.size()) + " columns");
  rows.push_back(std::move(row));
}

std::size_t ResultTable::column(const std::string& label) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == label) return i;
  throw std::out_of_range("table " + name + " has no column " + label);
}

std::string ResultTable::to_csv() const {
  std::string out;
  for (const auto& [key, value] : metadata) out += "# " + key + ": " + value + "\n";
  for (std::size_t i = 0; i < columns.size(); ++i) out += (i ? "," : "") + columns[i];
  out += "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format_number(row[i]);
    }
    out += '\n';
  }
  return out;
}

ResultTable ResultTable::from_csv(const std::string& text, const std::string& name) {
  ResultTable t;
  t.name = name;
  std::istringstream in(text);
  std::string line;
  bool header = false;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto colon = line.find(": ");
      if (colon == std::string::npos) t.metadata.emplace_back(line.substr(std::min<std::size_t>(2, line.size())), "");
      else t.metadata.emplace_back(line.substr(2, colon - 2), line.substr(colon + 2));
      continue;
    }
    std::vector<std::string> fields;
    std::string field;
    std::istringstream cells(line);
    while (std::getline(cells, field, ',')) fields.push_back(field);
    if (!header) {
      t.columns = fields;
      header = true;
      continue;
    }
    std::vector<double> row;
    for (const auto& f : fields) {
      // errno is ignored: strtod reports ERANGE for subnormals that parse exactly.
      char* end = nullptr;
      const double v = std::strtod(f.c_str(), &end);
      if (end == f.c_str() || *end != '\0')
        throw std::runtime_error("table " + name + ", line " + std::to_string(line_no) + ": bad number '" + f + "'");
      row.push_back(v);
    }
    if (row.size() != t.columns.size())
      throw std::runtime_error("table " + name + ", line " + std::to_string(line_no) + ": expected " +
                               std::to_string(t.columns.size()) + " values");
    t.rows.push_back(std::move(row));
  }
  if (!header) throw std::runtime_error("table " + name + " has no header row");
  return t;
}

void write_table(const ResultTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << table.to_csv();
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

ResultTable read_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return ResultTable::from_csv(text.str(), path.stem().string());
}

}  // namespace magnon::app
