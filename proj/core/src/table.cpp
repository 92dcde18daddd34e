#include "xids/table.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "csv.hpp"
#include "xids/error.hpp"

namespace xids {

RecordTable::RecordTable(FeatureSchema schema, std::vector<Cell> cells,
                         std::vector<AttackCategory> labels)
    : schema_(std::move(schema)), cells_(std::move(cells)), labels_(std::move(labels)) {
  if (cells_.size() != labels_.size() * schema_.size()) {
    throw Error(ErrorCode::kDimension,
                fmt::format("table has {} cells for {} rows x {} features", cells_.size(),
                            labels_.size(), schema_.size()));
  }
}

std::size_t RecordTable::missing_count() const {
  std::size_t n = 0;
  for (const auto& c : cells_) n += is_missing(c) ? 1 : 0;
  return n;
}

RecordTable RecordTable::select_rows(std::span<const std::size_t> rows) const {
  std::vector<Cell> cells;
  cells.reserve(rows.size() * n_features());
  std::vector<AttackCategory> labels;
  labels.reserve(rows.size());
  for (std::size_t r : rows) {
    if (r >= n_rows()) throw Error(ErrorCode::kInvalidArgument, "row index out of range");
    auto src = row(r);
    cells.insert(cells.end(), src.begin(), src.end());
    labels.push_back(labels_[r]);
  }
  return RecordTable(schema_, std::move(cells), std::move(labels));
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw Error(ErrorCode::kDimension, "matrix value count does not match its shape");
  }
}

Dataset to_dataset(const RecordTable& table) {
  Dataset data;
  data.feature_names = table.schema().names();
  data.x = Matrix(table.n_rows(), table.n_features());
  data.y.reserve(table.n_rows());
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    for (std::size_t c = 0; c < table.n_features(); ++c) {
      const auto* v = std::get_if<double>(&table.at(r, c));
      if (v == nullptr) {
        throw Error(ErrorCode::kSchema,
                    fmt::format("row {} feature {} is not numeric; preprocess first", r,
                                table.schema().feature(c).name));
      }
      data.x(r, c) = *v;
    }
    data.y.push_back(code_of(table.label(r)));
  }
  return data;
}

namespace {

Cell parse_cell(std::string_view raw, Dtype dtype) {
  const auto text = csv::trim(raw);
  if (text.empty()) return Missing{};
  if (dtype == Dtype::kCategorical) return std::string(text);
  double value = 0.0;
  const auto* begin = text.data();
  const auto* end = text.data() + text.size();
  if (*begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) return Missing{};
  return value;
}

}  // namespace

RecordTable load_csv(const std::string& path, const FeatureSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open CSV file: " + path);

  std::vector<std::string> fields;
  if (!csv::read_record(in, fields)) {
    throw Error(ErrorCode::kSchema, "CSV file has no header row: " + path);
  }
  if (!fields.empty() && fields[0].starts_with("\xEF\xBB\xBF")) fields[0].erase(0, 3);

  // column position in the file for each schema feature; label last
  const std::size_t width = schema.size() + 1;
  std::vector<std::size_t> source(width, SIZE_MAX);
  std::map<std::string, std::size_t> header;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const std::string name(csv::trim(fields[i]));
    if (!header.emplace(name, i).second) {
      throw Error(ErrorCode::kSchema, "duplicate header column: " + name);
    }
  }
  for (std::size_t f = 0; f <= schema.size(); ++f) {
    const std::string& name =
        f < schema.size() ? schema.feature(f).name : schema.label_column();
    auto it = header.find(name);
    if (it == header.end()) {
      throw Error(ErrorCode::kSchema, "header is missing schema column: " + name);
    }
    source[f] = it->second;
    header.erase(it);
  }
  if (!header.empty()) {
    throw Error(ErrorCode::kSchema, "header has column not in schema: " + header.begin()->first);
  }

  std::vector<Cell> cells;
  std::vector<AttackCategory> labels;
  std::size_t line = 1;
  while (csv::read_record(in, fields)) {
    ++line;
    if (fields.size() == 1 && csv::trim(fields[0]).empty()) continue;  // blank line
    if (fields.size() != width) {
      throw Error(ErrorCode::kParse, fmt::format("{}:{}: expected {} fields, found {}", path,
                                                 line, width, fields.size()));
    }
    for (std::size_t f = 0; f < schema.size(); ++f) {
      cells.push_back(parse_cell(fields[source[f]], schema.feature(f).dtype));
    }
    const auto& label_text = fields[source[schema.size()]];
    auto label = parse_category(label_text);
    if (!label) {
      throw Error(ErrorCode::kParse,
                  fmt::format("{}:{}: unknown attack category '{}'", path, line, label_text));
    }
    labels.push_back(*label);
  }
  return RecordTable(schema, std::move(cells), std::move(labels));
}

std::string to_csv(const RecordTable& table) {
  std::string out;
  const auto& schema = table.schema();
  for (const auto& f : schema.features()) {
    out += csv::escape(f.name);
    out += ',';
  }
  out += csv::escape(schema.label_column());
  out += '\n';
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    for (const auto& cell : table.row(r)) {
      if (const auto* v = std::get_if<double>(&cell)) {
        fmt::format_to(std::back_inserter(out), "{}", *v);
      } else if (const auto* s = std::get_if<std::string>(&cell)) {
        out += csv::escape(*s);
      }
      out += ',';
    }
    out += to_string(table.label(r));
    out += '\n';
  }
  return out;
}

void write_csv(const RecordTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write CSV file: " + path);
  out << to_csv(table);
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path);
}

RecordTable clean(const RecordTable& raw) {
  const auto& schema = raw.schema();
  const FeatureSchema kept_schema = schema.without(ehms_dropped_columns());

  std::vector<std::size_t> kept_cols;
  for (const auto& f : kept_schema.features()) kept_cols.push_back(*schema.index_of(f.name));
  const auto sport = kept_schema.index_of(kSourcePortColumn);

  std::vector<Cell> cells;
  std::vector<AttackCategory> labels;
  std::size_t bad_port = 0;
  std::size_t incomplete = 0;
  for (std::size_t r = 0; r < raw.n_rows(); ++r) {
    if (sport) {
      const auto* port = std::get_if<double>(&raw.at(r, kept_cols[*sport]));
      if (port == nullptr || !(*port >= 0.0 && *port <= 65535.0)) {
        ++bad_port;
        continue;
      }
    }
    bool complete = true;
    for (std::size_t c : kept_cols) complete = complete && !is_missing(raw.at(r, c));
    if (!complete) {
      ++incomplete;
      continue;
    }
    for (std::size_t c : kept_cols) cells.push_back(raw.at(r, c));
    labels.push_back(raw.label(r));
  }
  if (bad_port > 0) spdlog::info("clean: dropped {} rows with invalid Sport", bad_port);
  if (incomplete > 0) spdlog::info("clean: dropped {} rows with missing cells", incomplete);
  return RecordTable(kept_schema, std::move(cells), std::move(labels));
}

}  // namespace xids
