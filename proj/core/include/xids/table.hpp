#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "xids/category.hpp"
#include "xids/schema.hpp"

namespace xids {

struct Missing {
  bool operator==(const Missing&) const = default;
};

/// One table cell: a parse failure (Missing), a number, or a category string.
using Cell = std::variant<Missing, double, std::string>;

inline bool is_missing(const Cell& c) { return std::holds_alternative<Missing>(c); }

/// Row-major table of mixed cells with one AttackCategory per row.
/// Immutable once built.
class RecordTable {
 public:
  RecordTable() = default;
  RecordTable(FeatureSchema schema, std::vector<Cell> cells,
              std::vector<AttackCategory> labels);

  const FeatureSchema& schema() const { return schema_; }
  std::size_t n_rows() const { return labels_.size(); }
  std::size_t n_features() const { return schema_.size(); }

  const Cell& at(std::size_t row, std::size_t col) const {
    return cells_[row * n_features() + col];
  }
  std::span<const Cell> row(std::size_t r) const {
    return {cells_.data() + r * n_features(), n_features()};
  }
  AttackCategory label(std::size_t r) const { return labels_[r]; }
  const std::vector<AttackCategory>& labels() const { return labels_; }

  std::size_t missing_count() const;

  /// New table holding the given rows, in the given order.
  RecordTable select_rows(std::span<const std::size_t> rows) const;

  bool operator==(const RecordTable&) const = default;

 private:
  FeatureSchema schema_;
  std::vector<Cell> cells_;
  std::vector<AttackCategory> labels_;
};

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * cols_, cols_};
  }
  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// All-numeric training view of a preprocessed table.
struct Dataset {
  std::vector<std::string> feature_names;
  Matrix x;
  std::vector<int> y;

  std::size_t n_rows() const { return x.rows(); }
  std::size_t n_features() const { return x.cols(); }
};

/// Throws Error(kSchema) if any cell is non-numeric or missing.
Dataset to_dataset(const RecordTable& table);

/// Reads a comma-separated file whose header names exactly the schema's
/// features plus its label column, in any order. Unparseable numeric cells
/// and empty cells become Missing.
RecordTable load_csv(const std::string& path, const FeatureSchema& schema);

/// Writes features in schema order followed by the label column.
/// Numbers use the shortest round-trip decimal form.
void write_csv(const RecordTable& table, const std::string& path);
std::string to_csv(const RecordTable& table);

/// Drops the identifier / binary-label / sparse columns (SrcMac, Label,
/// Dir, Flgs), then rows whose Sport is non-numeric or outside [0, 65535],
/// then rows with any remaining Missing cell. Idempotent.
RecordTable clean(const RecordTable& raw);

}  // namespace xids
