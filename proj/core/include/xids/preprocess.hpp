#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "xids/table.hpp"

namespace xids {

struct ScalerParams {
  double mean = 0.0;
  double std = 0.0;
  bool constant = false;

  bool operator==(const ScalerParams&) const = default;
};

/// Category value -> code, codes contiguous from 0 in first-appearance order.
struct CategoryEncoding {
  std::vector<std::string> values;

  /// Code for a value; values never seen during fitting map to values.size().
  int encode(const std::string& value) const;
  std::size_t size() const { return values.size(); }

  bool operator==(const CategoryEncoding&) const = default;
};

/// Fitted encoding maps and per-feature standardization parameters.
struct PreprocessState {
  FeatureSchema schema;
  std::map<std::string, CategoryEncoding> encodings;
  std::vector<ScalerParams> scaler;  // one per schema feature
  std::size_t fitted_on = 0;

  bool operator==(const PreprocessState&) const = default;
};

/// Builds encodings from the table's categorical columns, then computes the
/// mean and population standard deviation of every feature on the encoded
/// values.
PreprocessState fit_preprocess(const RecordTable& train);

/// Encodes categorical cells and z-scores every feature. Constant features
/// map to 0. The result is all-numeric with schema().as_numeric().
RecordTable apply_preprocess(const RecordTable& table, const PreprocessState& state);

struct SplitResult {
  RecordTable train;
  RecordTable test;
  std::vector<std::size_t> train_rows;  // indices into the input table
  std::vector<std::size_t> test_rows;
  std::uint64_t seed = 0;
  double ratio = 0.0;
};

/// Stratified shuffle split. |train| == floor(ratio * n); each class gets
/// floor(ratio * n_c) train rows and the remaining train slots go to the
/// classes with the largest fractional parts, so per-class shares stay
/// within one sample of the global proportion. Row order inside each side
/// follows the input table.
SplitResult split(const RecordTable& table, double ratio, std::uint64_t seed);

void to_json(nlohmann::json& j, const PreprocessState& state);
void from_json(const nlohmann::json& j, PreprocessState& state);

}  // namespace xids
