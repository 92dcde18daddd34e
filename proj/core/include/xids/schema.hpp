#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace xids {

enum class FeatureKind { kNetwork, kBiomedical };
enum class Dtype { kNumeric, kCategorical };

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::kNetwork;
  Dtype dtype = Dtype::kNumeric;

  bool operator==(const FeatureSpec&) const = default;
};

/// Ordered feature list plus the name of the multiclass label column.
/// Construction validates that names are unique and the label column is not
/// itself a feature.
class FeatureSchema {
 public:
  FeatureSchema() = default;
  FeatureSchema(std::vector<FeatureSpec> features, std::string label_column);

  const std::vector<FeatureSpec>& features() const { return features_; }
  const FeatureSpec& feature(std::size_t i) const { return features_.at(i); }
  std::size_t size() const { return features_.size(); }
  const std::string& label_column() const { return label_column_; }

  std::optional<std::size_t> index_of(std::string_view name) const;
  std::vector<std::string> names() const;

  /// Copy without the named features. Unknown names are ignored.
  FeatureSchema without(const std::vector<std::string>& names) const;

  /// Copy with every feature marked numeric (the post-encoding view).
  FeatureSchema as_numeric() const;

  bool operator==(const FeatureSchema&) const = default;

 private:
  std::vector<FeatureSpec> features_;
  std::string label_column_;
};

/// The raw WUSTL-EHMS-2020 column layout: 35 network flow metrics and
/// 8 biometric measurements, with the binary "Label" kept as a droppable
/// network-kind column and "Attack Category" as the target.
const FeatureSchema& ehms_schema();

/// Columns removed by clean().
const std::vector<std::string>& ehms_dropped_columns();

inline constexpr std::string_view kSourcePortColumn = "Sport";

std::string_view to_string(FeatureKind kind);
std::string_view to_string(Dtype dtype);

void to_json(nlohmann::json& j, const FeatureSchema& schema);
void from_json(const nlohmann::json& j, FeatureSchema& schema);

FeatureSchema load_schema(const std::string& path);
void save_schema(const FeatureSchema& schema, const std::string& path);

}  // namespace xids
