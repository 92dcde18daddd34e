#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace xids {

/// Multiclass target. Integer codes are stable and appear in every
/// serialized artifact.
enum class AttackCategory : int {
  kBenign = 0,
  kDataAlteration = 1,
  kSpoofing = 2,
};

inline constexpr std::size_t kNumClasses = 3;

inline constexpr std::array<AttackCategory, kNumClasses> kAllCategories = {
    AttackCategory::kBenign, AttackCategory::kDataAlteration,
    AttackCategory::kSpoofing};

constexpr int code_of(AttackCategory c) { return static_cast<int>(c); }

AttackCategory category_from_code(int code);

/// Canonical display name: "Benign", "DataAlteration", "Spoofing".
std::string_view to_string(AttackCategory c);

/// Accepts the canonical names plus the raw dataset spellings
/// ("normal", "Data Alteration", ...), case and separator insensitive.
std::optional<AttackCategory> parse_category(std::string_view text);

}  // namespace xids
