#include "xids/category.hpp"

#include <cctype>
#include <string>

#include "xids/error.hpp"

namespace xids {

AttackCategory category_from_code(int code) {
  if (code < 0 || code >= static_cast<int>(kNumClasses)) {
    throw Error(ErrorCode::kInvalidArgument,
                "class code out of range: " + std::to_string(code));
  }
  return static_cast<AttackCategory>(code);
}

std::string_view to_string(AttackCategory c) {
  switch (c) {
    case AttackCategory::kBenign:
      return "Benign";
    case AttackCategory::kDataAlteration:
      return "DataAlteration";
    case AttackCategory::kSpoofing:
      return "Spoofing";
  }
  return "?";
}

std::optional<AttackCategory> parse_category(std::string_view text) {
  std::string key;
  key.reserve(text.size());
  for (char ch : text) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (key == "benign" || key == "normal") return AttackCategory::kBenign;
  if (key == "dataalteration") return AttackCategory::kDataAlteration;
  if (key == "spoofing") return AttackCategory::kSpoofing;
  return std::nullopt;
}

}  // namespace xids
