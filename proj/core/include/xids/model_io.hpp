#pragma once

#include <string>

#include <nlohmann/json_fwd.hpp>

#include "xids/model.hpp"

namespace xids {

inline constexpr int kModelFormatVersion = 1;

/// Versioned JSON model document:
///   {"format": "xids-model", "version": 1, "type": "tree"|"ensemble"|"linear", ...}
/// Doubles are written in shortest round-trip form so a reload predicts
/// bit-identically.
nlohmann::json model_to_json(const AnyModel& model);
AnyModel model_from_json(const nlohmann::json& doc);

void save_model(const AnyModel& model, const std::string& path);
AnyModel load_model(const std::string& path);

}  // namespace xids
