#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "xids/category.hpp"
#include "xids/table.hpp"

namespace xids {

/// Per-class mean shift of one feature, in units of its baseline standard
/// deviation. The Benign entry is normally 0.
using ClassShifts = std::array<double, kNumClasses>;

struct GenConfig {
  std::size_t n_samples = 16318;
  // Benign / DataAlteration / Spoofing probabilities. Attack mass is
  // split by attack_split when built through with_attack_share().
  std::array<double, kNumClasses> class_priors{};
  double attack_split = 0.5;  // fraction of attacks that are Spoofing
  std::map<std::string, ClassShifts> signal_strengths;
  std::uint64_t seed = 42;

  /// Priors from a benign share and attack_split.
  static std::array<double, kNumClasses> priors_from(double benign_share,
                                                     double attack_split);

  /// Shipped preset: 14,272 / 16,318 benign, attacks split evenly, and
  /// directional shifts on SrcLoad, DIntPkt, Sport, Temp and the jitter
  /// features.
  static GenConfig defaults();

  void validate() const;
};

void to_json(nlohmann::json& j, const GenConfig& c);
void from_json(const nlohmann::json& j, GenConfig& c);

/// Largest-remainder apportionment of n over the priors. Ties on the
/// remainder go to the lower class code.
std::array<std::size_t, kNumClasses> apportion(std::size_t n,
                                               const std::array<double, kNumClasses>& priors);

/// Baseline distribution of one generated numeric feature.
struct FeatureModel {
  double mean = 0.0;
  double std = 1.0;
  double floor = -1e300;
  double ceil = 1e300;
  bool integer = false;
};

/// Baseline Gaussian parameters for every numeric ehms_schema() feature.
const std::map<std::string, FeatureModel>& ehms_feature_models();

/// EHMS-shaped table with exact per-class counts. Rows are produced from a
/// single seeded stream in row order: the label sequence is a seeded
/// shuffle of the apportioned counts, then each row draws its features in
/// schema order.
RecordTable generate(const GenConfig& config);

struct FeatureSummary {
  AttackCategory category{};
  std::string feature;
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;
};

/// Per-class, per-numeric-feature mean / population std / count, for the
/// classes present in the table.
std::vector<FeatureSummary> describe(const RecordTable& table);

}  // namespace xids
