#include "xids/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "xids/error.hpp"
#include "xids/rng.hpp"

namespace xids {

std::array<double, kNumClasses> GenConfig::priors_from(double benign_share,
                                                       double attack_split) {
  const double attack = 1.0 - benign_share;
  return {benign_share, attack * (1.0 - attack_split), attack * attack_split};
}

GenConfig GenConfig::defaults() {
  GenConfig c;
  c.n_samples = 16318;
  c.attack_split = 0.5;
  c.class_priors = priors_from(14272.0 / 16318.0, c.attack_split);
  // {Benign, DataAlteration, Spoofing} shifts in baseline standard deviations
  c.signal_strengths = {
      {"SrcLoad", {0.0, -4.0, 0.6}},
      {"DIntPkt", {0.0, 2.0, -0.5}},
      {"Sport", {0.0, -0.8, 1.2}},
      {"Temp", {0.0, 0.0, 1.3}},
      {"SrcJitter", {0.0, -0.6, -0.5}},
      {"DstJitter", {0.0, 0.0, -0.5}},
      {"Pulse_Rate", {0.0, 0.0, 0.5}},
      {"Resp_Rate", {0.0, 0.0, 0.45}},
      {"SpO2", {0.0, 0.1, 0.4}},
      {"ST", {0.0, 0.1, 0.4}},
  };
  c.seed = 42;
  return c;
}

const std::map<std::string, FeatureModel>& ehms_feature_models() {
  static const std::map<std::string, FeatureModel> models = [] {
    constexpr double kNoCeil = 1e300;
    auto pos = [](double mean, double std, bool integer = false, double floor = 0.0) {
      return FeatureModel{mean, std, floor, kNoCeil, integer};
    };
    std::map<std::string, FeatureModel> m;
    m["Sport"] = {50000.0, 9000.0, 0.0, 65535.0, true};
    m["Dport"] = pos(1111.0, 0.0, true);
    m["SrcBytes"] = pos(500.0, 150.0, true);
    m["DstBytes"] = pos(300.0, 100.0, true);
    m["SrcLoad"] = pos(50000.0, 15000.0);
    m["DstLoad"] = pos(30000.0, 10000.0);
    m["SrcGap"] = pos(5.0, 10.0);
    m["DstGap"] = pos(5.0, 10.0);
    m["SIntPkt"] = pos(10.0, 3.0);
    m["DIntPkt"] = pos(10.0, 3.0);
    m["SIntPktAct"] = pos(8.0, 3.0);
    m["DIntPktAct"] = pos(8.0, 3.0);
    m["SrcJitter"] = pos(20.0, 8.0);
    m["DstJitter"] = pos(15.0, 6.0);
    m["sMaxPktSz"] = pos(300.0, 50.0, true, 60.0);
    m["dMaxPktSz"] = pos(200.0, 40.0, true, 60.0);
    m["sMinPktSz"] = pos(66.0, 4.0, true, 60.0);
    m["dMinPktSz"] = pos(66.0, 4.0, true, 60.0);
    m["Dur"] = pos(2.0, 0.5);
    m["Trans"] = pos(1.0, 0.0, true);
    m["TotPkts"] = pos(10.0, 3.0, true, 1.0);
    m["TotBytes"] = pos(800.0, 200.0, true);
    m["Load"] = pos(80000.0, 20000.0);
    m["Loss"] = pos(0.5, 1.0, true);
    m["pLoss"] = pos(1.0, 2.0);
    m["pSrcLoss"] = pos(0.5, 1.0);
    m["pDstLoss"] = pos(0.5, 1.0);
    m["Rate"] = pos(5.0, 1.5);
    m["Packet_num"] = pos(8000.0, 4700.0, true, 1.0);
    m["Temp"] = pos(37.0, 0.8, false, 30.0);
    m["SpO2"] = {97.0, 1.5, 0.0, 100.0, true};
    m["Pulse_Rate"] = pos(75.0, 10.0, true);
    m["SYS"] = pos(120.0, 12.0, true);
    m["DIA"] = pos(80.0, 8.0, true);
    m["Heart_rate"] = pos(75.0, 10.0, true);
    m["Resp_Rate"] = pos(16.0, 3.0, true);
    m["ST"] = {0.1, 0.1, -1e300, kNoCeil, false};
    return m;
  }();
  return models;
}

namespace {

const std::map<std::string, std::vector<std::string>>& categorical_levels() {
  static const std::map<std::string, std::vector<std::string>> levels = {
      {"Dir", {"->"}},
      {"Flgs", {"e", "e s", "e d"}},
      {"SrcAddr", {"10.0.1.172", "10.0.1.173"}},
      {"DstAddr", {"10.0.1.150"}},
      {"SrcMac", {"00:15:17:ae:6b:0c", "00:15:17:ae:6b:0d"}},
      {"DstMac", {"00:21:85:c5:25:6b"}},
  };
  return levels;
}

}  // namespace

void GenConfig::validate() const {
  double sum = 0.0;
  for (double p : class_priors) {
    if (!(p >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "class priors must be >= 0");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("class priors sum to {:.17g}, expected 1", sum));
  }
  if (!(attack_split >= 0.0 && attack_split <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "attack_split must be in [0, 1]");
  }
  const auto& models = ehms_feature_models();
  for (const auto& [name, shifts] : signal_strengths) {
    if (models.find(name) == models.end()) {
      throw Error(ErrorCode::kInvalidArgument, "signal on unknown numeric feature: " + name);
    }
    for (double s : shifts) {
      if (!std::isfinite(s)) throw Error(ErrorCode::kInvalidArgument, "non-finite signal");
    }
  }
}

void to_json(nlohmann::json& j, const GenConfig& c) {
  nlohmann::json priors = nlohmann::json::object();
  for (auto cat : kAllCategories) priors[std::string(to_string(cat))] = c.class_priors[code_of(cat)];
  nlohmann::json signals = nlohmann::json::object();
  for (const auto& [name, shifts] : c.signal_strengths) {
    nlohmann::json per = nlohmann::json::object();
    for (auto cat : kAllCategories) per[std::string(to_string(cat))] = shifts[code_of(cat)];
    signals[name] = per;
  }
  j = {{"n_samples", c.n_samples},
       {"class_priors", priors},
       {"attack_split", c.attack_split},
       {"signal_strengths", signals},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, GenConfig& c) {
  const GenConfig d = GenConfig::defaults();
  c.n_samples = j.value("n_samples", d.n_samples);
  c.attack_split = j.value("attack_split", d.attack_split);
  c.seed = j.value("seed", d.seed);
  if (auto it = j.find("class_priors"); it != j.end()) {
    for (auto cat : kAllCategories) {
      c.class_priors[code_of(cat)] = it->at(std::string(to_string(cat))).get<double>();
    }
  } else if (auto share = j.find("benign_share"); share != j.end()) {
    c.class_priors = GenConfig::priors_from(share->get<double>(), c.attack_split);
  } else {
    c.class_priors = GenConfig::priors_from(14272.0 / 16318.0, c.attack_split);
  }
  if (auto it = j.find("signal_strengths"); it != j.end()) {
    c.signal_strengths.clear();
    for (const auto& [name, per] : it->items()) {
      ClassShifts shifts{};
      for (auto cat : kAllCategories) {
        shifts[code_of(cat)] = per.value(std::string(to_string(cat)), 0.0);
      }
      c.signal_strengths[name] = shifts;
    }
  } else {
    c.signal_strengths = d.signal_strengths;
  }
}

std::array<std::size_t, kNumClasses> apportion(std::size_t n,
                                               const std::array<double, kNumClasses>& priors) {
  std::array<std::size_t, kNumClasses> counts{};
  std::array<double, kNumClasses> remainder{};
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const double quota = priors[c] * static_cast<double>(n);
    counts[c] = static_cast<std::size_t>(std::floor(quota + 1e-9));
    remainder[c] = quota - static_cast<double>(counts[c]);
    assigned += counts[c];
  }
  std::array<std::size_t, kNumClasses> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < n; i = (i + 1) % kNumClasses) {
    ++counts[order[i]];
    ++assigned;
  }
  return counts;
}

RecordTable generate(const GenConfig& config) {
  config.validate();
  const auto& schema = ehms_schema();
  const auto& models = ehms_feature_models();
  const auto& levels = categorical_levels();
  Rng rng(config.seed);

  const auto counts = apportion(config.n_samples, config.class_priors);
  std::vector<AttackCategory> labels;
  labels.reserve(config.n_samples);
  for (auto cat : kAllCategories) labels.insert(labels.end(), counts[code_of(cat)], cat);
  rng.shuffle(std::span<AttackCategory>(labels));

  // resolve per-column generators once
  struct Column {
    const FeatureModel* numeric = nullptr;
    const std::vector<std::string>* levels = nullptr;
    ClassShifts shift{};
    bool binary_label = false;
  };
  std::vector<Column> columns(schema.size());
  for (std::size_t f = 0; f < schema.size(); ++f) {
    const auto& name = schema.feature(f).name;
    if (name == "Label") {
      columns[f].binary_label = true;
    } else if (schema.feature(f).dtype == Dtype::kCategorical) {
      columns[f].levels = &levels.at(name);
    } else {
      columns[f].numeric = &models.at(name);
      if (auto it = config.signal_strengths.find(name); it != config.signal_strengths.end()) {
        columns[f].shift = it->second;
      }
    }
  }

  std::vector<std::size_t> clamped(schema.size(), 0);
  std::vector<Cell> cells;
  cells.reserve(config.n_samples * schema.size());
  for (std::size_t r = 0; r < config.n_samples; ++r) {
    const int cls = code_of(labels[r]);
    for (std::size_t f = 0; f < schema.size(); ++f) {
      const auto& col = columns[f];
      if (col.binary_label) {
        cells.emplace_back(cls == code_of(AttackCategory::kBenign) ? 0.0 : 1.0);
      } else if (col.levels != nullptr) {
        cells.emplace_back((*col.levels)[rng.below(col.levels->size())]);
      } else {
        const auto& m = *col.numeric;
        double v = m.mean + m.std * (rng.normal() + col.shift[cls]);
        if (m.integer) v = std::round(v);
        if (v < m.floor || v > m.ceil) {
          v = std::clamp(v, m.floor, m.ceil);
          ++clamped[f];
        }
        cells.emplace_back(v);
      }
    }
  }
  for (std::size_t f = 0; f < schema.size(); ++f) {
    if (clamped[f] > 0) {
      spdlog::debug("generate: clamped {} values of {} to its physical range", clamped[f],
                    schema.feature(f).name);
    }
  }
  return RecordTable(schema, std::move(cells), std::move(labels));
}

std::vector<FeatureSummary> describe(const RecordTable& table) {
  if (table.n_rows() == 0) throw Error(ErrorCode::kInvalidArgument, "cannot describe an empty table");
  std::vector<FeatureSummary> out;
  for (auto cat : kAllCategories) {
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < table.n_rows(); ++r) {
      if (table.label(r) == cat) rows.push_back(r);
    }
    if (rows.empty()) continue;
    for (std::size_t f = 0; f < table.n_features(); ++f) {
      if (table.schema().feature(f).dtype != Dtype::kNumeric) continue;
      std::vector<double> values;
      for (std::size_t r : rows) {
        if (const auto* v = std::get_if<double>(&table.at(r, f))) values.push_back(*v);
      }
      FeatureSummary s{cat, table.schema().feature(f).name, 0.0, 0.0, values.size()};
      if (!values.empty()) {
        const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
        const double n = static_cast<double>(values.size());
        s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
        if (*lo == *hi) {
          s.mean = *lo;
        } else {
          double ss = 0.0;
          for (double v : values) ss += (v - s.mean) * (v - s.mean);
          s.std = std::sqrt(ss / n);
        }
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace xids
