#include "xids/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "xids/error.hpp"
#include "xids/rng.hpp"

namespace xids {

int CategoryEncoding::encode(const std::string& value) const {
  auto it = std::find(values.begin(), values.end(), value);
  return static_cast<int>(it - values.begin());
}

namespace {

[[noreturn]] void bad_cell(const RecordTable& t, std::size_t r, std::size_t c) {
  throw Error(ErrorCode::kSchema,
              fmt::format("row {} feature {}: cell is missing or has the wrong type", r,
                          t.schema().feature(c).name));
}

}  // namespace

PreprocessState fit_preprocess(const RecordTable& train) {
  if (train.n_rows() == 0) {
    throw Error(ErrorCode::kInvalidArgument, "cannot fit preprocessing on an empty table");
  }
  PreprocessState state;
  state.schema = train.schema();
  state.fitted_on = train.n_rows();
  state.scaler.resize(train.n_features());

  const std::size_t n = train.n_rows();
  std::vector<double> column(n);
  for (std::size_t c = 0; c < train.n_features(); ++c) {
    const auto& spec = train.schema().feature(c);
    if (spec.dtype == Dtype::kCategorical) {
      CategoryEncoding enc;
      std::unordered_map<std::string, int> codes;
      for (std::size_t r = 0; r < n; ++r) {
        const auto* s = std::get_if<std::string>(&train.at(r, c));
        if (s == nullptr) bad_cell(train, r, c);
        auto [it, inserted] = codes.emplace(*s, static_cast<int>(enc.values.size()));
        if (inserted) enc.values.push_back(*s);
        column[r] = it->second;
      }
      state.encodings.emplace(spec.name, std::move(enc));
    } else {
      for (std::size_t r = 0; r < n; ++r) {
        const auto* v = std::get_if<double>(&train.at(r, c));
        if (v == nullptr) bad_cell(train, r, c);
        column[r] = *v;
      }
    }

    auto& sc = state.scaler[c];
    const auto [lo, hi] = std::minmax_element(column.begin(), column.end());
    sc.constant = *lo == *hi;
    sc.mean = std::accumulate(column.begin(), column.end(), 0.0) / static_cast<double>(n);
    if (sc.constant) {
      sc.mean = *lo;
      sc.std = 0.0;
    } else {
      double ss = 0.0;
      for (double v : column) ss += (v - sc.mean) * (v - sc.mean);
      sc.std = std::sqrt(ss / static_cast<double>(n));
    }
  }
  return state;
}

RecordTable apply_preprocess(const RecordTable& table, const PreprocessState& state) {
  if (!(table.schema() == state.schema)) {
    throw Error(ErrorCode::kSchema, "table schema does not match the fitted schema");
  }
  if (state.scaler.size() != table.n_features()) {
    throw Error(ErrorCode::kSchema, "preprocess state has the wrong number of scalers");
  }
  std::vector<const CategoryEncoding*> encoders(table.n_features(), nullptr);
  for (std::size_t c = 0; c < table.n_features(); ++c) {
    const auto& spec = table.schema().feature(c);
    if (spec.dtype != Dtype::kCategorical) continue;
    auto it = state.encodings.find(spec.name);
    if (it == state.encodings.end()) {
      throw Error(ErrorCode::kSchema, "no encoding fitted for " + spec.name);
    }
    encoders[c] = &it->second;
  }

  std::vector<Cell> cells;
  cells.reserve(table.n_rows() * table.n_features());
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    for (std::size_t c = 0; c < table.n_features(); ++c) {
      double raw = 0.0;
      if (encoders[c] != nullptr) {
        const auto* s = std::get_if<std::string>(&table.at(r, c));
        if (s == nullptr) bad_cell(table, r, c);
        raw = encoders[c]->encode(*s);
      } else {
        const auto* v = std::get_if<double>(&table.at(r, c));
        if (v == nullptr) bad_cell(table, r, c);
        raw = *v;
      }
      const auto& sc = state.scaler[c];
      cells.emplace_back(sc.constant ? 0.0 : (raw - sc.mean) / sc.std);
    }
  }
  return RecordTable(table.schema().as_numeric(), std::move(cells), table.labels());
}

SplitResult split(const RecordTable& table, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("split ratio {} not in (0, 1)", ratio));
  }
  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    by_class[code_of(table.label(r))].push_back(r);
  }
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (by_class[c].size() == 1) {
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("class {} has a single sample; stratified split needs at least 2",
                              to_string(category_from_code(static_cast<int>(c)))));
    }
  }

  // floor with a guard so that e.g. 0.7 * 10 counts as 7
  auto quota_floor = [](double q) { return static_cast<std::size_t>(std::floor(q + 1e-9)); };
  const std::size_t n = table.n_rows();
  const std::size_t target = quota_floor(ratio * static_cast<double>(n));

  std::array<std::size_t, kNumClasses> take{};
  std::array<double, kNumClasses> remainder{};
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const double quota = ratio * static_cast<double>(by_class[c].size());
    take[c] = std::min(quota_floor(quota), by_class[c].size());
    remainder[c] = quota - static_cast<double>(take[c]);
    assigned += take[c];
  }
  std::array<std::size_t, kNumClasses> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < target && i < kNumClasses; ++i) {
    if (take[order[i]] < by_class[order[i]].size()) {
      ++take[order[i]];
      ++assigned;
    }
  }

  Rng rng(seed);
  SplitResult result;
  result.seed = seed;
  result.ratio = ratio;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    auto& rows = by_class[c];
    rng.shuffle(std::span<std::size_t>(rows));
    result.train_rows.insert(result.train_rows.end(), rows.begin(), rows.begin() + take[c]);
    result.test_rows.insert(result.test_rows.end(), rows.begin() + take[c], rows.end());
  }
  std::sort(result.train_rows.begin(), result.train_rows.end());
  std::sort(result.test_rows.begin(), result.test_rows.end());
  result.train = table.select_rows(result.train_rows);
  result.test = table.select_rows(result.test_rows);
  return result;
}

void to_json(nlohmann::json& j, const PreprocessState& state) {
  auto encodings = nlohmann::json::object();
  for (const auto& [name, enc] : state.encodings) encodings[name] = enc.values;
  auto scaler = nlohmann::json::array();
  for (std::size_t c = 0; c < state.scaler.size(); ++c) {
    const auto& sc = state.scaler[c];
    scaler.push_back({{"feature", state.schema.feature(c).name},
                      {"mean", sc.mean},
                      {"std", sc.std},
                      {"constant", sc.constant}});
  }
  j = {{"schema", state.schema},
       {"encodings", encodings},
       {"scaler", scaler},
       {"fitted_on", state.fitted_on}};
}

void from_json(const nlohmann::json& j, PreprocessState& state) {
  state.schema = j.at("schema").get<FeatureSchema>();
  state.encodings.clear();
  for (const auto& [name, values] : j.at("encodings").items()) {
    state.encodings[name].values = values.get<std::vector<std::string>>();
  }
  state.scaler.clear();
  const auto& scaler = j.at("scaler");
  if (scaler.size() != state.schema.size()) {
    throw Error(ErrorCode::kSchema, "scaler count does not match schema");
  }
  for (std::size_t c = 0; c < scaler.size(); ++c) {
    const auto& item = scaler[c];
    if (item.at("feature").get<std::string>() != state.schema.feature(c).name) {
      throw Error(ErrorCode::kSchema, "scaler order does not match schema");
    }
    ScalerParams sc;
    sc.mean = item.at("mean").get<double>();
    sc.std = item.at("std").get<double>();
    sc.constant = item.at("constant").get<bool>();
    if (sc.std < 0.0) throw Error(ErrorCode::kSchema, "negative std in preprocess state");
    state.scaler.push_back(sc);
  }
  state.fitted_on = j.at("fitted_on").get<std::size_t>();
}

}  // namespace xids
