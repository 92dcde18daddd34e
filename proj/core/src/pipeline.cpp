#include "xids/pipeline.hpp"

#include <fstream>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "xids/error.hpp"
#include "xids/metrics.hpp"
#include "xids/model_io.hpp"
#include "xids/plot.hpp"
#include "xids/preprocess.hpp"
#include "xids/rng.hpp"
#include "xids/shapley.hpp"

namespace xids {

using nlohmann::json;

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::kConfig:
      return "config";
    case Stage::kGenerate:
      return "generate";
    case Stage::kPreprocess:
      return "preprocess";
    case Stage::kTrain:
      return "train";
    case Stage::kEvaluate:
      return "evaluate";
    case Stage::kExplain:
      return "explain";
    case Stage::kPlot:
      return "plot";
  }
  return "?";
}

int exit_code(Stage stage) {
  switch (stage) {
    case Stage::kConfig:
      return 2;
    case Stage::kGenerate:
      return 10;
    case Stage::kPreprocess:
      return 11;
    case Stage::kTrain:
      return 12;
    case Stage::kEvaluate:
      return 13;
    case Stage::kExplain:
      return 14;
    case Stage::kPlot:
      return 15;
  }
  return 1;
}

std::uint64_t stage_seed(std::uint64_t master, SeedStream stream) {
  return derive_seed(master, static_cast<std::uint64_t>(stream));
}

void RunConfig::validate() const {
  if (input_path.has_value() == generator.has_value()) {
    throw StageError(Stage::kConfig, "exactly one of 'input' and 'generator' must be set");
  }
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) {
    throw StageError(Stage::kConfig, "split_ratio must be in (0, 1)");
  }
  if (output_dir.empty()) throw StageError(Stage::kConfig, "output_dir is empty");
  if (run_id.empty() || run_id.find_first_of("/\\") != std::string::npos) {
    throw StageError(Stage::kConfig, "run_id must be a plain file-name fragment");
  }
  if (top_k < 1) throw StageError(Stage::kConfig, "top_k must be >= 1");
  if (plot_width <= 0 || plot_height <= 0) {
    throw StageError(Stage::kConfig, "plot dimensions must be positive");
  }
  try {
    effective_params().validate();
    if (generator) generator->validate();
  } catch (const Error& e) {
    throw StageError(Stage::kConfig, e.what());
  }
}

TrainParams RunConfig::effective_params() const {
  return params ? *params : TrainParams::defaults_for(model);
}

FeatureSchema RunConfig::schema() const {
  return schema_path ? load_schema(*schema_path) : ehms_schema();
}

void to_json(json& j, const RunConfig& c) {
  j = {{"input", nullptr},
       {"generator", nullptr},
       {"schema", nullptr},
       {"split_ratio", c.split_ratio},
       {"seed", c.seed},
       {"model", std::string(to_string(c.model))},
       {"params", c.effective_params()},
       {"output_dir", c.output_dir},
       {"run_id", c.run_id},
       {"explain_cap", c.explain_cap},
       {"top_k", c.top_k},
       {"plot_width", c.plot_width},
       {"plot_height", c.plot_height}};
  if (c.input_path) j["input"] = *c.input_path;
  if (c.generator) j["generator"] = *c.generator;
  if (c.schema_path) j["schema"] = *c.schema_path;
}

void from_json(const json& j, RunConfig& c) {
  const RunConfig d;
  c.input_path.reset();
  c.generator.reset();
  c.schema_path.reset();
  if (auto it = j.find("input"); it != j.end() && !it->is_null()) c.input_path = it->get<std::string>();
  if (auto it = j.find("generator"); it != j.end() && !it->is_null()) {
    c.generator = it->get<GenConfig>();
  }
  if (auto it = j.find("schema"); it != j.end() && !it->is_null()) c.schema_path = it->get<std::string>();
  c.split_ratio = j.value("split_ratio", d.split_ratio);
  c.seed = j.value("seed", d.seed);
  c.model = parse_model_kind(j.value("model", std::string(to_string(d.model))));
  c.params.reset();
  if (auto it = j.find("params"); it != j.end() && !it->is_null()) {
    // fields not given fall back to the model's defaults
    json merged = TrainParams::defaults_for(c.model);
    merged.update(*it);
    c.params = merged.get<TrainParams>();
  }
  c.output_dir = j.value("output_dir", d.output_dir);
  c.run_id = j.value("run_id", d.run_id);
  c.explain_cap = j.value("explain_cap", d.explain_cap);
  c.top_k = j.value("top_k", d.top_k);
  c.plot_width = j.value("plot_width", d.plot_width);
  c.plot_height = j.value("plot_height", d.plot_height);
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StageError(Stage::kConfig, "cannot open config file: " + path);
  try {
    return json::parse(in).get<RunConfig>();
  } catch (const json::exception& e) {
    throw StageError(Stage::kConfig, fmt::format("malformed config {}: {}", path, e.what()));
  } catch (const Error& e) {
    throw StageError(Stage::kConfig, e.what());
  }
}

std::string config_hash(const json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : config.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

std::string plot_file_name(const std::string& run_id, const std::string& plot,
                           const std::string& klass) {
  return fmt::format("{}.{}.{}.svg", run_id, plot, klass);
}

namespace {

template <typename Fn>
void tagged(Stage stage, Fn&& fn) {
  try {
    fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

fs::path require(const fs::path& dir, const char* name) {
  fs::path p = dir / name;
  if (!fs::exists(p)) {
    throw Error(ErrorCode::kIo, fmt::format("missing upstream artifact: expected {}", p.string()));
  }
  return p;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, fmt::format("cannot parse {}: {}", path.string(), e.what()));
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorCode::kIo, "cannot create output directory " + dir.string());
  }
}

RecordTable load_stage_table(const fs::path& dir, const char* name) {
  const auto schema = load_schema(require(dir, artifacts::kSchema).string());
  return load_csv(require(dir, name).string(), schema);
}

json class_counts(const RecordTable& t) {
  std::array<std::size_t, kNumClasses> counts{};
  for (auto c : t.labels()) ++counts[code_of(c)];
  json j = json::object();
  for (auto c : kAllCategories) j[std::string(to_string(c))] = counts[code_of(c)];
  return j;
}

}  // namespace

void stage_generate(const GenConfig& config, const fs::path& dir) {
  tagged(Stage::kGenerate, [&] {
    ensure_dir(dir);
    const auto table = generate(config);
    write_csv(table, (dir / artifacts::kData).string());
    const json cfg = config;
    write_json(dir / artifacts::kGenerateManifest, {{"stage", "generate"},
                                                    {"seed", config.seed},
                                                    {"config", cfg},
                                                    {"config_hash", config_hash(cfg)},
                                                    {"rows", table.n_rows()},
                                                    {"class_counts", class_counts(table)}});
    spdlog::info("generate: wrote {} rows to {}", table.n_rows(), (dir / artifacts::kData).string());
  });
}

void stage_preprocess(const fs::path& input_csv, const FeatureSchema& schema, double ratio,
                      std::uint64_t master_seed, const fs::path& dir) {
  tagged(Stage::kPreprocess, [&] {
    ensure_dir(dir);
    if (!fs::exists(input_csv)) {
      throw Error(ErrorCode::kIo, "missing input: expected " + input_csv.string());
    }
    const auto raw = load_csv(input_csv.string(), schema);
    const auto cleaned = clean(raw);
    spdlog::info("preprocess: {} raw rows, {} after cleaning", raw.n_rows(), cleaned.n_rows());
    const auto parts = split(cleaned, ratio, stage_seed(master_seed, SeedStream::kSplit));
    const auto state = fit_preprocess(parts.train);
    save_schema(state.schema.as_numeric(), (dir / artifacts::kSchema).string());
    write_json(dir / artifacts::kPreprocessState, state);
    write_csv(apply_preprocess(parts.train, state), (dir / artifacts::kTrain).string());
    write_csv(apply_preprocess(parts.test, state), (dir / artifacts::kTest).string());
  });
}

void stage_train(const fs::path& dir, ModelKind kind, TrainParams params,
                 std::uint64_t master_seed) {
  tagged(Stage::kTrain, [&] {
    const auto train = to_dataset(load_stage_table(dir, artifacts::kTrain));
    params.seed = stage_seed(master_seed, SeedStream::kTrain);
    const auto model = train_model(kind, train, params);
    save_model(model, (dir / artifacts::kModel).string());
    spdlog::info("train: {} model on {} rows", to_string(kind), train.n_rows());
  });
}

void stage_evaluate(const fs::path& dir) {
  tagged(Stage::kEvaluate, [&] {
    const auto test = to_dataset(load_stage_table(dir, artifacts::kTest));
    const auto model = load_model(require(dir, artifacts::kModel).string());
    std::vector<AttackCategory> truth, pred;
    for (std::size_t i = 0; i < test.n_rows(); ++i) {
      truth.push_back(category_from_code(test.y[i]));
      pred.push_back(argmax_category(predict_margin(model, test.x.row(i))));
    }
    const auto rep = report(confusion(truth, pred));
    write_json(dir / artifacts::kMetricsJson, rep);
    write_text(dir / artifacts::kMetricsText, render_text(rep));
    write_text(dir / artifacts::kConfusion, confusion_csv(rep.matrix));
  });
}

void stage_explain(const fs::path& dir, std::size_t cap, std::uint64_t master_seed) {
  tagged(Stage::kExplain, [&] {
    const auto test = to_dataset(load_stage_table(dir, artifacts::kTest));
    const auto model = load_model(require(dir, artifacts::kModel).string());
    if (std::holds_alternative<LinearModel>(model)) {
      throw Error(ErrorCode::kInvalidArgument, "tree attribution needs a tree or ensemble model");
    }

    std::vector<std::size_t> rows(test.n_rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    if (cap > 0 && cap < rows.size()) {
      Rng rng(stage_seed(master_seed, SeedStream::kExplainSample));
      rng.shuffle(std::span<std::size_t>(rows));
      rows.resize(cap);
      std::sort(rows.begin(), rows.end());
    }
    Matrix x(rows.size(), test.n_features());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      auto src = test.x.row(rows[i]);
      std::copy(src.begin(), src.end(), x.row(i).begin());
    }

    ShapExplanation expl = std::visit(
        [&](const auto& m) -> ShapExplanation {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, LinearModel>) {
            throw Error(ErrorCode::kInvalidArgument, "unreachable");
          } else {
            return tree_shap(m, x, test.feature_names);
          }
        },
        model);
    expl.sample_ids = rows;
    write_text(dir / artifacts::kExplanationCsv, explanation_csv(expl));
    write_text(dir / artifacts::kExplanationJson, explanation_json(expl).dump() + "\n");
    write_text(dir / artifacts::kSummary, summary_csv(summarize(expl, expl.n_features)));
    spdlog::info("explain: {} samples x {} features", expl.n_samples, expl.n_features);
  });
}

void stage_plot(const fs::path& dir, const std::string& run_id, std::size_t top_k, int width,
                int height, std::uint64_t master_seed) {
  tagged(Stage::kPlot, [&] {
    const auto expl = explanation_from_json(read_json(require(dir, artifacts::kExplanationJson)));
    PlotSpec spec;
    spec.top_k = top_k;
    spec.width = width;
    spec.height = height;
    spec.jitter_seed = stage_seed(master_seed, SeedStream::kPlotJitter);

    spec.title = "Mean |Shapley value| by class";
    const auto summary = summarize(expl, top_k);
    write_text(dir / plot_file_name(run_id, "bar", "all"), render_bar(summary, spec));
    for (auto c : kAllCategories) {
      spec.title = fmt::format("Shapley values: {}", to_string(c));
      write_text(dir / plot_file_name(run_id, "beeswarm", std::string(to_string(c))),
                 render_beeswarm(expl, c, spec));
    }
  });
}

void run_pipeline(const RunConfig& config) {
  config.validate();
  const fs::path dir = config.output_dir;
  tagged(Stage::kConfig, [&] { ensure_dir(dir); });
  fs::remove(dir / artifacts::kFailed);

  const json cfg = config;
  const std::uint64_t master = config.seed;
  try {
    fs::path input;
    if (config.generator) {
      GenConfig gen = *config.generator;
      gen.seed = stage_seed(master, SeedStream::kGenerate);
      stage_generate(gen, dir);
      input = dir / artifacts::kData;
    } else {
      input = *config.input_path;
    }
    FeatureSchema schema;
    tagged(Stage::kPreprocess, [&] { schema = config.schema(); });
    stage_preprocess(input, schema, config.split_ratio, master, dir);
    stage_train(dir, config.model, config.effective_params(), master);
    stage_evaluate(dir);
    const bool explainable = config.model != ModelKind::kLinearSvc;
    if (explainable) {
      stage_explain(dir, config.explain_cap, master);
      stage_plot(dir, config.run_id, config.top_k, config.plot_width, config.plot_height, master);
    } else {
      spdlog::info("pipeline: linear model, skipping explain and plot");
    }

    json seeds = {{"master", master},
                  {"split", stage_seed(master, SeedStream::kSplit)},
                  {"train", stage_seed(master, SeedStream::kTrain)}};
    if (config.generator) seeds["generate"] = stage_seed(master, SeedStream::kGenerate);
    if (explainable) {
      seeds["explain_sample"] = stage_seed(master, SeedStream::kExplainSample);
      seeds["plot_jitter"] = stage_seed(master, SeedStream::kPlotJitter);
    }
    const json metrics = read_json(dir / artifacts::kMetricsJson);
    tagged(Stage::kConfig, [&] {
      write_json(dir / artifacts::kManifest, {{"status", "ok"},
                                              {"config", cfg},
                                              {"config_hash", config_hash(cfg)},
                                              {"seeds", seeds},
                                              {"accuracy", metrics.at("accuracy")}});
    });
  } catch (const StageError& e) {
    std::ofstream marker(dir / artifacts::kFailed);
    marker << "stage: " << to_string(e.stage()) << "\n" << e.what() << "\n";
    throw;
  }
}

}  // namespace xids
