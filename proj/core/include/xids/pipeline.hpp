#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "xids/schema.hpp"
#include "xids/synth.hpp"
#include "xids/train.hpp"

namespace xids {

enum class Stage { kConfig, kGenerate, kPreprocess, kTrain, kEvaluate, kExplain, kPlot };

std::string_view to_string(Stage stage);

/// Process exit code used when the stage fails.
int exit_code(Stage stage);

/// A failure tagged with the pipeline stage it happened in.
class StageError : public std::runtime_error {
 public:
  StageError(Stage stage, const std::string& what)
      : std::runtime_error(std::string(to_string(stage)) + ": " + what), stage_(stage) {}
  Stage stage() const { return stage_; }

 private:
  Stage stage_;
};

/// Stream tags for derive_seed(master_seed, tag).
enum class SeedStream : std::uint64_t {
  kGenerate = 1,
  kSplit = 2,
  kTrain = 3,
  kExplainSample = 4,
  kPlotJitter = 5,
};

std::uint64_t stage_seed(std::uint64_t master, SeedStream stream);

struct RunConfig {
  std::optional<std::string> input_path;
  std::optional<GenConfig> generator;
  std::optional<std::string> schema_path;  // default: ehms_schema()
  double split_ratio = 0.8;
  std::uint64_t seed = 7;
  ModelKind model = ModelKind::kGradientBoosted;
  std::optional<TrainParams> params;  // default: TrainParams::defaults_for(model)
  std::string output_dir = "run";
  std::string run_id = "run";
  std::size_t explain_cap = 2000;  // 0: explain every test row
  std::size_t top_k = 10;
  int plot_width = 800;
  int plot_height = 500;

  void validate() const;
  TrainParams effective_params() const;
  FeatureSchema schema() const;
};

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);
RunConfig load_run_config(const std::string& path);

/// 64-bit FNV-1a of the canonical JSON form, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

/// File names inside a run directory.
namespace artifacts {
inline constexpr const char* kData = "data.csv";
inline constexpr const char* kGenerateManifest = "generate_manifest.json";
inline constexpr const char* kSchema = "schema.json";
inline constexpr const char* kPreprocessState = "preprocess_state.json";
inline constexpr const char* kTrain = "train.csv";
inline constexpr const char* kTest = "test.csv";
inline constexpr const char* kModel = "model.json";
inline constexpr const char* kMetricsJson = "metrics.json";
inline constexpr const char* kMetricsText = "metrics.txt";
inline constexpr const char* kConfusion = "confusion.csv";
inline constexpr const char* kExplanationCsv = "explanation.csv";
inline constexpr const char* kExplanationJson = "explanation.json";
inline constexpr const char* kSummary = "summary.csv";
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kFailed = "FAILED";
}  // namespace artifacts

/// {run_id}.{plot}.{class}.svg, class "all" for the stacked bar chart.
std::string plot_file_name(const std::string& run_id, const std::string& plot,
                           const std::string& klass);

namespace fs = std::filesystem;

/// Each stage reads the previous stage's files from `dir` and writes its
/// own there, so any stage can be rerun on its own.
void stage_generate(const GenConfig& config, const fs::path& dir);
void stage_preprocess(const fs::path& input_csv, const FeatureSchema& schema, double ratio,
                      std::uint64_t master_seed, const fs::path& dir);
void stage_train(const fs::path& dir, ModelKind kind, TrainParams params,
                 std::uint64_t master_seed);
void stage_evaluate(const fs::path& dir);
void stage_explain(const fs::path& dir, std::size_t cap, std::uint64_t master_seed);
void stage_plot(const fs::path& dir, const std::string& run_id, std::size_t top_k, int width,
                int height, std::uint64_t master_seed);

/// Runs every stage into config.output_dir and writes manifest.json.
/// On failure writes a FAILED marker naming the stage and rethrows as
/// StageError; partial outputs are left in place.
void run_pipeline(const RunConfig& config);

}  // namespace xids
