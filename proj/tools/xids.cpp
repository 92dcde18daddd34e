// Command-line entry point. Every subcommand resolves the same RunConfig
// (from --config, then flag overrides), so running the stage commands in
// order reproduces `xids pipeline` exactly.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "xids/error.hpp"
#include "xids/pipeline.hpp"

namespace {

using namespace xids;

struct Overrides {
  std::string config_path;
  std::optional<std::string> input;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> model;
  std::optional<double> ratio;
  std::optional<std::size_t> top_k;
  std::optional<std::size_t> explain_cap;
  std::optional<std::size_t> n_samples;
  std::string format = "text";
  bool verbose = false;
  bool quiet = false;
};

RunConfig resolve(const Overrides& o) {
  RunConfig c;
  if (!o.config_path.empty()) {
    c = load_run_config(o.config_path);
  } else {
    c.generator = GenConfig::defaults();
  }
  if (o.input) {
    c.input_path = *o.input;
    c.generator.reset();
  }
  if (o.out) c.output_dir = *o.out;
  if (o.seed) c.seed = *o.seed;
  if (o.model) {
    ModelKind kind;
    try {
      kind = parse_model_kind(*o.model);
    } catch (const Error& e) {
      throw StageError(Stage::kConfig, e.what());
    }
    if (kind != c.model) {
      c.model = kind;
      c.params.reset();
    }
  }
  if (o.ratio) c.split_ratio = *o.ratio;
  if (o.top_k) c.top_k = *o.top_k;
  if (o.explain_cap) c.explain_cap = *o.explain_cap;
  if (o.n_samples) {
    if (!c.generator) throw StageError(Stage::kConfig, "--n-samples needs a generator config");
    c.generator->n_samples = *o.n_samples;
  }
  c.validate();
  return c;
}

void print_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::cout << in.rdbuf();
}

void cmd_generate(const RunConfig& c) {
  if (!c.generator) throw StageError(Stage::kConfig, "generate needs a generator config");
  GenConfig gen = *c.generator;
  gen.seed = stage_seed(c.seed, SeedStream::kGenerate);
  stage_generate(gen, c.output_dir);
}

void cmd_preprocess(const RunConfig& c) {
  const fs::path dir = c.output_dir;
  const fs::path input = c.input_path ? fs::path(*c.input_path) : dir / artifacts::kData;
  FeatureSchema schema;
  try {
    schema = c.schema();
  } catch (const std::exception& e) {
    throw StageError(Stage::kPreprocess, e.what());
  }
  stage_preprocess(input, schema, c.split_ratio, c.seed, dir);
}

void cmd_evaluate(const RunConfig& c, const std::string& format) {
  stage_evaluate(c.output_dir);
  const fs::path dir = c.output_dir;
  if (format == "json") {
    print_file(dir / artifacts::kMetricsJson);
  } else if (format == "csv") {
    print_file(dir / artifacts::kConfusion);
  } else {
    print_file(dir / artifacts::kMetricsText);
  }
}

void cmd_explain(const RunConfig& c, const std::string& format) {
  stage_explain(c.output_dir, c.explain_cap, c.seed);
  const fs::path dir = c.output_dir;
  if (format == "json") {
    print_file(dir / artifacts::kExplanationJson);
  } else if (format == "csv") {
    print_file(dir / artifacts::kSummary);
  }
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("xids");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");

  CLI::App app{"Explainable intrusion detection for IoMT records"};
  app.require_subcommand(1);
  Overrides o;

  auto add_common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "Run configuration (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "Run directory");
    sub->add_option("--seed", o.seed, "Master seed");
    sub->add_flag("-v,--verbose", o.verbose, "Debug logging");
    sub->add_flag("-q,--quiet", o.quiet, "Only log warnings and errors");
  };
  auto add_format = [&o](CLI::App* sub) {
    sub->add_option("--format", o.format, "Output printed to stdout")
        ->check(CLI::IsMember({"text", "csv", "json"}));
  };

  auto* gen = app.add_subcommand("generate", "Write a synthetic EHMS-shaped CSV");
  add_common(gen);
  gen->add_option("--n-samples", o.n_samples, "Rows to generate");

  auto* pre = app.add_subcommand("preprocess", "Clean, split and standardize");
  add_common(pre);
  pre->add_option("--input", o.input, "Raw CSV (default: generated data.csv)");
  pre->add_option("--ratio", o.ratio, "Training fraction");

  auto* train = app.add_subcommand("train", "Fit a classifier on train.csv");
  add_common(train);
  train->add_option("--model", o.model, "Model kind")->check(CLI::IsMember({"dt", "rf", "gbt", "svc"}));

  auto* eval = app.add_subcommand("evaluate", "Score the model on test.csv");
  add_common(eval);
  add_format(eval);

  auto* explain = app.add_subcommand("explain", "Tree attributions for test rows");
  add_common(explain);
  add_format(explain);
  explain->add_option("--cap", o.explain_cap, "Rows to explain (0: all)");

  auto* plot = app.add_subcommand("plot", "Render the bar and beeswarm SVGs");
  add_common(plot);
  plot->add_option("--top-k", o.top_k, "Features shown");

  auto* pipe = app.add_subcommand("pipeline", "Run every stage");
  add_common(pipe);
  pipe->add_option("--input", o.input, "Raw CSV instead of the generator");
  pipe->add_option("--model", o.model, "Model kind")->check(CLI::IsMember({"dt", "rf", "gbt", "svc"}));
  pipe->add_option("--ratio", o.ratio, "Training fraction");
  pipe->add_option("--top-k", o.top_k, "Features shown");
  pipe->add_option("--cap", o.explain_cap, "Rows to explain (0: all)");
  pipe->add_option("--n-samples", o.n_samples, "Rows to generate");

  CLI11_PARSE(app, argc, argv);
  if (o.verbose) spdlog::set_level(spdlog::level::debug);
  if (o.quiet) spdlog::set_level(spdlog::level::warn);

  try {
    const RunConfig c = resolve(o);
    if (gen->parsed()) {
      cmd_generate(c);
    } else if (pre->parsed()) {
      cmd_preprocess(c);
    } else if (train->parsed()) {
      stage_train(c.output_dir, c.model, c.effective_params(), c.seed);
    } else if (eval->parsed()) {
      cmd_evaluate(c, o.format);
    } else if (explain->parsed()) {
      cmd_explain(c, o.format);
    } else if (plot->parsed()) {
      stage_plot(c.output_dir, c.run_id, c.top_k, c.plot_width, c.plot_height, c.seed);
    } else if (pipe->parsed()) {
      run_pipeline(c);
    }
  } catch (const StageError& e) {
    spdlog::error("{}", e.what());
    return exit_code(e.stage());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
