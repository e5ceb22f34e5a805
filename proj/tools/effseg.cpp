// effseg command-line front end.

#include "effseg/commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>

namespace {

effseg::RunConfig load_config(const std::string& path, const std::optional<std::uint64_t>& seed,
                              const std::optional<std::string>& preset, const std::optional<int>& count) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  if (!path.empty()) {
    try {
      j = nlohmann::ordered_json::parse(effseg::read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
      throw std::invalid_argument(path + ": invalid JSON: " + e.what());
    }
  }
  if (seed) j["seed"] = *seed;
  if (preset) j["preset"] = *preset;
  if (count) j["count"] = *count;
  return effseg::parse_run_config(j.dump());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pleural effusion segmentation on synthetic ultrasound phantoms"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "global seed (overrides the config)");
  app.add_option("--out", out, "output directory")->capture_default_str();

  auto* phantom = app.add_subcommand("phantom", "generate a synthetic dataset");
  std::optional<std::string> preset;
  std::optional<int> count;
  phantom->add_option("--preset", preset, "A (linear, 51), B (curved, 92) or gated (100)")
      ->check(CLI::IsMember({"A", "B", "gated"}));
  phantom->add_option("--count", count, "number of samples (default: preset size)")->check(CLI::PositiveNumber);

  auto* preprocess = app.add_subcommand("preprocess", "mask, remove annotation crosses, crop and pad");
  std::string pre_in;
  preprocess->add_option("input", pre_in, "dataset directory")->required()->check(CLI::ExistingDirectory);

  auto* train = app.add_subcommand("train", "train one cross-validation fold");
  std::string train_data;
  bool coordconv = false;
  int fold = 0;
  train->add_option("dataset", train_data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  train->add_flag("--coordconv", coordconv, "append coordinate channels to the input");
  train->add_option("--fold", fold, "held-out fold index")->capture_default_str();

  auto* cv = app.add_subcommand("cv", "cross-validate baseline and coordconv variants");
  std::string cv_data;
  cv->add_option("dataset", cv_data, "dataset directory")->required()->check(CLI::ExistingDirectory);

  auto* report = app.add_subcommand("report", "re-render the report from metrics CSVs");
  std::vector<std::string> metrics;
  report->add_option("metrics", metrics, "metrics.csv files")->required()->check(CLI::ExistingFile);

  for (auto* sub : {phantom, preprocess, train, cv, report}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? effseg::kExitOk : effseg::kExitUsage;
  }

  try {
    const effseg::RunConfig cfg = load_config(config_path, seed, preset, count);
    if (phantom->parsed()) return effseg::cmd_phantom(cfg, out, std::cout);
    if (preprocess->parsed()) return effseg::cmd_preprocess(pre_in, out, cfg, std::cout);
    if (train->parsed()) return effseg::cmd_train(train_data, cfg, coordconv, fold, out, std::cout);
    if (cv->parsed()) return effseg::cmd_cv(cv_data, cfg, out, std::cout);
    if (report->parsed()) {
      std::vector<effseg::fs::path> paths(metrics.begin(), metrics.end());
      return effseg::cmd_report(paths, cfg, out, std::cout);
    }
  } catch (const effseg::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return effseg::kExitNumeric;
  } catch (const effseg::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return effseg::kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return effseg::kExitUsage;
  } catch (const std::out_of_range& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return effseg::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return effseg::kExitData;
  }
  return effseg::kExitUsage;
}
