#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "cfdetect/classify.hpp"
#include "cfdetect/corpus.hpp"
#include "cfdetect/crf.hpp"
#include "cfdetect/pipeline.hpp"
#include "cfdetect/textprep.hpp"

namespace cfd::cli {

enum class Task { Task1, Task2 };

// Settings of one run. Loaded from a JSON file (relative paths resolve
// against the file's directory), then overridden by command-line flags.
struct RunConfig {
  Task task = Task::Task1;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  std::filesystem::path input;
  std::filesystem::path output;
  std::filesystem::path model_dir;
  std::filesystem::path report;

  std::string cleaning_preset = "cleaning";
  std::optional<CleaningProfile> cleaning;  // explicit flags win over the preset
  std::filesystem::path stopwords;

  VectorizerConfig vectorizer;

  Algorithm algorithm = Algorithm::SVM;
  std::map<std::string, std::string> classifier_params;

  FeatureTemplateSet templates;
  TrainConfig crf;

  SplitSpec split;
  std::size_t cv_k = 3;

  CleaningProfile cleaning_profile() const;
  StopwordSet stopword_set() const;
  // Classifier parameters with the run seed filled in when not given.
  ClassifierSpec classifier_spec() const;
  TrainConfig crf_config() const;
};

RunConfig load_run_config(const std::filesystem::path& path);
Task parse_task(std::string_view name);

// Throws IoError when `p` is not an existing regular file.
void require_input(const std::filesystem::path& p, std::string_view what);

}  // namespace cfd::cli
