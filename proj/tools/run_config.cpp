#include "run_config.hpp"

#include <set>

#include "cfdetect/error.hpp"
#include "cfdetect/io.hpp"
#include "json.hpp"

namespace cfd::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ValidationError("config: '" + where + "' must be an object");
  for (const auto& [k, _] : obj.items())
    if (!allowed.count(k)) throw ValidationError("config: unknown key '" + k + "' in " + where);
}

std::string scalar_text(const json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_float()) return io::format_double(v.get<double>());
  if (v.is_boolean()) return v.get<bool>() ? "1" : "0";
  throw ValidationError("config: parameter '" + key + "' must be a string, number or boolean");
}

template <typename T>
T get(const json& obj, const char* key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError("config: '" + where + "." + key + "' has the wrong type");
  }
}

fs::path resolve(const fs::path& base, const json& v, const std::string& key) {
  if (!v.is_string()) throw ValidationError("config: '" + key + "' must be a path string");
  fs::path p = v.get<std::string>();
  if (p.empty() || p.is_absolute()) return p;
  return base / p;
}

}  // namespace

Task parse_task(std::string_view name) {
  if (name == "task1") return Task::Task1;
  if (name == "task2") return Task::Task2;
  throw ValidationError("unknown task '" + std::string(name) + "' (expected task1 or task2)");
}

void require_input(const fs::path& p, std::string_view what) {
  if (p.empty()) throw ValidationError(std::string(what) + " is required");
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) throw IoError(std::string(what) + " not found: " + p.string());
}

CleaningProfile RunConfig::cleaning_profile() const {
  auto p = cleaning ? *cleaning : CleaningProfile::preset(cleaning_preset);
  p.validate();
  return p;
}

StopwordSet RunConfig::stopword_set() const {
  if (stopwords.empty()) return StopwordSet::english();
  require_input(stopwords, "stopword file");
  return StopwordSet::load(stopwords);
}

ClassifierSpec RunConfig::classifier_spec() const {
  auto params = classifier_params;
  auto defaults = ClassifierSpec::with_defaults(algorithm);
  if (defaults.params.count("seed") && !params.count("seed")) params["seed"] = std::to_string(seed);
  return ClassifierSpec::with_defaults(algorithm, params);
}

TrainConfig RunConfig::crf_config() const {
  TrainConfig c = crf;
  c.seed = seed;
  c.jobs = jobs;
  c.validate();
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  require_input(path, "config file");
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError("config: " + path.string() + " is not valid JSON (" + e.what() + ")");
  }
  check_keys(j, {"task", "seed", "jobs", "input", "output", "model_dir", "report", "cleaning", "stopwords",
                 "vectorizer", "classifier", "crf", "split", "cv"},
             "config");
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  RunConfig c;
  if (j.contains("task")) c.task = parse_task(get<std::string>(j, "task", "config"));
  if (j.contains("seed")) c.seed = get<std::uint64_t>(j, "seed", "config");
  if (j.contains("jobs")) c.jobs = get<std::size_t>(j, "jobs", "config");
  if (c.jobs < 1) throw ValidationError("config: jobs must be >= 1");
  for (const char* key : {"input", "output", "model_dir", "report", "stopwords"}) {
    if (!j.contains(key)) continue;
    const auto p = resolve(base, j.at(key), key);
    if (std::string(key) == "input") c.input = p;
    else if (std::string(key) == "output") c.output = p;
    else if (std::string(key) == "model_dir") c.model_dir = p;
    else if (std::string(key) == "report") c.report = p;
    else c.stopwords = p;
  }

  if (j.contains("cleaning")) {
    const auto& cl = j.at("cleaning");
    if (cl.is_string()) {
      c.cleaning_preset = cl.get<std::string>();
      CleaningProfile::preset(c.cleaning_preset);
    } else {
      check_keys(cl, {"preset", "lowercase", "strip_numbers", "strip_punct", "expand_contractions", "split_compounds",
                      "drop_single_char_tokens", "remove_stopwords", "stem", "collapse_whitespace"},
                 "cleaning");
      auto p = CleaningProfile::preset(cl.contains("preset") ? get<std::string>(cl, "preset", "cleaning") : "none");
      auto flag = [&](const char* key, bool& field) {
        if (cl.contains(key)) field = get<bool>(cl, key, "cleaning");
      };
      flag("lowercase", p.lowercase);
      flag("strip_numbers", p.strip_numbers);
      flag("strip_punct", p.strip_punct);
      flag("expand_contractions", p.expand_contractions);
      flag("split_compounds", p.split_compounds);
      flag("drop_single_char_tokens", p.drop_single_char_tokens);
      flag("remove_stopwords", p.remove_stopwords);
      flag("stem", p.stem);
      flag("collapse_whitespace", p.collapse_whitespace);
      p.validate();
      c.cleaning = p;
    }
  }

  if (j.contains("vectorizer")) {
    const auto& v = j.at("vectorizer");
    check_keys(v, {"kind", "min_freq", "embeddings", "tagger_model", "patterns"}, "vectorizer");
    if (v.contains("kind")) c.vectorizer.kind = parse_vectorizer(get<std::string>(v, "kind", "vectorizer"));
    if (v.contains("min_freq")) c.vectorizer.min_freq = get<std::size_t>(v, "min_freq", "vectorizer");
    if (v.contains("embeddings")) c.vectorizer.embeddings = resolve(base, v.at("embeddings"), "vectorizer.embeddings");
    if (v.contains("tagger_model"))
      c.vectorizer.tagger_model = resolve(base, v.at("tagger_model"), "vectorizer.tagger_model");
    if (v.contains("patterns")) c.vectorizer.patterns = resolve(base, v.at("patterns"), "vectorizer.patterns");
  }

  if (j.contains("classifier")) {
    const auto& cl = j.at("classifier");
    check_keys(cl, {"algorithm", "params"}, "classifier");
    if (cl.contains("algorithm")) c.algorithm = parse_algorithm(get<std::string>(cl, "algorithm", "classifier"));
    if (cl.contains("params")) {
      const auto& ps = cl.at("params");
      check_keys(ps, {"alpha", "l1_ratio", "learning_rate", "epochs", "seed", "C", "n_neighbors", "criterion",
                      "max_depth", "min_samples_split", "max_features", "n_trees", "bootstrap", "hidden_units",
                      "batch_size", "l2"},
                 "classifier.params");
      for (const auto& [k, val] : ps.items()) c.classifier_params[k] = scalar_text(val, k);
    }
  }

  if (j.contains("crf")) {
    const auto& cr = j.at("crf");
    check_keys(cr, {"templates", "epochs", "learning_rate", "l2", "optimizer"}, "crf");
    if (cr.contains("templates")) {
      const auto& t = cr.at("templates");
      if (t.is_string()) {
        c.templates = FeatureTemplateSet::parse(t.get<std::string>());
      } else {
        check_keys(t, {"token", "lower_token", "pos", "ner", "prev_next_token", "prev_next_pos", "window"},
                   "crf.templates");
        std::string spec;
        for (const auto& [k, val] : t.items()) spec += k + "=" + scalar_text(val, k) + " ";
        c.templates = FeatureTemplateSet::parse(spec);
      }
    }
    if (cr.contains("epochs")) c.crf.epochs = get<int>(cr, "epochs", "crf");
    if (cr.contains("learning_rate")) c.crf.learning_rate = get<double>(cr, "learning_rate", "crf");
    if (cr.contains("l2")) c.crf.l2 = get<double>(cr, "l2", "crf");
    if (cr.contains("optimizer")) c.crf.optimizer = parse_optimizer(get<std::string>(cr, "optimizer", "crf"));
    c.crf.validate();
  }

  if (j.contains("split")) {
    const auto& s = j.at("split");
    check_keys(s, {"train", "valid", "test"}, "split");
    if (s.contains("train")) c.split.train_fraction = get<double>(s, "train", "split");
    if (s.contains("valid")) c.split.valid_fraction = get<double>(s, "valid", "split");
    if (s.contains("test")) c.split.test_fraction = get<double>(s, "test", "split");
    c.split.validate();
  }

  if (j.contains("cv")) {
    const auto& cv = j.at("cv");
    check_keys(cv, {"k"}, "cv");
    if (cv.contains("k")) c.cv_k = get<std::size_t>(cv, "k", "cv");
  }
  return c;
}

}  // namespace cfd::cli
