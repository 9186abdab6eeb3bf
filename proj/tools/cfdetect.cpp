// cfdetect: counterfactual detection and antecedent/consequent extraction.
//
// Exit codes: 0 success, 1 invalid input or configuration, 2 I/O failure.

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cfdetect/classify.hpp"
#include "cfdetect/corpus.hpp"
#include "cfdetect/crf.hpp"
#include "cfdetect/csv.hpp"
#include "cfdetect/error.hpp"
#include "cfdetect/eval.hpp"
#include "cfdetect/grammar.hpp"
#include "cfdetect/io.hpp"
#include "cfdetect/pipeline.hpp"
#include "cfdetect/tagger.hpp"
#include "cfdetect/textprep.hpp"
#include "cfdetect/vectorize.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using namespace cfd;
using cli::RunConfig;
using cli::Task;

namespace {

void log(const std::string& msg) { std::cerr << "cfdetect: " << msg << "\n"; }

struct CommonOptions {
  std::string config;
  std::string task;
  std::string seed;
  std::string jobs;
  std::string input;
  std::string output;
  std::string model_dir;
  std::string report;
  bool dry_run = false;
};

void add_common(CLI::App* sub, CommonOptions& o) {
  sub->add_option("--config", o.config, "JSON run configuration");
  sub->add_option("--task", o.task, "task1 (detection) or task2 (extraction)");
  sub->add_option("--seed", o.seed, "Seed for every random choice");
  sub->add_option("--jobs", o.jobs, "Worker threads");
  sub->add_option("-i,--input", o.input, "Input file");
  sub->add_option("-o,--output", o.output, "Output file (standard output when omitted)");
  sub->add_option("--model-dir", o.model_dir, "Model directory");
  sub->add_option("--report", o.report, "Write the evaluation report as JSON");
  sub->add_flag("--dry-run", o.dry_run, "Validate inputs and configuration, write nothing");
}

RunConfig resolve_config(const CommonOptions& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : cli::load_run_config(o.config);
  if (!o.task.empty()) c.task = cli::parse_task(o.task);
  try {
    if (!o.seed.empty()) c.seed = static_cast<std::uint64_t>(io::parse_int(o.seed));
    if (!o.jobs.empty()) {
      const auto j = io::parse_int(o.jobs);
      if (j < 1) throw ValidationError("--jobs must be >= 1");
      c.jobs = static_cast<std::size_t>(j);
    }
  } catch (const FormatError& e) {
    throw ValidationError(std::string("bad numeric flag: ") + e.what());
  }
  if (!o.input.empty()) c.input = o.input;
  if (!o.output.empty()) c.output = o.output;
  if (!o.model_dir.empty()) c.model_dir = o.model_dir;
  if (!o.report.empty()) c.report = o.report;
  return c;
}

void emit(const fs::path& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
    std::cout.flush();
    return;
  }
  io::write_file_atomic(path, content);
}

bool dry_run_done(const CommonOptions& o) {
  if (o.dry_run) log("dry run: configuration and inputs are valid");
  return o.dry_run;
}

void require_model_dir(const RunConfig& c) {
  if (c.model_dir.empty()) throw ValidationError("--model-dir is required");
}

bool is_csv(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return ext == ".csv";
}

// sentenceID and sentence columns of any CSV.
std::vector<Sentence> read_sentences(const fs::path& path) {
  const auto rows = csv::parse(io::read_file(path));
  if (rows.empty()) throw FormatError("empty CSV file", 1);
  const csv::Header header(rows[0]);
  const auto id_col = header.require("sentenceID"), text_col = header.require("sentence");
  std::vector<Sentence> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r].fields;
    if (f.size() != header.size()) throw FormatError("expected " + std::to_string(header.size()) + " fields", rows[r].line);
    out.push_back({f[id_col], f[text_col]});
  }
  return out;
}

// --- Vector files ------------------------------------------------------------
// Sparse: "#cfdetect-vectors dim=N" then "id<TAB>i:v i:v ..." per sentence.
// Dense files ("id<TAB>v1 v2 ...") are accepted on input.

std::string format_vectors(const std::vector<std::string>& ids, const std::vector<SparseVector>& xs, std::size_t dim) {
  std::string out = "#cfdetect-vectors dim=" + std::to_string(dim) + "\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out += ids[i] + "\t";
    for (std::size_t k = 0; k < xs[i].entries.size(); ++k) {
      if (k) out += ' ';
      out += std::to_string(xs[i].entries[k].first) + ":" + io::format_double(xs[i].entries[k].second);
    }
    out += "\n";
  }
  return out;
}

std::map<std::string, SparseVector> read_vectors(const fs::path& path) {
  cli::require_input(path, "vector file");
  const auto text = io::read_file(path);
  std::map<std::string, SparseVector> out;
  const std::string header = "#cfdetect-vectors dim=";
  if (text.rfind(header, 0) != 0) {
    for (const auto& [id, v] : load_sentence_vectors(path)) {
      auto s = SparseVector::from_dense(v);
      s.dim = v.size();
      out[id] = std::move(s);
    }
    return out;
  }
  const auto lines = io::split(text, '\n');
  const auto dim = static_cast<std::size_t>(io::parse_int(io::trim(lines[0].substr(header.size()))));
  for (std::size_t n = 1; n < lines.size(); ++n) {
    if (io::trim(lines[n]).empty()) continue;
    const auto tab = lines[n].find('\t');
    if (tab == std::string::npos) throw FormatError("vector file: expected id<TAB>entries", n + 1);
    SparseVector v;
    v.dim = dim;
    for (const auto& item : io::split_ws(lines[n].substr(tab + 1))) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) throw FormatError("vector file: expected index:value", n + 1);
      v.entries.emplace_back(static_cast<std::size_t>(io::parse_int(item.substr(0, colon))),
                             io::parse_double(item.substr(colon + 1)));
    }
    try {
      v.validate();
    } catch (const ValidationError& e) {
      throw FormatError(std::string("vector file: ") + e.what(), n + 1);
    }
    const auto id = lines[n].substr(0, tab);
    if (out.count(id)) throw FormatError("vector file: duplicate id '" + id + "'", n + 1);
    out[id] = std::move(v);
  }
  return out;
}

// --- Task 1 helpers ------------------------------------------------------------

TextPipeline make_pipeline(const RunConfig& c) {
  const auto profile = c.cleaning_profile();
  return TextPipeline(profile, profile.remove_stopwords ? c.stopword_set() : StopwordSet{}, c.vectorizer);
}

std::vector<std::string> texts_of(const std::vector<LabeledSentence>& data) {
  std::vector<std::string> out;
  for (const auto& d : data) out.push_back(d.sentence.text);
  return out;
}

Dataset build_dataset(const std::vector<LabeledSentence>& data, const TextPipeline& p) {
  Dataset d;
  d.dim = p.dim();
  for (const auto& s : data) {
    d.x.push_back(p.transform(s.sentence.text));
    d.y.push_back(s.label);
  }
  return d;
}

Dataset dataset_from_vectors(const std::vector<LabeledSentence>& data, const std::map<std::string, SparseVector>& vecs) {
  Dataset d;
  for (const auto& s : data) {
    auto it = vecs.find(s.sentence.id);
    if (it == vecs.end()) throw ValidationError("no vector for sentence '" + s.sentence.id + "'");
    if (d.x.empty()) d.dim = it->second.dim;
    else if (it->second.dim != d.dim) throw ValidationError("vector file mixes dimensions");
    d.x.push_back(it->second);
    d.y.push_back(s.label);
  }
  return d;
}

void write_report(const RunConfig& c, const EvalReport& r) {
  std::cout << r.to_table();
  std::cout.flush();
  if (!c.report.empty()) io::write_file_atomic(c.report, r.to_json());
}

// --- Task 2 helpers ------------------------------------------------------------

std::vector<TaggedSentence> read_chunked_conll(const fs::path& path) {
  cli::require_input(path, "input");
  auto data = read_conll(path);
  for (const auto& s : data)
    if (!s.has_chunks()) throw ValidationError("sentence '" + s.id + "' has no chunk column");
  return data;
}

fs::path crf_model_path(const RunConfig& c, const std::string& explicit_model) {
  if (!explicit_model.empty()) return explicit_model;
  require_model_dir(c);
  return c.model_dir / "crf.model";
}

std::string sentence_text(const TaggedSentence& s) {
  if (!s.text.empty()) return s.text;
  std::string t;
  for (std::size_t i = 0; i < s.tokens.size(); ++i) t += (i ? " " : "") + s.tokens[i];
  return t;
}

// --- Commands ------------------------------------------------------------------

struct CleanOptions {
  CommonOptions common;
  std::string profile;
  std::string stopwords;
};

int cmd_clean(const CleanOptions& o) {
  auto c = resolve_config(o.common);
  if (!o.profile.empty()) {
    c.cleaning_preset = o.profile;
    c.cleaning.reset();
  }
  if (!o.stopwords.empty()) c.stopwords = o.stopwords;
  const auto profile = c.cleaning_profile();
  const auto stopwords = profile.remove_stopwords ? c.stopword_set() : StopwordSet{};
  cli::require_input(c.input, "input");
  const auto rows = csv::parse(io::read_file(c.input));
  if (rows.empty()) throw FormatError("empty CSV file", 1);
  const csv::Header header(rows[0]);
  const auto text_col = header.require("sentence");
  std::string out = csv::format_row(rows[0].fields);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    auto fields = rows[r].fields;
    if (fields.size() != header.size())
      throw FormatError("expected " + std::to_string(header.size()) + " fields", rows[r].line);
    fields[text_col] = clean(fields[text_col], profile, stopwords);
    out += csv::format_row(fields);
  }
  if (dry_run_done(o.common)) return 0;
  emit(c.output, out);
  log("cleaned " + std::to_string(rows.size() - 1) + " sentences");
  return 0;
}

struct TagOptions {
  CommonOptions common;
  std::string model;
  std::string train;
  int epochs = 10;
  bool no_normalize = false;
};

int cmd_tag(const TagOptions& o) {
  const auto c = resolve_config(o.common);
  std::optional<TaggerModel> model;
  if (!o.train.empty()) {
    cli::require_input(o.train, "tagger training file");
    if (o.model.empty()) throw ValidationError("--model is required to save a trained tagger");
    const auto train_data = read_conll(o.train);
    if (o.common.dry_run && c.input.empty()) return dry_run_done(o.common) ? 0 : 0;
    log("training tagger on " + std::to_string(train_data.size()) + " sentences");
    model = train_tagger(train_data, o.epochs, c.seed);
    if (!o.common.dry_run) model->save(o.model);
  } else if (!o.model.empty()) {
    cli::require_input(o.model, "tagger model");
    model = TaggerModel::load(o.model);
  }
  if (c.input.empty()) {
    if (o.train.empty()) throw ValidationError("--input is required");
    return 0;
  }
  cli::require_input(c.input, "input");

  std::vector<TaggedSentence> sentences;
  if (is_csv(c.input)) {
    if (!model) throw ValidationError("tagging raw sentences needs --model");
    const auto rows = csv::parse(io::read_file(c.input));
    const bool task2 = !rows.empty() && csv::Header(rows[0]).has("antecedent_startid");
    std::vector<std::pair<Sentence, std::optional<SpanAnnotation>>> items;
    if (task2) {
      for (auto& it : load_task2_csv(c.input)) items.emplace_back(it.sentence, it.spans);
    } else {
      for (auto& s : read_sentences(c.input)) items.emplace_back(s, std::nullopt);
    }
    for (const auto& [s, spans] : items) {
      TaggedSentence t;
      t.id = s.id;
      t.text = s.text;
      std::tie(t.tokens, t.offsets) = tokenize(s.text);
      t.tags = tag(*model, t.tokens);
      if (spans) t.chunks = align_spans_to_chunks(t, *spans);
      sentences.push_back(std::move(t));
    }
  } else {
    sentences = read_conll(c.input);
    if (model)
      for (auto& s : sentences) s.tags = tag(*model, s.tokens);
  }
  if (!o.no_normalize)
    for (auto& s : sentences) s = normalize_tags(s);
  if (dry_run_done(o.common)) return 0;
  emit(c.output, format_conll(sentences));
  log("tagged " + std::to_string(sentences.size()) + " sentences");
  return 0;
}

struct GrammarOptions {
  CommonOptions common;
  std::string patterns;
  bool normalize = false;
};

int cmd_grammar(const GrammarOptions& o) {
  auto c = resolve_config(o.common);
  if (!o.patterns.empty()) c.vectorizer.patterns = o.patterns;
  Grammar grammar;
  if (c.vectorizer.patterns.empty()) {
    grammar = default_grammar();
  } else {
    cli::require_input(c.vectorizer.patterns, "pattern file");
    grammar = parse_pattern_file(c.vectorizer.patterns);
  }
  cli::require_input(c.input, "input");
  auto sentences = read_conll(c.input);
  std::string out = "sentenceID\tdecision\tfeatures\n";
  std::size_t positives = 0;
  for (auto& s : sentences) {
    if (o.normalize) s = normalize_tags(s);
    const auto fv = featurize(grammar, s.tags);
    const int decision = rule_based_classify(grammar, s.tags);
    positives += static_cast<std::size_t>(decision);
    out += s.id + "\t" + std::to_string(decision) + "\t";
    const auto dense = fv.dense();
    for (std::size_t k = 0; k < dense.size(); ++k) out += (k ? " " : "") + std::to_string(static_cast<int>(dense[k]));
    out += "\n";
  }
  if (dry_run_done(o.common)) return 0;
  emit(c.output, out);
  log(std::to_string(positives) + " of " + std::to_string(sentences.size()) + " sentences match the grammar");
  return 0;
}

struct FeaturizeOptions {
  CommonOptions common;
  std::string vectorizer;
  std::string min_freq;
  std::string profile;
};

void apply_vectorizer_flags(RunConfig& c, const std::string& vectorizer, const std::string& min_freq,
                            const std::string& profile) {
  if (!vectorizer.empty()) c.vectorizer.kind = parse_vectorizer(vectorizer);
  if (!min_freq.empty()) {
    const auto m = io::parse_int(min_freq);
    if (m < 1) throw ValidationError("--min-freq must be >= 1");
    c.vectorizer.min_freq = static_cast<std::size_t>(m);
  }
  if (!profile.empty()) {
    c.cleaning_preset = profile;
    c.cleaning.reset();
  }
}

int cmd_featurize(const FeaturizeOptions& o) {
  auto c = resolve_config(o.common);
  apply_vectorizer_flags(c, o.vectorizer, o.min_freq, o.profile);
  cli::require_input(c.input, "input");
  const auto sentences = read_sentences(c.input);
  const bool reuse = !c.model_dir.empty() && fs::exists(c.model_dir / "pipeline.json");
  TextPipeline pipeline = reuse ? TextPipeline::load(c.model_dir) : make_pipeline(c);
  if (!reuse) {
    std::vector<std::string> texts;
    for (const auto& s : sentences) texts.push_back(s.text);
    pipeline.fit(texts);
  }
  std::vector<std::string> ids;
  std::vector<SparseVector> xs;
  for (const auto& s : sentences) {
    ids.push_back(s.id);
    xs.push_back(pipeline.transform(s.text));
  }
  if (dry_run_done(o.common)) return 0;
  if (!reuse && !c.model_dir.empty()) pipeline.save(c.model_dir);
  emit(c.output, format_vectors(ids, xs, pipeline.dim()));
  log("featurized " + std::to_string(ids.size()) + " sentences, dimension " + std::to_string(pipeline.dim()));
  return 0;
}

struct ModelOptions {
  CommonOptions common;
  std::string algorithm;
  std::vector<std::string> params;
  std::string vectors;
  std::string vectorizer;
  std::string min_freq;
  std::string profile;
  std::string k;
  std::string model;
  bool holdout = false;
};

void apply_model_flags(RunConfig& c, const ModelOptions& o) {
  apply_vectorizer_flags(c, o.vectorizer, o.min_freq, o.profile);
  if (!o.algorithm.empty()) {
    const auto a = parse_algorithm(o.algorithm);
    if (a != c.algorithm) c.classifier_params.clear();
    c.algorithm = a;
  }
  for (const auto& p : o.params) {
    const auto eq = p.find('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("--param expects key=value, got '" + p + "'");
    c.classifier_params[p.substr(0, eq)] = p.substr(eq + 1);
  }
  if (!o.k.empty()) c.cv_k = static_cast<std::size_t>(std::max<long long>(0, io::parse_int(o.k)));
}

int train_task1(const RunConfig& c, const ModelOptions& o) {
  const auto spec = c.classifier_spec();
  cli::require_input(c.input, "input");
  require_model_dir(c);
  const auto data = load_task1_csv(c.input);
  std::vector<LabeledSentence> train_part = data, test_part;
  if (o.holdout) {
    auto split = split_dataset(data, SplitSpec{c.split.train_fraction, c.split.valid_fraction, c.split.test_fraction, c.seed});
    train_part = split.train;
    test_part = split.test;
    log("holdout split: " + std::to_string(split.train.size()) + " train, " + std::to_string(split.valid.size()) +
        " valid, " + std::to_string(split.test.size()) + " test");
  }

  std::optional<TextPipeline> pipeline;
  Dataset train_set, test_set;
  if (!o.vectors.empty()) {
    const auto vecs = read_vectors(o.vectors);
    train_set = dataset_from_vectors(train_part, vecs);
    if (o.holdout) test_set = dataset_from_vectors(test_part, vecs);
  } else {
    pipeline.emplace(make_pipeline(c));
    pipeline->fit(texts_of(train_part));
    train_set = build_dataset(train_part, *pipeline);
    if (o.holdout) test_set = build_dataset(test_part, *pipeline);
  }
  train_set.validate();
  if (o.common.dry_run) return dry_run_done(o.common) ? 0 : 0;

  log("training " + std::string(algorithm_name(spec.algo)) + " on " + std::to_string(train_set.size()) +
      " sentences, dimension " + std::to_string(train_set.dim));
  const auto model = train(spec, train_set);
  if (pipeline) pipeline->save(c.model_dir);
  else {
    std::error_code ec;
    fs::create_directories(c.model_dir, ec);
    if (ec) throw IoError("cannot create directory " + c.model_dir.string());
    std::error_code rm;
    fs::remove(c.model_dir / "pipeline.json", rm);
  }
  model->save(c.model_dir / "classifier.model");
  log("model written to " + c.model_dir.string());

  if (o.holdout) {
    std::vector<int> pred;
    for (const auto& x : test_set.x) pred.push_back(model->predict(x));
    auto report = classification_report(pred, test_set.y);
    report.title = std::string(algorithm_name(spec.algo)) + " holdout test";
    write_report(c, report);
  }
  return 0;
}

int train_task2(const RunConfig& c, const ModelOptions& o) {
  const auto cfg = c.crf_config();
  c.templates.validate();
  const auto data = read_chunked_conll(c.input);
  const fs::path out = crf_model_path(c, o.model);
  std::vector<TaggedSentence> train_part = data, test_part;
  if (o.holdout) {
    auto split = split_dataset(data, SplitSpec{c.split.train_fraction, c.split.valid_fraction, c.split.test_fraction, c.seed});
    train_part = split.train;
    test_part = split.test;
  }
  for (const auto& s : train_part) extract_features(s, c.templates);
  if (dry_run_done(o.common)) return 0;
  log("training CRF (" + std::string(optimizer_name(cfg.optimizer)) + ") on " + std::to_string(train_part.size()) +
      " sentences");
  const auto model = train_crf(train_part, c.templates, cfg, &std::cerr);
  if (out.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(out.parent_path(), ec);
  }
  model.save(out);
  log("model written to " + out.string());
  if (o.holdout) {
    std::vector<std::vector<Chunk>> pred;
    for (const auto& s : test_part) pred.push_back(predict_chunks(model, s));
    auto report = chunk_report(test_part, pred);
    report.title = "CRF holdout test";
    write_report(c, report);
  }
  return 0;
}

int cmd_train(const ModelOptions& o) {
  auto c = resolve_config(o.common);
  apply_model_flags(c, o);
  return c.task == Task::Task1 ? train_task1(c, o) : train_task2(c, o);
}

int cmd_predict(const ModelOptions& o) {
  auto c = resolve_config(o.common);
  apply_model_flags(c, o);
  cli::require_input(c.input, "input");
  if (c.task == Task::Task2) {
    const auto path = crf_model_path(c, o.model);
    cli::require_input(path, "CRF model");
    const auto model = CrfModel::load(path);
    auto sentences = read_conll(c.input);
    for (auto& s : sentences) s.chunks = predict_chunks(model, s);
    if (dry_run_done(o.common)) return 0;
    emit(c.output, format_conll(sentences));
    log("labelled " + std::to_string(sentences.size()) + " sentences");
    return 0;
  }

  require_model_dir(c);
  cli::require_input(c.model_dir / "classifier.model", "classifier model");
  const auto model = load_classifier(c.model_dir / "classifier.model");
  const auto sentences = read_sentences(c.input);
  std::vector<SparseVector> xs;
  if (!o.vectors.empty()) {
    const auto vecs = read_vectors(o.vectors);
    for (const auto& s : sentences) {
      auto it = vecs.find(s.id);
      if (it == vecs.end()) throw ValidationError("no vector for sentence '" + s.id + "'");
      xs.push_back(it->second);
    }
  } else {
    if (!fs::exists(c.model_dir / "pipeline.json"))
      throw ValidationError("model was trained on precomputed vectors; pass --vectors");
    const auto pipeline = TextPipeline::load(c.model_dir);
    for (const auto& s : sentences) xs.push_back(pipeline.transform(s.text));
  }
  std::string out = "sentenceID,prediction,probability\n";
  std::size_t positives = 0;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const int label = model->predict(xs[i]);
    positives += static_cast<std::size_t>(label);
    char prob[32];
    std::snprintf(prob, sizeof prob, "%.6f", model->predict_proba(xs[i]));
    out += csv::format_row({sentences[i].id, std::to_string(label), prob});
  }
  if (dry_run_done(o.common)) return 0;
  emit(c.output, out);
  log(std::to_string(positives) + " of " + std::to_string(sentences.size()) + " sentences predicted counterfactual");
  return 0;
}

int cmd_cv(const ModelOptions& o) {
  auto c = resolve_config(o.common);
  apply_model_flags(c, o);
  CvOptions cv{c.cv_k, c.seed, c.jobs};
  if (c.task == Task::Task2) {
    const auto cfg = c.crf_config();
    const auto data = read_chunked_conll(c.input);
    std::vector<int> strata;
    for (const auto& s : data)
      strata.push_back(std::count(s.chunks.begin(), s.chunks.end(), Chunk::A) > 0 ? 1 : 0);
    stratified_kfold(strata, cv.k, cv.seed, true);
    if (dry_run_done(o.common)) return 0;
    auto tc = cfg;
    tc.jobs = 1;
    log(std::to_string(cv.k) + "-fold cross-validation of the CRF on " + std::to_string(data.size()) + " sentences");
    write_report(c, cross_validate_crf(data, c.templates, tc, cv));
    return 0;
  }

  const auto spec = c.classifier_spec();
  cli::require_input(c.input, "input");
  const auto data = load_task1_csv(c.input);
  Dataset ds;
  if (!o.vectors.empty()) {
    ds = dataset_from_vectors(data, read_vectors(o.vectors));
  } else {
    auto pipeline = make_pipeline(c);
    pipeline.fit(texts_of(data));
    ds = build_dataset(data, pipeline);
  }
  stratified_kfold(ds.y, cv.k, cv.seed);
  if (dry_run_done(o.common)) return 0;
  log(std::to_string(cv.k) + "-fold cross-validation of " + std::string(algorithm_name(spec.algo)) + " on " +
      std::to_string(ds.size()) + " sentences");
  write_report(c, cross_validate(spec, ds, cv));
  return 0;
}

int cmd_extract(const ModelOptions& o) {
  auto c = resolve_config(o.common);
  const auto path = crf_model_path(c, o.model);
  cli::require_input(path, "CRF model");
  cli::require_input(c.input, "input");
  const auto model = CrfModel::load(path);
  const auto sentences = read_conll(c.input);
  std::vector<Task2Item> items;
  for (const auto& s : sentences) {
    Task2Item item;
    item.sentence = {s.id, sentence_text(s)};
    item.spans = labels_to_spans(predict_chunks(model, s), token_offsets(s));
    items.push_back(std::move(item));
  }
  if (dry_run_done(o.common)) return 0;
  emit(c.output, format_task2_csv(items));
  log("extracted spans for " + std::to_string(items.size()) + " sentences");
  return 0;
}

struct EvaluateOptions {
  CommonOptions common;
  std::string pred;
  std::string gold;
};

int cmd_evaluate(const EvaluateOptions& o) {
  const auto c = resolve_config(o.common);
  cli::require_input(o.pred, "--pred");
  cli::require_input(o.gold, "--gold");
  EvalReport report;
  if (c.task == Task::Task1) {
    const auto gold = load_task1_csv(o.gold);
    const auto rows = csv::parse(io::read_file(o.pred));
    if (rows.empty()) throw FormatError("empty prediction file", 1);
    const csv::Header header(rows[0]);
    const auto id_col = header.require("sentenceID");
    const auto label_col = header.has("prediction") ? header.require("prediction") : header.require("gold_label");
    std::map<std::string, int> pred;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto& f = rows[r].fields;
      if (f.size() != header.size()) throw FormatError("expected " + std::to_string(header.size()) + " fields", rows[r].line);
      if (f[label_col] != "0" && f[label_col] != "1") throw FormatError("prediction must be 0 or 1", rows[r].line);
      if (!pred.emplace(f[id_col], f[label_col] == "1").second)
        throw FormatError("duplicate sentence id '" + f[id_col] + "'", rows[r].line);
    }
    if (pred.size() != gold.size())
      throw ValidationError(std::to_string(pred.size()) + " predictions for " + std::to_string(gold.size()) +
                            " gold sentences");
    std::vector<int> p, g;
    for (const auto& s : gold) {
      auto it = pred.find(s.sentence.id);
      if (it == pred.end()) throw ValidationError("no prediction for sentence '" + s.sentence.id + "'");
      p.push_back(it->second);
      g.push_back(s.label);
    }
    report = classification_report(p, g);
    report.title = "task1 evaluation";
  } else if (!is_csv(o.gold)) {
    const auto gold = read_chunked_conll(o.gold);
    const auto pred = read_chunked_conll(o.pred);
    if (pred.size() != gold.size()) throw ValidationError("prediction and gold files differ in sentence count");
    std::vector<std::vector<Chunk>> labels;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (pred[i].id != gold[i].id)
        throw ValidationError("sentence id mismatch: '" + pred[i].id + "' vs '" + gold[i].id + "'");
      labels.push_back(pred[i].chunks);
    }
    report = chunk_report(gold, labels);
    report.title = "task2 evaluation (tokens)";
  } else {
    const auto gold = load_task2_csv(o.gold);
    const auto pred = load_task2_csv(o.pred);
    const double em = exact_match(pred, gold);
    std::map<std::string, const SpanAnnotation*> by_id;
    for (const auto& p : pred) by_id[p.sentence.id] = &p.spans;
    std::vector<std::vector<Chunk>> p_labels, g_labels;
    std::vector<std::string> ids;
    for (const auto& g : gold) {
      const auto offsets = tokenize(g.sentence.text).second;
      g_labels.push_back(align_spans_to_chunks(offsets, g.spans));
      p_labels.push_back(align_spans_to_chunks(offsets, *by_id.at(g.sentence.id)));
      ids.push_back(g.sentence.id);
    }
    report = token_chunk_f1(p_labels, g_labels, ids);
    report.exact_match = em;
    report.title = "task2 evaluation (spans)";
  }
  if (dry_run_done(o.common)) return 0;
  write_report(c, report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Counterfactual detection and antecedent/consequent extraction"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "cfdetect 1.0.0");

  CleanOptions clean_o;
  auto* clean_cmd = app.add_subcommand("clean", "Apply a text cleaning profile to the sentence column of a CSV");
  add_common(clean_cmd, clean_o.common);
  clean_cmd->add_option("--profile", clean_o.profile, "none, cleaning, cleaning_no_stopwords or normalization");
  clean_cmd->add_option("--stopwords", clean_o.stopwords, "Stopword list (one word per line)");

  TagOptions tag_o;
  auto* tag_cmd = app.add_subcommand("tag", "POS-tag sentences (CSV or CoNLL input) into CoNLL");
  add_common(tag_cmd, tag_o.common);
  tag_cmd->add_option("--model", tag_o.model, "Tagger model to use, or to write with --train");
  tag_cmd->add_option("--train", tag_o.train, "Train a tagger on this CoNLL file first");
  tag_cmd->add_option("--epochs", tag_o.epochs, "Tagger training epochs")->check(CLI::PositiveNumber);
  tag_cmd->add_flag("--no-normalize", tag_o.no_normalize, "Keep tags exactly as produced or read");

  GrammarOptions grammar_o;
  auto* grammar_cmd = app.add_subcommand("grammar", "Match the POS pattern grammar against tagged sentences");
  add_common(grammar_cmd, grammar_o.common);
  grammar_cmd->add_option("--patterns", grammar_o.patterns, "Pattern file (built-in grammar when omitted)");
  grammar_cmd->add_flag("--normalize", grammar_o.normalize, "Normalize modal, negation and wish tags first");

  FeaturizeOptions feat_o;
  auto* feat_cmd = app.add_subcommand("featurize", "Write sentence feature vectors");
  add_common(feat_cmd, feat_o.common);
  feat_cmd->add_option("--vectorizer", feat_o.vectorizer, "bow, tfidf, embedding or grammar");
  feat_cmd->add_option("--min-freq", feat_o.min_freq, "Minimum document frequency of a term");
  feat_cmd->add_option("--profile", feat_o.profile, "Cleaning profile");

  auto add_model_options = [](CLI::App* cmd, ModelOptions& o) {
    add_common(cmd, o.common);
    cmd->add_option("--algorithm", o.algorithm, "NB, LOGIT, SVM, KNN, CART, RF or MLP");
    cmd->add_option("--param", o.params, "Classifier parameter key=value (repeatable)");
    cmd->add_option("--vectors", o.vectors, "Precomputed sentence vectors instead of the text pipeline");
    cmd->add_option("--vectorizer", o.vectorizer, "bow, tfidf, embedding or grammar");
    cmd->add_option("--min-freq", o.min_freq, "Minimum document frequency of a term");
    cmd->add_option("--profile", o.profile, "Cleaning profile");
    cmd->add_option("--model", o.model, "CRF model file (task2; default <model-dir>/crf.model)");
  };

  ModelOptions train_o;
  auto* train_cmd = app.add_subcommand("train", "Train a classifier (task1) or CRF (task2)");
  add_model_options(train_cmd, train_o);
  train_cmd->add_flag("--holdout", train_o.holdout, "Train on the split's train part and report on its test part");

  ModelOptions predict_o;
  auto* predict_cmd = app.add_subcommand("predict", "Predict labels (task1 CSV) or chunks (task2 CoNLL)");
  add_model_options(predict_cmd, predict_o);

  ModelOptions cv_o;
  auto* cv_cmd = app.add_subcommand("cv", "Stratified k-fold cross-validation");
  add_model_options(cv_cmd, cv_o);
  cv_cmd->add_option("-k,--folds", cv_o.k, "Number of folds");

  ModelOptions extract_o;
  auto* extract_cmd = app.add_subcommand("extract", "Extract antecedent/consequent spans into a task2 CSV");
  add_common(extract_cmd, extract_o.common);
  extract_cmd->add_option("--model", extract_o.model, "CRF model file (default <model-dir>/crf.model)");

  EvaluateOptions eval_o;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score predictions against gold annotations");
  add_common(eval_cmd, eval_o.common);
  eval_cmd->add_option("--pred", eval_o.pred, "Predictions")->required();
  eval_cmd->add_option("--gold", eval_o.gold, "Gold annotations")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*clean_cmd) return cmd_clean(clean_o);
    if (*tag_cmd) return cmd_tag(tag_o);
    if (*grammar_cmd) return cmd_grammar(grammar_o);
    if (*feat_cmd) return cmd_featurize(feat_o);
    if (*train_cmd) return cmd_train(train_o);
    if (*predict_cmd) return cmd_predict(predict_o);
    if (*cv_cmd) return cmd_cv(cv_o);
    if (*extract_cmd) return cmd_extract(extract_o);
    if (*eval_cmd) return cmd_evaluate(eval_o);
  } catch (const IoError& e) {
    std::cerr << "cfdetect: error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "cfdetect: error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
