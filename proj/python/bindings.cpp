#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cfdetect/classify.hpp"
#include "cfdetect/corpus.hpp"
#include "cfdetect/crf.hpp"
#include "cfdetect/error.hpp"
#include "cfdetect/eval.hpp"
#include "cfdetect/grammar.hpp"
#include "cfdetect/pipeline.hpp"
#include "cfdetect/tagger.hpp"
#include "cfdetect/textprep.hpp"
#include "cfdetect/vectorize.hpp"

namespace py = pybind11;
using namespace cfd;

namespace {

std::vector<Chunk> chunks_from_strings(const std::vector<std::string>& labels) {
  std::vector<Chunk> out;
  for (const auto& l : labels) {
    const auto c = parse_chunk(l);
    if (!c) throw ValidationError("chunk label must be A, C or I, got '" + l + "'");
    out.push_back(*c);
  }
  return out;
}

std::vector<std::string> chunks_to_strings(const std::vector<Chunk>& chunks) {
  std::vector<std::string> out;
  for (auto c : chunks) out.emplace_back(1, chunk_char(c));
  return out;
}

Dataset make_dataset(const std::vector<DenseVector>& x, const std::vector<int>& y) {
  auto d = Dataset::from_dense(x, y);
  d.validate();
  return d;
}

TaggedSentence make_sentence(const std::vector<std::string>& tokens, const std::vector<std::string>& tags,
                             const std::vector<std::string>& ner, const std::vector<std::string>& chunks) {
  TaggedSentence s;
  s.tokens = tokens;
  s.tags = tags;
  s.ner = ner;
  s.chunks = chunks_from_strings(chunks);
  s.offsets = token_offsets(s);
  s.validate();
  return s;
}

py::dict report_to_dict(const EvalReport& r) { return py::module_::import("json").attr("loads")(r.to_json()); }

std::optional<std::pair<std::size_t, std::size_t>> span_pair(const std::optional<CharSpan>& s) {
  if (!s) return std::nullopt;
  return std::make_pair(s->start, s->end);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Counterfactual detection and antecedent/consequent extraction";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<TrainingError>(m, "TrainingError", base.ptr());
  py::register_exception<AlignmentError>(m, "AlignmentError", base.ptr());

  // Text preparation.
  m.def(
      "clean",
      [](const std::string& text, const std::string& profile, std::optional<std::vector<std::string>> stopwords) {
        const auto p = CleaningProfile::preset(profile);
        StopwordSet sw = stopwords ? StopwordSet(std::set<std::string>(stopwords->begin(), stopwords->end()))
                                   : StopwordSet::english();
        return clean(text, p, sw);
      },
      py::arg("text"), py::arg("profile") = "cleaning", py::arg("stopwords") = py::none(),
      "Clean text with a named profile: none, cleaning, cleaning_no_stopwords or normalization.");
  m.def("stem", &stem, py::arg("word"), "Porter stem of one word.");
  m.def(
      "tokenize",
      [](const std::string& text) {
        auto [tokens, offsets] = tokenize(text);
        std::vector<std::pair<std::size_t, std::size_t>> spans;
        for (const auto& o : offsets) spans.emplace_back(o.start, o.end);
        return std::make_pair(tokens, spans);
      },
      py::arg("text"), "Tokens and their half-open byte offsets.");

  // Grammar.
  py::class_<Grammar>(m, "Grammar")
      .def_static("default", &default_grammar)
      .def_static("parse", &parse_grammar, py::arg("text"))
      .def_static("load", &parse_pattern_file, py::arg("path"))
      .def_property_readonly("patterns",
                             [](const Grammar& g) {
                               std::vector<std::pair<std::string, std::string>> out;
                               for (const auto& p : g.patterns)
                                 out.emplace_back(std::string(family_name(p.family)), p.source_text);
                               return out;
                             })
      .def_property_readonly("feature_dim", &Grammar::feature_dim)
      .def("features", [](const Grammar& g, const std::vector<std::string>& tags) { return featurize(g, tags).dense(); },
           py::arg("tags"))
      .def("classify", &rule_based_classify, py::arg("tags"))
      .def(
          "match",
          [](const Grammar& g, std::size_t pattern, const std::vector<std::string>& tags) {
            return match(g.patterns.at(pattern), tags);
          },
          py::arg("pattern"), py::arg("tags"));

  m.def(
      "normalize_tags",
      [](const std::vector<std::string>& tokens, const std::vector<std::string>& tags) {
        return normalize_tags(make_sentence(tokens, tags, {}, {})).tags;
      },
      py::arg("tokens"), py::arg("tags"));

  // Vectorization.
  py::class_<TextPipeline>(m, "TextPipeline")
      .def(py::init([](const std::string& vectorizer, std::size_t min_freq, const std::string& profile) {
             VectorizerConfig v;
             v.kind = parse_vectorizer(vectorizer);
             v.min_freq = min_freq;
             const auto p = CleaningProfile::preset(profile);
             return TextPipeline(p, p.remove_stopwords ? StopwordSet::english() : StopwordSet{}, v);
           }),
           py::arg("vectorizer") = "tfidf", py::arg("min_freq") = 5, py::arg("profile") = "cleaning")
      .def("fit", &TextPipeline::fit, py::arg("texts"))
      .def("transform", [](const TextPipeline& p, const std::string& t) { return p.transform(t).to_dense(); },
           py::arg("text"))
      .def("tokens", &TextPipeline::tokens, py::arg("text"))
      .def_property_readonly("dim", &TextPipeline::dim)
      .def_property_readonly("vocabulary", [](const TextPipeline& p) { return p.vocabulary().terms(); })
      .def("save", &TextPipeline::save, py::arg("directory"))
      .def_static("load", &TextPipeline::load, py::arg("directory"));

  // Classifiers.
  py::class_<Classifier>(m, "Classifier")
      .def_property_readonly("algorithm", [](const Classifier& c) { return std::string(algorithm_name(c.algorithm())); })
      .def_property_readonly("dim", &Classifier::dim)
      .def("predict", [](const Classifier& c, const DenseVector& x) { return c.predict(SparseVector::from_dense(x)); },
           py::arg("x"))
      .def("predict_proba",
           [](const Classifier& c, const DenseVector& x) { return c.predict_proba(SparseVector::from_dense(x)); },
           py::arg("x"))
      .def("serialize", &Classifier::serialize)
      .def("save", &Classifier::save, py::arg("path"));
  m.def(
      "train_classifier",
      [](const std::string& algorithm, const std::vector<DenseVector>& x, const std::vector<int>& y,
         const std::map<std::string, std::string>& params) {
        return train(ClassifierSpec::with_defaults(parse_algorithm(algorithm), params), make_dataset(x, y));
      },
      py::arg("algorithm"), py::arg("x"), py::arg("y"), py::arg("params") = std::map<std::string, std::string>{});
  m.def("load_classifier", &load_classifier, py::arg("path"));
  m.def(
      "deserialize_classifier", [](const std::string& text) { return deserialize_classifier(text); }, py::arg("text"));

  // Sequence labelling.
  py::class_<CrfModel>(m, "CrfModel")
      .def_property_readonly("num_features", &CrfModel::num_features)
      .def_property_readonly("templates", [](const CrfModel& c) { return c.templates.to_string(); })
      .def(
          "predict",
          [](const CrfModel& c, const std::vector<std::string>& tokens, const std::vector<std::string>& tags,
             const std::vector<std::string>& ner) {
            return chunks_to_strings(predict_chunks(c, make_sentence(tokens, tags, ner, {})));
          },
          py::arg("tokens"), py::arg("tags"), py::arg("ner") = std::vector<std::string>{})
      .def("serialize", &CrfModel::serialize)
      .def("save", &CrfModel::save, py::arg("path"))
      .def_static("load", &CrfModel::load, py::arg("path"));
  m.def(
      "train_crf",
      [](const std::string& conll_text, const std::string& templates, int epochs, double l2,
         const std::string& optimizer, double learning_rate, std::uint64_t seed) {
        TrainConfig cfg;
        cfg.epochs = epochs;
        cfg.l2 = l2;
        cfg.optimizer = parse_optimizer(optimizer);
        cfg.learning_rate = learning_rate;
        cfg.seed = seed;
        py::gil_scoped_release release;
        return train_crf(parse_conll(conll_text), FeatureTemplateSet::parse(templates), cfg);
      },
      py::arg("conll_text"), py::arg("templates") = FeatureTemplateSet{}.to_string(), py::arg("epochs") = 100,
      py::arg("l2") = 1.0, py::arg("optimizer") = "lbfgs", py::arg("learning_rate") = 0.1, py::arg("seed") = 0,
      "Train on CoNLL text whose last column holds A/C/I chunk labels.");
  m.def(
      "labels_to_spans",
      [](const std::vector<std::string>& labels, const std::vector<std::pair<std::size_t, std::size_t>>& offsets) {
        std::vector<CharSpan> offs;
        for (const auto& [s, e] : offsets) offs.push_back({s, e});
        const auto a = labels_to_spans(chunks_from_strings(labels), offs);
        return std::make_pair(span_pair(a.antecedent), span_pair(a.consequent));
      },
      py::arg("labels"), py::arg("offsets"), "Covering (start, end) byte spans of the A and C labels, or None.");

  // Evaluation.
  m.def(
      "prf1", [](double p, double r) { return prf1(p, r).f1; }, py::arg("precision"), py::arg("recall"),
      "Harmonic mean of precision and recall.");
  m.def(
      "classification_report",
      [](const std::vector<int>& pred, const std::vector<int>& gold) {
        return report_to_dict(classification_report(pred, gold));
      },
      py::arg("pred"), py::arg("gold"));
  m.def(
      "token_chunk_f1",
      [](const std::vector<std::vector<std::string>>& pred, const std::vector<std::vector<std::string>>& gold) {
        std::vector<std::vector<Chunk>> p, g;
        for (const auto& s : pred) p.push_back(chunks_from_strings(s));
        for (const auto& s : gold) g.push_back(chunks_from_strings(s));
        return report_to_dict(token_chunk_f1(p, g));
      },
      py::arg("pred"), py::arg("gold"));
  m.def(
      "stratified_kfold",
      [](const std::vector<int>& y, std::size_t k, std::uint64_t seed) {
        const auto plan = stratified_kfold(y, k, seed);
        std::vector<std::vector<std::size_t>> folds;
        for (std::size_t f = 0; f < k; ++f) folds.push_back(plan.test_indices(f));
        return folds;
      },
      py::arg("y"), py::arg("k"), py::arg("seed") = 0, "Test indices of each fold.");
  m.def(
      "cross_validate",
      [](const std::string& algorithm, const std::vector<DenseVector>& x, const std::vector<int>& y, std::size_t k,
         std::uint64_t seed, const std::map<std::string, std::string>& params) {
        const auto spec = ClassifierSpec::with_defaults(parse_algorithm(algorithm), params);
        const auto data = make_dataset(x, y);
        EvalReport r;
        {
          py::gil_scoped_release release;
          r = cross_validate(spec, data, {k, seed, 1});
        }
        return report_to_dict(r);
      },
      py::arg("algorithm"), py::arg("x"), py::arg("y"), py::arg("k") = 3, py::arg("seed") = 0,
      py::arg("params") = std::map<std::string, std::string>{});
}
