#include "cfdetect/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <numeric>
#include <thread>
#include <unordered_map>

#include "cfdetect/error.hpp"
#include "cfdetect/rng.hpp"
#include "json.hpp"

namespace cfd {

namespace {

double ratio(double num, double den) { return den > 0 ? num / den : 0.0; }

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

// Runs fn(0..n-1) on up to `jobs` threads; results are indexed, so the
// outcome does not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> threads;
  for (std::size_t j = 0; j < jobs; ++j)
    threads.emplace_back([&, j] {
      for (std::size_t i = j; i < n; i += jobs) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void add_summary(EvalReport& report, const std::string& key, const std::vector<double>& vs) {
  const double n = static_cast<double>(vs.size());
  const double mean = std::accumulate(vs.begin(), vs.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : vs) ss += (v - mean) * (v - mean);
  report.mean[key] = mean;
  report.stddev[key] = vs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
}

EvalReport aggregate(std::string title, const std::vector<EvalReport>& folds) {
  EvalReport out;
  out.title = std::move(title);
  out.folds = folds.size();
  std::map<std::string, std::vector<double>> values;
  for (const auto& f : folds)
    for (const auto& [k, v] : f.metrics()) values[k].push_back(v);
  for (const auto& [k, vs] : values) add_summary(out, k, vs);
  auto get = [&](const std::string& k) { return out.mean.count(k) ? out.mean.at(k) : 0.0; };
  out.precision = get("precision");
  out.recall = get("recall");
  out.f1 = get("f1");
  if (out.mean.count("accuracy")) out.accuracy = get("accuracy");
  if (out.mean.count("exact_match")) out.exact_match = get("exact_match");
  for (const auto& f : folds)
    for (const auto& [cls, s] : f.per_class) {
      auto& acc = out.per_class[cls];
      const double n = static_cast<double>(folds.size());
      acc.precision += s.precision / n;
      acc.recall += s.recall / n;
      acc.f1 += s.f1 / n;
      acc.support += s.support / n;
    }
  return out;
}

}  // namespace

Confusion Confusion::from_labels(const std::vector<int>& pred, const std::vector<int>& gold) {
  if (pred.size() != gold.size())
    throw ValidationError("confusion: " + std::to_string(pred.size()) + " predictions for " +
                          std::to_string(gold.size()) + " gold labels");
  Confusion c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (gold[i]) (pred[i] ? c.tp : c.fn)++;
    else (pred[i] ? c.fp : c.tn)++;
  }
  return c;
}

Prf prf1(double precision, double recall) {
  const double s = precision + recall;
  return {precision, recall, s > 0 ? 2.0 * precision * recall / s : 0.0};
}

Prf prf1(const Confusion& c) {
  return prf1(ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp)),
              ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn)));
}

// --- EvalReport ------------------------------------------------------------

std::map<std::string, double> EvalReport::metrics() const {
  std::map<std::string, double> m = {{"precision", precision}, {"recall", recall}, {"f1", f1}};
  if (accuracy) m["accuracy"] = *accuracy;
  if (exact_match) m["exact_match"] = *exact_match;
  return m;
}

std::string EvalReport::to_table() const {
  std::string out;
  if (!title.empty()) out += title + "\n";
  out += pad("class", 10) + pad("precision", 11) + pad("recall", 11) + pad("f1", 11) + "support\n";
  for (const auto& [cls, s] : per_class)
    out += pad(cls, 10) + pad(fixed(s.precision), 11) + pad(fixed(s.recall), 11) + pad(fixed(s.f1), 11) +
           fixed(s.support, folds ? 1 : 0) + "\n";
  out += pad("overall", 10) + pad(fixed(precision), 11) + pad(fixed(recall), 11) + pad(fixed(f1), 11) + "\n";
  if (accuracy) out += "accuracy    " + fixed(*accuracy) + "\n";
  if (exact_match) out += "exact_match " + fixed(*exact_match) + "\n";
  if (folds) {
    out += std::to_string(folds) + "-fold cross-validation (mean +/- sample stddev)\n";
    for (const auto& [k, v] : mean) out += "  " + pad(k, 13) + fixed(v) + " +/- " + fixed(stddev.at(k)) + "\n";
  }
  return out;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  if (!title.empty()) j["title"] = title;
  j["precision"] = precision;
  j["recall"] = recall;
  j["f1"] = f1;
  if (accuracy) j["accuracy"] = *accuracy;
  if (exact_match) j["exact_match"] = *exact_match;
  auto& pc = j["per_class"] = nlohmann::ordered_json::object();
  for (const auto& [cls, s] : per_class)
    pc[cls] = {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"support", s.support}};
  if (folds) {
    j["folds"] = folds;
    j["mean"] = mean;
    j["stddev"] = stddev;
  }
  return j.dump(2) + "\n";
}

// --- Metrics ---------------------------------------------------------------

EvalReport classification_report(const std::vector<int>& pred, const std::vector<int>& gold) {
  const auto c = Confusion::from_labels(pred, gold);
  EvalReport r;
  const auto pos = prf1(c), neg = prf1(c.swapped());
  r.precision = pos.precision;
  r.recall = pos.recall;
  r.f1 = pos.f1;
  r.per_class["0"] = {neg.precision, neg.recall, neg.f1, static_cast<double>(c.tn + c.fp)};
  r.per_class["1"] = {pos.precision, pos.recall, pos.f1, static_cast<double>(c.tp + c.fn)};
  r.accuracy = ratio(static_cast<double>(c.tp + c.tn), static_cast<double>(gold.size()));
  return r;
}

EvalReport token_chunk_f1(const std::vector<std::vector<Chunk>>& pred, const std::vector<std::vector<Chunk>>& gold,
                          const std::vector<std::string>& ids) {
  if (pred.size() != gold.size())
    throw ValidationError("token_chunk_f1: " + std::to_string(pred.size()) + " predicted sentences for " +
                          std::to_string(gold.size()) + " gold sentences");
  // Counts per label A (0) and C (1).
  std::array<double, 2> tp{}, fp{}, fn{};
  for (std::size_t s = 0; s < gold.size(); ++s) {
    if (pred[s].size() != gold[s].size()) {
      const std::string id = s < ids.size() ? ids[s] : std::to_string(s);
      throw ValidationError("token_chunk_f1: sentence '" + id + "' has " + std::to_string(pred[s].size()) +
                            " predicted labels for " + std::to_string(gold[s].size()) + " tokens");
    }
    for (std::size_t t = 0; t < gold[s].size(); ++t) {
      const auto p = pred[s][t], g = gold[s][t];
      if (p == g) {
        if (g != Chunk::I) tp[static_cast<std::size_t>(g)] += 1;
        continue;
      }
      if (p != Chunk::I) fp[static_cast<std::size_t>(p)] += 1;
      if (g != Chunk::I) fn[static_cast<std::size_t>(g)] += 1;
    }
  }
  EvalReport r;
  const char* names[2] = {"A", "C"};
  for (std::size_t l = 0; l < 2; ++l) {
    const auto s = prf1(ratio(tp[l], tp[l] + fp[l]), ratio(tp[l], tp[l] + fn[l]));
    r.per_class[names[l]] = {s.precision, s.recall, s.f1, tp[l] + fn[l]};
  }
  const double TP = tp[0] + tp[1], FP = fp[0] + fp[1], FN = fn[0] + fn[1];
  const auto micro = prf1(ratio(TP, TP + FP), ratio(TP, TP + FN));
  r.precision = micro.precision;
  r.recall = micro.recall;
  r.f1 = micro.f1;
  return r;
}

double exact_match(const std::vector<SpanAnnotation>& pred, const std::vector<SpanAnnotation>& gold) {
  if (pred.size() != gold.size())
    throw ValidationError("exact_match: " + std::to_string(pred.size()) + " predictions for " +
                          std::to_string(gold.size()) + " gold sentences");
  if (gold.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += pred[i] == gold[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

double exact_match(const std::vector<Task2Item>& pred, const std::vector<Task2Item>& gold) {
  std::unordered_map<std::string, const SpanAnnotation*> by_id;
  for (const auto& g : gold) by_id[g.sentence.id] = &g.spans;
  if (pred.size() != gold.size())
    throw ValidationError("exact_match: " + std::to_string(pred.size()) + " predictions for " +
                          std::to_string(gold.size()) + " gold sentences");
  std::vector<SpanAnnotation> p, g;
  std::unordered_map<std::string, bool> seen;
  for (const auto& item : pred) {
    auto it = by_id.find(item.sentence.id);
    if (it == by_id.end()) throw ValidationError("exact_match: sentence id '" + item.sentence.id + "' not in gold");
    if (seen[item.sentence.id]) throw ValidationError("exact_match: duplicate sentence id '" + item.sentence.id + "'");
    seen[item.sentence.id] = true;
    p.push_back(item.spans);
    g.push_back(*it->second);
  }
  return exact_match(p, g);
}

// --- Folds -----------------------------------------------------------------

std::vector<std::size_t> FoldPlan::test_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] == fold) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldPlan::train_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] != fold) out.push_back(i);
  return out;
}

FoldPlan stratified_kfold(const std::vector<int>& y, std::size_t k, std::uint64_t seed, bool allow_empty_class) {
  if (k < 2) throw ValidationError("cross-validation needs k >= 2");
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.assignments.assign(y.size(), 0);
  std::array<std::vector<std::size_t>, 2> members;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 0 && y[i] != 1) throw ValidationError("stratified_kfold: labels must be 0 or 1");
    members[static_cast<std::size_t>(y[i])].push_back(i);
  }
  Rng rng(seed);
  std::size_t offset = 0;
  for (int c = 0; c < 2; ++c) {
    auto& m = members[c];
    if (m.empty() && allow_empty_class) continue;
    if (m.size() < k)
      throw ValidationError("stratified " + std::to_string(k) + "-fold split impossible: class " + std::to_string(c) +
                            " has only " + std::to_string(m.size()) + " member(s)");
    rng.shuffle(m);
    for (std::size_t j = 0; j < m.size(); ++j) plan.assignments[m[j]] = (offset + j) % k;
    offset = (offset + m.size()) % k;
  }
  return plan;
}

EvalReport cross_validate(const ClassifierSpec& spec, const Dataset& data, const CvOptions& options) {
  spec.validate();
  data.validate();
  const auto plan = stratified_kfold(data.y, options.k, options.seed);
  std::vector<EvalReport> folds(options.k);
  parallel_for(options.k, options.jobs, [&](std::size_t f) {
    const auto model = train(spec, data.subset(plan.train_indices(f)));
    const auto test_idx = plan.test_indices(f);
    std::vector<int> pred, gold;
    for (auto i : test_idx) {
      pred.push_back(model->predict(data.x[i]));
      gold.push_back(data.y[i]);
    }
    folds[f] = classification_report(pred, gold);
  });
  auto report = aggregate(std::string(algorithm_name(spec.algo)) + " " + std::to_string(options.k) + "-fold", folds);
  // Class-0 scores as extra fold metrics.
  std::map<std::string, std::vector<double>> extra;
  for (const auto& f : folds) {
    const auto& s = f.per_class.at("0");
    extra["precision_0"].push_back(s.precision);
    extra["recall_0"].push_back(s.recall);
    extra["f1_0"].push_back(s.f1);
  }
  for (const auto& [k, vs] : extra) add_summary(report, k, vs);
  return report;
}

std::vector<CharSpan> token_offsets(const TaggedSentence& s) {
  if (s.offsets.size() == s.size()) return s.offsets;
  std::vector<CharSpan> out;
  std::size_t pos = 0;
  for (const auto& t : s.tokens) {
    out.push_back({pos, pos + t.size()});
    pos += t.size() + 1;
  }
  return out;
}

EvalReport chunk_report(const std::vector<TaggedSentence>& gold, const std::vector<std::vector<Chunk>>& pred) {
  std::vector<std::vector<Chunk>> gold_labels;
  std::vector<std::string> ids;
  for (const auto& s : gold) {
    if (s.chunks.size() != s.size()) throw ValidationError("sentence '" + s.id + "' has no gold chunk labels");
    gold_labels.push_back(s.chunks);
    ids.push_back(s.id);
  }
  auto report = token_chunk_f1(pred, gold_labels, ids);
  std::vector<SpanAnnotation> p, g;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto offsets = token_offsets(gold[i]);
    p.push_back(labels_to_spans(pred[i], offsets));
    g.push_back(labels_to_spans(gold[i].chunks, offsets));
  }
  report.exact_match = exact_match(p, g);
  return report;
}

EvalReport cross_validate_crf(const std::vector<TaggedSentence>& data, const FeatureTemplateSet& templates,
                              const TrainConfig& cfg, const CvOptions& options) {
  templates.validate();
  cfg.validate();
  if (data.empty()) throw ValidationError("cross-validation needs data");
  std::vector<int> strata;
  for (const auto& s : data) {
    if (s.chunks.size() != s.size()) throw ValidationError("sentence '" + s.id + "' has no gold chunk labels");
    strata.push_back(std::count(s.chunks.begin(), s.chunks.end(), Chunk::A) > 0 ? 1 : 0);
  }
  const auto plan = stratified_kfold(strata, options.k, options.seed, true);
  std::vector<EvalReport> folds(options.k);
  parallel_for(options.k, options.jobs, [&](std::size_t f) {
    std::vector<TaggedSentence> train_set, test_set;
    for (auto i : plan.train_indices(f)) train_set.push_back(data[i]);
    for (auto i : plan.test_indices(f)) test_set.push_back(data[i]);
    const auto model = train_crf(train_set, templates, cfg);
    std::vector<std::vector<Chunk>> pred;
    for (const auto& s : test_set) pred.push_back(predict_chunks(model, s));
    folds[f] = chunk_report(test_set, pred);
  });
  auto report = aggregate("CRF " + std::to_string(options.k) + "-fold", folds);
  std::map<std::string, std::vector<double>> extra;
  for (const auto& f : folds) {
    extra["f1_A"].push_back(f.per_class.at("A").f1);
    extra["f1_C"].push_back(f.per_class.at("C").f1);
  }
  for (const auto& [k, vs] : extra) add_summary(report, k, vs);
  return report;
}

}  // namespace cfd
