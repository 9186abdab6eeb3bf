#include "cfdetect/crf.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>
#include <thread>

#include "cfdetect/error.hpp"
#include "cfdetect/io.hpp"
#include "cfdetect/rng.hpp"

namespace cfd {

namespace {

const std::string kStart = "<S>";
const std::string kEnd = "</S>";

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

double log_sum_exp(const double* v, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, v[i]);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

using Row = std::array<double, 3>;

// Emission and transition scores of one sentence; weights are scale * w.
struct Scores {
  std::vector<Row> emit;
  std::array<double, 9> trans;
};

Scores compute_scores(const double* w, double scale, std::size_t n_features, const FeatureIds& x) {
  Scores s;
  s.emit.assign(x.size(), Row{0.0, 0.0, 0.0});
  for (std::size_t t = 0; t < x.size(); ++t) {
    for (auto f : x[t]) {
      if (f >= n_features) throw ValidationError("crf: feature id out of range");
      for (std::size_t y = 0; y < 3; ++y) s.emit[t][y] += w[f * 3 + y];
    }
    for (auto& e : s.emit[t]) e *= scale;
  }
  const double* tw = w + n_features * 3;
  for (std::size_t k = 0; k < 9; ++k) s.trans[k] = scale * tw[k];
  return s;
}

Scores model_scores(const CrfModel& model, const FeatureIds& x) {
  Scores s;
  s.emit.assign(x.size(), Row{0.0, 0.0, 0.0});
  for (std::size_t t = 0; t < x.size(); ++t)
    for (auto f : x[t]) {
      if (f >= model.num_features()) throw ValidationError("crf: feature id out of range");
      for (std::size_t y = 0; y < 3; ++y) s.emit[t][y] += model.state_weights[f * 3 + y];
    }
  s.trans = model.transition_weights;
  return s;
}

struct ForwardBackward {
  std::vector<Row> alpha;
  std::vector<Row> beta;
  double log_z = 0.0;
};

ForwardBackward forward_backward(const Scores& s) {
  const std::size_t T = s.emit.size();
  ForwardBackward fb;
  fb.alpha.resize(T);
  fb.beta.resize(T);
  if (T == 0) return fb;
  fb.alpha[0] = s.emit[0];
  double tmp[3];
  for (std::size_t t = 1; t < T; ++t)
    for (std::size_t y = 0; y < 3; ++y) {
      for (std::size_t a = 0; a < 3; ++a) tmp[a] = fb.alpha[t - 1][a] + s.trans[a * 3 + y];
      fb.alpha[t][y] = s.emit[t][y] + log_sum_exp(tmp, 3);
    }
  fb.beta[T - 1] = Row{0.0, 0.0, 0.0};
  for (std::size_t t = T - 1; t-- > 0;)
    for (std::size_t y = 0; y < 3; ++y) {
      for (std::size_t b = 0; b < 3; ++b) tmp[b] = s.trans[y * 3 + b] + s.emit[t + 1][b] + fb.beta[t + 1][b];
      fb.beta[t][y] = log_sum_exp(tmp, 3);
    }
  fb.log_z = log_sum_exp(fb.alpha[T - 1].data(), 3);
  return fb;
}

double gold_score(const Scores& s, const std::vector<Chunk>& y) {
  double total = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    const auto cur = static_cast<std::size_t>(y[t]);
    total += s.emit[t][cur];
    if (t > 0) total += s.trans[static_cast<std::size_t>(y[t - 1]) * 3 + cur];
  }
  return total;
}

// log p(y|x) of one instance; calls add(param index, d log p / d param).
template <typename Add>
double accumulate_instance(const Scores& s, const CrfInstance& inst, std::size_t n_features, Add&& add) {
  const std::size_t T = inst.features.size();
  if (inst.labels.size() != T) throw ValidationError("crf: label and feature lengths differ");
  if (T == 0) return 0.0;
  const auto fb = forward_backward(s);
  const std::size_t trans_off = n_features * 3;
  for (std::size_t t = 0; t < T; ++t) {
    const auto gold = static_cast<std::size_t>(inst.labels[t]);
    Row p;
    for (std::size_t y = 0; y < 3; ++y) p[y] = std::exp(fb.alpha[t][y] + fb.beta[t][y] - fb.log_z);
    for (auto f : inst.features[t])
      for (std::size_t y = 0; y < 3; ++y) add(f * 3 + y, (y == gold ? 1.0 : 0.0) - p[y]);
    if (t == 0) continue;
    const auto prev_gold = static_cast<std::size_t>(inst.labels[t - 1]);
    add(trans_off + prev_gold * 3 + gold, 1.0);
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = 0; b < 3; ++b) {
        const double pab = std::exp(fb.alpha[t - 1][a] + s.trans[a * 3 + b] + s.emit[t][b] + fb.beta[t][b] - fb.log_z);
        add(trans_off + a * 3 + b, -pab);
      }
  }
  return gold_score(s, inst.labels) - fb.log_z;
}

double squared_norm(const DenseVector& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

double dot(const DenseVector& a, const DenseVector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

bool parse_flag(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw ValidationError("template '" + key + "' expects 0 or 1, got '" + v + "'");
}

}  // namespace

// --- Templates ---------------------------------------------------------------

void FeatureTemplateSet::validate() const {
  if (!(use_token || use_lower_token || use_pos || use_ner || use_prev_next_token || use_prev_next_pos))
    throw ValidationError("crf: at least one feature template must be enabled");
  if (window < 1 || window > 2) throw ValidationError("crf: window must be 1 or 2");
}

std::string FeatureTemplateSet::to_string() const {
  auto b = [](bool v) { return v ? "1" : "0"; };
  return std::string("token=") + b(use_token) + " lower_token=" + b(use_lower_token) + " pos=" + b(use_pos) +
         " ner=" + b(use_ner) + " prev_next_token=" + b(use_prev_next_token) + " prev_next_pos=" +
         b(use_prev_next_pos) + " window=" + std::to_string(window);
}

FeatureTemplateSet FeatureTemplateSet::parse(std::string_view text) {
  FeatureTemplateSet t;
  t.use_token = t.use_lower_token = t.use_pos = t.use_ner = t.use_prev_next_token = t.use_prev_next_pos = false;
  for (const auto& item : io::split_ws(text)) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ValidationError("crf: expected key=value in templates, got '" + item + "'");
    const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
    if (key == "token") t.use_token = parse_flag(key, value);
    else if (key == "lower_token") t.use_lower_token = parse_flag(key, value);
    else if (key == "pos") t.use_pos = parse_flag(key, value);
    else if (key == "ner") t.use_ner = parse_flag(key, value);
    else if (key == "prev_next_token") t.use_prev_next_token = parse_flag(key, value);
    else if (key == "prev_next_pos") t.use_prev_next_pos = parse_flag(key, value);
    else if (key == "window") {
      try {
        t.window = static_cast<int>(io::parse_int(value));
      } catch (const FormatError&) {
        throw ValidationError("crf: window must be an integer");
      }
    } else {
      throw ValidationError("crf: unknown template '" + key + "'");
    }
  }
  t.validate();
  return t;
}

FeatureStrings extract_features(const TaggedSentence& tagged, const FeatureTemplateSet& templates) {
  templates.validate();
  const std::size_t T = tagged.size();
  const bool needs_pos = templates.use_pos || templates.use_prev_next_pos;
  if (needs_pos && tagged.tags.size() != T)
    throw ValidationError(std::string("crf: template ") + (templates.use_pos ? "use_pos" : "use_prev_next_pos") +
                          " needs a POS column (sentence '" + tagged.id + "')");
  if (templates.use_ner && tagged.ner.size() != T)
    throw ValidationError("crf: template use_ner needs an NER column (sentence '" + tagged.id + "')");

  const auto w = static_cast<std::ptrdiff_t>(templates.window);
  auto at = [&](const std::vector<std::string>& col, std::ptrdiff_t i) -> const std::string& {
    if (i < 0) return kStart;
    if (i >= static_cast<std::ptrdiff_t>(T)) return kEnd;
    return col[static_cast<std::size_t>(i)];
  };
  FeatureStrings out(T);
  for (std::size_t t = 0; t < T; ++t) {
    auto& f = out[t];
    const auto i = static_cast<std::ptrdiff_t>(t);
    if (templates.use_token) f.push_back("w=" + tagged.tokens[t]);
    if (templates.use_lower_token) f.push_back("lw=" + lower(tagged.tokens[t]));
    if (templates.use_pos) f.push_back("p=" + tagged.tags[t]);
    if (templates.use_ner) f.push_back("n=" + tagged.ner[t]);
    if (templates.use_prev_next_token)
      for (std::ptrdiff_t d = 1; d <= w; ++d) {
        f.push_back("w-" + std::to_string(d) + "=" + at(tagged.tokens, i - d));
        f.push_back("w+" + std::to_string(d) + "=" + at(tagged.tokens, i + d));
      }
    if (templates.use_prev_next_pos)
      for (std::ptrdiff_t d = 1; d <= w; ++d) {
        f.push_back("p-" + std::to_string(d) + "=" + at(tagged.tags, i - d));
        f.push_back("p+" + std::to_string(d) + "=" + at(tagged.tags, i + d));
      }
  }
  return out;
}

// --- Model ---------------------------------------------------------------------

std::size_t CrfModel::add_feature(const std::string& feature) {
  auto [it, inserted] = feature_index.emplace(feature, features.size());
  if (inserted) {
    features.push_back(feature);
    state_weights.resize(features.size() * 3, 0.0);
  }
  return it->second;
}

long long CrfModel::feature_id(std::string_view feature) const {
  auto it = feature_index.find(std::string(feature));
  return it == feature_index.end() ? -1 : static_cast<long long>(it->second);
}

DenseVector CrfModel::params() const {
  DenseVector p = state_weights;
  p.insert(p.end(), transition_weights.begin(), transition_weights.end());
  return p;
}

void CrfModel::set_params(const DenseVector& params) {
  if (params.size() != num_params()) throw ValidationError("crf: parameter vector has the wrong size");
  std::copy(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(state_weights.size()), state_weights.begin());
  std::copy(params.end() - 9, params.end(), transition_weights.begin());
}

void CrfModel::validate() const {
  if (state_weights.size() != features.size() * 3) throw ValidationError("crf: state weights disagree with features");
  if (feature_index.size() != features.size()) throw ValidationError("crf: feature index disagrees with features");
  for (const auto& [f, id] : feature_index)
    if (id >= features.size() || features[id] != f) throw ValidationError("crf: corrupt feature index");
  if (l2 < 0) throw ValidationError("crf: l2 must be >= 0");
}

std::string CrfModel::serialize() const {
  std::string out = "cfdetect-crf v1\n";
  out += "templates " + templates.to_string() + "\n";
  out += "l2 " + io::format_double(l2) + "\n";
  out += "transitions\n";
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t b = 0; b < 3; ++b) {
      if (b) out += ' ';
      out += io::format_double(transition_weights[a * 3 + b]);
    }
    out += '\n';
  }
  out += "features " + std::to_string(features.size()) + "\n";
  for (std::size_t f = 0; f < features.size(); ++f) {
    out += features[f];
    for (std::size_t y = 0; y < 3; ++y) out += "\t" + io::format_double(state_weights[f * 3 + y]);
    out += '\n';
  }
  return out;
}

CrfModel CrfModel::deserialize(std::string_view text) {
  auto lines = io::split(text, '\n');
  for (auto& l : lines)
    if (!l.empty() && l.back() == '\r') l.pop_back();
  std::size_t n = 0;
  auto next = [&]() -> const std::string& {
    if (n >= lines.size()) throw FormatError("crf model: unexpected end of file", n);
    return lines[n++];
  };
  auto keyword = [&](const std::string& line, std::string_view kw) {
    if (line.rfind(std::string(kw), 0) != 0) throw FormatError("crf model: expected '" + std::string(kw) + "'", n);
    return io::trim(std::string_view(line).substr(kw.size()));
  };

  CrfModel m;
  if (next() != "cfdetect-crf v1") throw FormatError("crf model: missing 'cfdetect-crf v1' header", 1);
  try {
    m.templates = FeatureTemplateSet::parse(keyword(next(), "templates"));
  } catch (const ValidationError& e) {
    throw FormatError(std::string("crf model: ") + e.what(), n);
  }
  m.l2 = io::parse_double(keyword(next(), "l2"));
  keyword(next(), "transitions");
  for (std::size_t a = 0; a < 3; ++a) {
    const auto cols = io::split_ws(next());
    if (cols.size() != 3) throw FormatError("crf model: transition row needs 3 values", n);
    for (std::size_t b = 0; b < 3; ++b) m.transition_weights[a * 3 + b] = io::parse_double(cols[b]);
  }
  const auto count = io::parse_int(keyword(next(), "features"));
  if (count < 0) throw FormatError("crf model: negative feature count", n);
  for (long long k = 0; k < count; ++k) {
    const auto cols = io::split(next(), '\t');
    if (cols.size() != 4) throw FormatError("crf model: expected feature and 3 weights", n);
    if (m.feature_index.count(cols[0])) throw FormatError("crf model: duplicate feature '" + cols[0] + "'", n);
    const auto id = m.add_feature(cols[0]);
    for (std::size_t y = 0; y < 3; ++y) m.state_weights[id * 3 + y] = io::parse_double(cols[y + 1]);
  }
  while (n < lines.size())
    if (!io::trim(lines[n++]).empty()) throw FormatError("crf model: trailing content", n);
  m.validate();
  return m;
}

void CrfModel::save(const std::filesystem::path& path) const { io::write_file_atomic(path, serialize()); }

CrfModel CrfModel::load(const std::filesystem::path& path) { return deserialize(io::read_file(path)); }

FeatureIds encode_features(const CrfModel& model, const FeatureStrings& features) {
  FeatureIds ids(features.size());
  for (std::size_t t = 0; t < features.size(); ++t)
    for (const auto& f : features[t]) {
      auto it = model.feature_index.find(f);
      if (it != model.feature_index.end()) ids[t].push_back(it->second);
    }
  return ids;
}

// --- Inference -----------------------------------------------------------

double sequence_score(const CrfModel& model, const FeatureIds& x, const std::vector<Chunk>& y) {
  if (x.size() != y.size()) throw ValidationError("crf: label and feature lengths differ");
  return gold_score(model_scores(model, x), y);
}

double log_partition(const CrfModel& model, const FeatureIds& x) { return forward_backward(model_scores(model, x)).log_z; }

std::pair<double, DenseVector> log_likelihood_and_gradient(const CrfModel& model, const std::vector<CrfInstance>& batch,
                                                           std::size_t jobs) {
  const DenseVector w = model.params();
  const std::size_t F = model.num_features();
  const std::size_t P = w.size();
  jobs = std::max<std::size_t>(1, std::min(jobs, batch.size()));

  std::vector<double> values(jobs, 0.0);
  std::vector<DenseVector> grads(jobs, DenseVector(P, 0.0));
  auto work = [&](std::size_t j) {
    const std::size_t lo = batch.size() * j / jobs, hi = batch.size() * (j + 1) / jobs;
    auto& g = grads[j];
    for (std::size_t i = lo; i < hi; ++i) {
      const auto s = compute_scores(w.data(), 1.0, F, batch[i].features);
      values[j] += accumulate_instance(s, batch[i], F, [&](std::size_t k, double v) { g[k] += v; });
    }
  };
  if (jobs == 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(jobs);
    for (std::size_t j = 0; j < jobs; ++j)
      threads.emplace_back([&, j] {
        try {
          work(j);
        } catch (...) {
          errors[j] = std::current_exception();
        }
      });
    for (auto& t : threads) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  double value = 0.0;
  DenseVector grad(P, 0.0);
  for (std::size_t j = 0; j < jobs; ++j) {
    value += values[j];
    for (std::size_t k = 0; k < P; ++k) grad[k] += grads[j][k];
  }
  value -= 0.5 * model.l2 * squared_norm(w);
  for (std::size_t k = 0; k < P; ++k) grad[k] -= model.l2 * w[k];
  return {value, std::move(grad)};
}

std::vector<Chunk> viterbi(const CrfModel& model, const FeatureIds& x) {
  const std::size_t T = x.size();
  if (T == 0) return {};
  const auto s = model_scores(model, x);
  // best[t][y]: highest score of positions t..T-1 given label y at t.
  std::vector<Row> best(T);
  best[T - 1] = s.emit[T - 1];
  for (std::size_t t = T - 1; t-- > 0;)
    for (std::size_t y = 0; y < 3; ++y) {
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t z = 0; z < 3; ++z) m = std::max(m, s.trans[y * 3 + z] + best[t + 1][z]);
      best[t][y] = s.emit[t][y] + m;
    }
  // Walking forward and taking the first maximizer yields the smallest
  // label sequence among the optimal ones.
  std::vector<Chunk> out(T);
  std::size_t prev = 0;
  for (std::size_t t = 0; t < T; ++t) {
    std::size_t arg = 0;
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t y = 0; y < 3; ++y) {
      const double v = (t == 0 ? 0.0 : s.trans[prev * 3 + y]) + best[t][y];
      if (v > m) {
        m = v;
        arg = y;
      }
    }
    out[t] = static_cast<Chunk>(arg);
    prev = arg;
  }
  return out;
}

std::vector<Chunk> viterbi(const CrfModel& model, const FeatureStrings& x) {
  return viterbi(model, encode_features(model, x));
}

std::vector<Row> marginals(const CrfModel& model, const FeatureIds& x) {
  const auto s = model_scores(model, x);
  const auto fb = forward_backward(s);
  std::vector<Row> out(x.size());
  for (std::size_t t = 0; t < x.size(); ++t)
    for (std::size_t y = 0; y < 3; ++y) out[t][y] = std::exp(fb.alpha[t][y] + fb.beta[t][y] - fb.log_z);
  return out;
}

SpanAnnotation labels_to_spans(const std::vector<Chunk>& labels, const std::vector<CharSpan>& offsets) {
  if (labels.size() != offsets.size())
    throw ValidationError("labels_to_spans: " + std::to_string(labels.size()) + " labels for " +
                          std::to_string(offsets.size()) + " tokens");
  SpanAnnotation ann;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    std::optional<CharSpan>* target = nullptr;
    if (labels[t] == Chunk::A) target = &ann.antecedent;
    else if (labels[t] == Chunk::C) target = &ann.consequent;
    else continue;
    if (!*target) *target = offsets[t];
    else (*target)->end = offsets[t].end;
  }
  return ann;
}

// --- Training ------------------------------------------------------------

Optimizer parse_optimizer(std::string_view name) {
  if (name == "SGD" || name == "sgd") return Optimizer::SGD;
  if (name == "LBFGS" || name == "lbfgs") return Optimizer::LBFGS;
  throw ValidationError("unknown optimizer '" + std::string(name) + "' (expected SGD or LBFGS)");
}

std::string_view optimizer_name(Optimizer o) { return o == Optimizer::SGD ? "SGD" : "LBFGS"; }

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("crf: epochs must be >= 1");
  if (!(learning_rate >= 0)) throw ValidationError("crf: learning_rate must be >= 0");
  if (!(l2 >= 0)) throw ValidationError("crf: l2 must be >= 0");
  if (jobs < 1) throw ValidationError("crf: jobs must be >= 1");
}

namespace {

void train_sgd(CrfModel& model, const std::vector<CrfInstance>& data, const TrainConfig& cfg, std::ostream* log) {
  const std::size_t F = model.num_features();
  DenseVector v = model.params();
  double scale = 1.0;
  const double n = static_cast<double>(data.size());
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(cfg.seed);
  for (int e = 0; e < cfg.epochs; ++e) {
    rng.shuffle(order);
    const double eta = cfg.learning_rate / std::sqrt(1.0 + e);
    double objective = 0.0;
    for (auto i : order) {
      const auto s = compute_scores(v.data(), scale, F, data[i].features);
      const double decay = 1.0 - eta * cfg.l2 / n;
      if (decay <= 0.0) throw TrainingError("crf: learning_rate * l2 too large for SGD");
      objective += accumulate_instance(s, data[i], F, [&](std::size_t k, double g) { v[k] += eta * g / (scale * decay); });
      scale *= decay;
      if (scale < 1e-9) {
        for (auto& x : v) x *= scale;
        scale = 1.0;
      }
    }
    if (log) {
      *log << "crf sgd epoch " << (e + 1) << " objective "
           << io::format_double(objective - 0.5 * cfg.l2 * scale * scale * squared_norm(v)) << "\n";
    }
  }
  for (auto& x : v) x *= scale;
  model.set_params(v);
}

void train_lbfgs(CrfModel& model, const std::vector<CrfInstance>& data, const TrainConfig& cfg, std::ostream* log) {
  constexpr std::size_t kHistory = 10;
  // Minimizes the negative penalized log-likelihood.
  auto evaluate = [&](const DenseVector& x, DenseVector& g) {
    model.set_params(x);
    auto [value, grad] = log_likelihood_and_gradient(model, data, cfg.jobs);
    for (auto& gi : grad) gi = -gi;
    g = std::move(grad);
    return -value;
  };

  DenseVector x = model.params();
  DenseVector g;
  double f = evaluate(x, g);
  std::deque<std::pair<DenseVector, DenseVector>> history;
  std::deque<double> rhos;
  const std::size_t P = x.size();

  for (int it = 0; it < cfg.epochs; ++it) {
    const double g_norm = std::sqrt(squared_norm(g));
    if (g_norm <= 1e-9 * std::max(1.0, std::sqrt(squared_norm(x)))) break;

    DenseVector d(P);
    if (history.empty()) {
      for (std::size_t k = 0; k < P; ++k) d[k] = -g[k] / g_norm;
    } else {
      DenseVector q = g;
      std::vector<double> alphas(history.size());
      for (std::size_t h = history.size(); h-- > 0;) {
        alphas[h] = rhos[h] * dot(history[h].first, q);
        for (std::size_t k = 0; k < P; ++k) q[k] -= alphas[h] * history[h].second[k];
      }
      const auto& [s_last, y_last] = history.back();
      const double gamma = dot(s_last, y_last) / dot(y_last, y_last);
      for (auto& qk : q) qk *= gamma;
      for (std::size_t h = 0; h < history.size(); ++h) {
        const double beta = rhos[h] * dot(history[h].second, q);
        for (std::size_t k = 0; k < P; ++k) q[k] += (alphas[h] - beta) * history[h].first[k];
      }
      for (std::size_t k = 0; k < P; ++k) d[k] = -q[k];
    }
    double gd = dot(g, d);
    if (!(gd < 0)) {
      history.clear();
      rhos.clear();
      for (std::size_t k = 0; k < P; ++k) d[k] = -g[k] / g_norm;
      gd = -g_norm;
    }

    double step = 1.0;
    DenseVector x_new(P), g_new;
    double f_new = 0.0;
    bool accepted = false;
    for (int tries = 0; tries < 60; ++tries) {
      for (std::size_t k = 0; k < P; ++k) x_new[k] = x[k] + step * d[k];
      f_new = evaluate(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * gd) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    DenseVector s(P), y(P);
    for (std::size_t k = 0; k < P; ++k) {
      s[k] = x_new[k] - x[k];
      y[k] = g_new[k] - g[k];
    }
    const double sy = dot(s, y);
    if (sy > 1e-12) {
      history.emplace_back(std::move(s), std::move(y));
      rhos.push_back(1.0 / sy);
      if (history.size() > kHistory) {
        history.pop_front();
        rhos.pop_front();
      }
    }
    const double improvement = f - f_new;
    x = std::move(x_new);
    g = std::move(g_new);
    f = f_new;
    if (log) *log << "crf lbfgs iteration " << (it + 1) << " objective " << io::format_double(-f) << "\n";
    if (improvement <= 1e-10 * std::max(1.0, std::abs(f))) break;
  }
  model.set_params(x);
}

}  // namespace

CrfModel train_crf(const std::vector<TaggedSentence>& data, const FeatureTemplateSet& templates, const TrainConfig& cfg,
                   std::ostream* log) {
  templates.validate();
  cfg.validate();
  if (data.empty()) throw TrainingError("crf: empty training data");

  std::vector<FeatureStrings> extracted;
  extracted.reserve(data.size());
  std::set<std::string> vocabulary;
  for (const auto& s : data) {
    if (!s.has_chunks() || s.chunks.size() != s.size())
      throw TrainingError("crf: sentence '" + s.id + "' has no gold chunk labels");
    extracted.push_back(extract_features(s, templates));
    for (const auto& pos : extracted.back()) vocabulary.insert(pos.begin(), pos.end());
  }

  CrfModel model;
  model.templates = templates;
  model.l2 = cfg.l2;
  for (const auto& f : vocabulary) model.add_feature(f);

  std::vector<CrfInstance> instances;
  instances.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    instances.push_back({encode_features(model, extracted[i]), data[i].chunks});

  if (cfg.optimizer == Optimizer::SGD) train_sgd(model, instances, cfg, log);
  else train_lbfgs(model, instances, cfg, log);
  return model;
}

std::vector<Chunk> predict_chunks(const CrfModel& model, const TaggedSentence& tagged) {
  return viterbi(model, extract_features(tagged, model.templates));
}

}  // namespace cfd
