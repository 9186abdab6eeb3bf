#include "cfdetect/classify.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <set>

#include "cfdetect/error.hpp"
#include "cfdetect/io.hpp"
#include "cfdetect/rng.hpp"

namespace cfd {

namespace {

constexpr std::array<std::string_view, 7> kAlgoNames = {"NB", "LOGIT", "SVM", "KNN", "CART", "RF", "MLP"};

const std::map<Algorithm, std::map<std::string, std::string>>& default_params() {
  static const std::map<Algorithm, std::map<std::string, std::string>> kDefaults = {
      {Algorithm::NB, {{"alpha", "1"}}},
      {Algorithm::LOGIT, {{"alpha", "1e-4"}, {"l1_ratio", "0.5"}, {"learning_rate", "0.1"}, {"epochs", "20"}, {"seed", "0"}}},
      {Algorithm::SVM, {{"C", "1"}, {"epochs", "20"}, {"seed", "0"}}},
      {Algorithm::KNN, {{"n_neighbors", "3"}}},
      {Algorithm::CART,
       {{"criterion", "gini"}, {"max_depth", "0"}, {"min_samples_split", "2"}, {"max_features", "all"}, {"seed", "0"}}},
      {Algorithm::RF,
       {{"n_trees", "100"},
        {"criterion", "gini"},
        {"max_depth", "0"},
        {"min_samples_split", "2"},
        {"max_features", "sqrt"},
        {"bootstrap", "1"},
        {"seed", "0"}}},
      {Algorithm::MLP,
       {{"hidden_units", "100"},
        {"learning_rate", "0.1"},
        {"epochs", "50"},
        {"batch_size", "32"},
        {"l2", "1e-4"},
        {"seed", "0"}}},
  };
  return kDefaults;
}

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double squared_distance(const SparseVector& a, const SparseVector& b) {
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.entries.size() || j < b.entries.size()) {
    if (j == b.entries.size() || (i < a.entries.size() && a.entries[i].first < b.entries[j].first)) {
      d += a.entries[i].second * a.entries[i].second;
      ++i;
    } else if (i == a.entries.size() || b.entries[j].first < a.entries[i].first) {
      d += b.entries[j].second * b.entries[j].second;
      ++j;
    } else {
      const double diff = a.entries[i].second - b.entries[j].second;
      d += diff * diff;
      ++i;
      ++j;
    }
  }
  return d;
}

void require_both_classes(const Dataset& data, std::string_view algo) {
  const auto pos = std::count(data.y.begin(), data.y.end(), 1);
  if (pos == 0 || static_cast<std::size_t>(pos) == data.size())
    throw TrainingError(std::string(algo) + ": training data contains a single class");
}

std::size_t resolve_max_features(const std::string& v, std::size_t dim) {
  if (v == "all") return dim;
  if (v == "sqrt") return std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(dim))));
  if (v == "log2") return std::max<std::size_t>(1, static_cast<std::size_t>(std::log2(std::max<std::size_t>(dim, 1))));
  const auto n = io::parse_int(v);
  if (n < 1) throw ValidationError("max_features must be >= 1");
  return std::min(static_cast<std::size_t>(n), dim);
}

std::string join_doubles(const DenseVector& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += io::format_double(v[i]);
  }
  return out;
}

class LineReader {
 public:
  explicit LineReader(std::string_view text) : lines_(io::split(text, '\n')) {
    for (auto& l : lines_)
      if (!l.empty() && l.back() == '\r') l.pop_back();
  }
  const std::string& next() {
    while (pos_ < lines_.size() && lines_[pos_].empty()) ++pos_;
    if (pos_ == lines_.size()) throw FormatError("classifier: unexpected end of model file", pos_);
    return lines_[pos_++];
  }
  // Splits the next line and checks its keyword.
  std::vector<std::string> expect(std::string_view keyword) {
    auto cols = io::split_ws(next());
    if (cols.empty() || cols[0] != keyword)
      throw FormatError("classifier: expected '" + std::string(keyword) + "'", pos_);
    return cols;
  }
  std::size_t line() const { return pos_; }

 private:
  std::vector<std::string> lines_;
  std::size_t pos_ = 0;
};

DenseVector parse_doubles(const std::vector<std::string>& cols, std::size_t from, std::size_t expected, std::size_t line) {
  if (cols.size() - from != expected)
    throw FormatError("classifier: expected " + std::to_string(expected) + " values", line);
  DenseVector v;
  v.reserve(expected);
  for (std::size_t k = from; k < cols.size(); ++k) v.push_back(io::parse_double(cols[k]));
  return v;
}

}  // namespace

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::string_view algorithm_name(Algorithm a) { return kAlgoNames[static_cast<std::size_t>(a)]; }

Algorithm parse_algorithm(std::string_view name) {
  std::string upper(name);
  for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (std::size_t i = 0; i < kAlgoNames.size(); ++i)
    if (upper == kAlgoNames[i]) return static_cast<Algorithm>(i);
  throw ValidationError("unknown classifier '" + std::string(name) + "' (expected NB, LOGIT, SVM, KNN, CART, RF or MLP)");
}

// --- ClassifierSpec ----------------------------------------------------------

ClassifierSpec ClassifierSpec::with_defaults(Algorithm algo, std::map<std::string, std::string> overrides) {
  ClassifierSpec s;
  s.algo = algo;
  s.params = default_params().at(algo);
  for (auto& [k, v] : overrides) s.params[k] = std::move(v);
  s.validate();
  return s;
}

double ClassifierSpec::real(const std::string& key) const {
  try {
    return io::parse_double(text(key));
  } catch (const FormatError&) {
    throw ValidationError("parameter '" + key + "' must be a number");
  }
}

long long ClassifierSpec::integer(const std::string& key) const {
  try {
    return io::parse_int(text(key));
  } catch (const FormatError&) {
    throw ValidationError("parameter '" + key + "' must be an integer");
  }
}

const std::string& ClassifierSpec::text(const std::string& key) const {
  auto it = params.find(key);
  if (it == params.end())
    throw ValidationError(std::string(algorithm_name(algo)) + ": missing parameter '" + key + "'");
  return it->second;
}

void ClassifierSpec::validate() const {
  const auto& known = default_params().at(algo);
  for (const auto& [k, _] : params)
    if (!known.count(k))
      throw ValidationError(std::string(algorithm_name(algo)) + ": unknown parameter '" + k + "'");
  for (const auto& [k, _] : known) text(k);

  auto positive = [&](const char* key) {
    if (!(real(key) > 0)) throw ValidationError(std::string(key) + " must be > 0");
  };
  auto non_negative_int = [&](const char* key) {
    if (integer(key) < 0) throw ValidationError(std::string(key) + " must be >= 0");
  };
  switch (algo) {
    case Algorithm::NB:
      positive("alpha");
      break;
    case Algorithm::LOGIT: {
      const double r = real("l1_ratio");
      if (r < 0 || r > 1) throw ValidationError("l1_ratio must lie in [0, 1]");
      if (real("alpha") < 0) throw ValidationError("alpha must be >= 0");
      if (real("learning_rate") < 0) throw ValidationError("learning_rate must be >= 0");
      non_negative_int("epochs");
      integer("seed");
      break;
    }
    case Algorithm::SVM:
      positive("C");
      non_negative_int("epochs");
      integer("seed");
      break;
    case Algorithm::KNN:
      if (integer("n_neighbors") < 1) throw ValidationError("n_neighbors must be >= 1");
      break;
    case Algorithm::RF:
      if (integer("n_trees") < 1) throw ValidationError("n_trees must be >= 1");
      if (integer("bootstrap") != 0 && integer("bootstrap") != 1) throw ValidationError("bootstrap must be 0 or 1");
      [[fallthrough]];
    case Algorithm::CART: {
      if (text("criterion") != "gini") throw ValidationError("criterion must be 'gini'");
      non_negative_int("max_depth");
      if (integer("min_samples_split") < 2) throw ValidationError("min_samples_split must be >= 2");
      const auto& mf = text("max_features");
      if (mf != "all" && mf != "sqrt" && mf != "log2") {
        long long n = 0;
        try {
          n = io::parse_int(mf);
        } catch (const FormatError&) {
          throw ValidationError("max_features must be all, sqrt, log2 or a positive integer");
        }
        if (n < 1) throw ValidationError("max_features must be >= 1");
      }
      integer("seed");
      break;
    }
    case Algorithm::MLP:
      if (integer("hidden_units") < 1) throw ValidationError("hidden_units must be >= 1");
      if (real("learning_rate") < 0) throw ValidationError("learning_rate must be >= 0");
      non_negative_int("epochs");
      if (integer("batch_size") < 1) throw ValidationError("batch_size must be >= 1");
      if (real("l2") < 0) throw ValidationError("l2 must be >= 0");
      integer("seed");
      break;
  }
}

// --- Dataset -------------------------------------------------------------------

Dataset Dataset::from_dense(const std::vector<DenseVector>& x, const std::vector<int>& y) {
  Dataset d;
  d.dim = x.empty() ? 0 : x.front().size();
  for (const auto& v : x) d.x.push_back(SparseVector::from_dense(v));
  d.y = y;
  return d;
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset d;
  d.dim = dim;
  d.x.reserve(indices.size());
  d.y.reserve(indices.size());
  for (auto i : indices) {
    d.x.push_back(x[i]);
    d.y.push_back(y[i]);
  }
  return d;
}

void Dataset::validate() const {
  if (y.empty()) throw ValidationError("dataset is empty");
  if (x.size() != y.size()) throw ValidationError("dataset has mismatched x and y lengths");
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 0 && y[i] != 1) throw ValidationError("dataset labels must be 0 or 1");
    if (x[i].dim != dim)
      throw ValidationError("dataset row " + std::to_string(i) + " has dimension " + std::to_string(x[i].dim) +
                            ", expected " + std::to_string(dim));
  }
}

// --- Classifier --------------------------------------------------------------

double Classifier::predict_proba(const SparseVector& x) const {
  if (x.dim != dim_)
    throw ValidationError("dimension mismatch: model expects " + std::to_string(dim_) + ", got " +
                          std::to_string(x.dim));
  return proba(x);
}

int Classifier::predict(const SparseVector& x) const {
  if (x.dim != dim_)
    throw ValidationError("dimension mismatch: model expects " + std::to_string(dim_) + ", got " +
                          std::to_string(x.dim));
  return decide(x);
}

std::string Classifier::serialize() const {
  std::string out = "cfdetect-classifier v1 " + std::string(algorithm_name(spec_.algo)) + "\n";
  out += "dim " + std::to_string(dim_) + "\n";
  for (const auto& [k, v] : spec_.params) out += "param " + k + " " + v + "\n";
  out += "state\n";
  write_state(out);
  return out;
}

void Classifier::save(const std::filesystem::path& path) const { io::write_file_atomic(path, serialize()); }

// --- Naive Bayes -----------------------------------------------------------

NaiveBayes::NaiveBayes(ClassifierSpec spec, std::size_t dim, std::array<double, 2> log_prior,
                       std::array<std::vector<double>, 2> log_likelihood)
    : Classifier(std::move(spec), dim), log_prior_(log_prior), log_likelihood_(std::move(log_likelihood)) {}

std::unique_ptr<NaiveBayes> NaiveBayes::fit(const ClassifierSpec& spec, const Dataset& data) {
  const double alpha = spec.real("alpha");
  std::array<std::vector<double>, 2> counts = {std::vector<double>(data.dim, 0.0), std::vector<double>(data.dim, 0.0)};
  std::array<double, 2> class_n = {0, 0};
  for (std::size_t r = 0; r < data.size(); ++r) {
    const int c = data.y[r];
    class_n[c] += 1;
    for (const auto& [i, v] : data.x[r].entries) {
      if (v < 0) throw TrainingError("NB: features must be non-negative");
      counts[c][i] += v;
    }
  }
  std::array<double, 2> log_prior;
  std::array<std::vector<double>, 2> ll;
  for (int c = 0; c < 2; ++c) {
    log_prior[c] = std::log(class_n[c] / static_cast<double>(data.size()));
    const double total = std::accumulate(counts[c].begin(), counts[c].end(), 0.0);
    const double denom = total + alpha * static_cast<double>(data.dim);
    ll[c].resize(data.dim);
    for (std::size_t i = 0; i < data.dim; ++i) ll[c][i] = std::log((counts[c][i] + alpha) / denom);
  }
  return std::make_unique<NaiveBayes>(spec, data.dim, log_prior, std::move(ll));
}

std::array<double, 2> NaiveBayes::posterior(const SparseVector& x) const {
  std::array<double, 2> s = log_prior_;
  for (int c = 0; c < 2; ++c)
    for (const auto& [i, v] : x.entries) s[c] += v * log_likelihood_[c][i];
  const double m = std::max(s[0], s[1]);
  const double e0 = std::exp(s[0] - m), e1 = std::exp(s[1] - m);
  return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

void NaiveBayes::write_state(std::string& out) const {
  out += "prior " + io::format_double(log_prior_[0]) + " " + io::format_double(log_prior_[1]) + "\n";
  for (int c = 0; c < 2; ++c) out += "loglik " + join_doubles(log_likelihood_[c]) + "\n";
}

// --- Logistic regression -----------------------------------------------

double elastic_net_penalty(const DenseVector& w, double lambda, double l1_ratio) {
  double l1 = 0.0, l2 = 0.0;
  for (double x : w) {
    l1 += std::abs(x);
    l2 += x * x;
  }
  return lambda * (l1_ratio * l1 + (1.0 - l1_ratio) * 0.5 * l2);
}

double LogisticObjective::value(const DenseVector& params) const {
  const std::size_t d = data.dim;
  const DenseVector w(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(d));
  double loss = 0.0;
  for (std::size_t r = 0; r < data.size(); ++r) {
    const double z = data.x[r].dot(params) + params[d];
    loss += softplus(z) - data.y[r] * z;
  }
  return loss / static_cast<double>(data.size()) + elastic_net_penalty(w, lambda, l1_ratio);
}

DenseVector LogisticObjective::gradient(const DenseVector& params) const {
  const std::size_t d = data.dim;
  DenseVector g(d + 1, 0.0);
  const double inv_n = 1.0 / static_cast<double>(data.size());
  for (std::size_t r = 0; r < data.size(); ++r) {
    const double z = data.x[r].dot(params) + params[d];
    const double err = (sigmoid(z) - data.y[r]) * inv_n;
    for (const auto& [i, v] : data.x[r].entries) g[i] += err * v;
    g[d] += err;
  }
  for (std::size_t i = 0; i < d; ++i) {
    const double w = params[i];
    const double sign = w > 0 ? 1.0 : (w < 0 ? -1.0 : 0.0);
    g[i] += lambda * (l1_ratio * sign + (1.0 - l1_ratio) * w);
  }
  return g;
}

LogisticRegression::LogisticRegression(ClassifierSpec spec, DenseVector weights, double bias)
    : Classifier(std::move(spec), weights.size()), w_(std::move(weights)), b_(bias) {}

std::unique_ptr<LogisticRegression> LogisticRegression::fit(const ClassifierSpec& spec, const Dataset& data) {
  require_both_classes(data, "LOGIT");
  const double lambda = spec.real("alpha");
  const double rho = spec.real("l1_ratio");
  const double eta = spec.real("learning_rate");
  const auto epochs = spec.integer("epochs");
  Rng rng(static_cast<std::uint64_t>(spec.integer("seed")));

  DenseVector w(data.dim, 0.0);
  double b = 0.0;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const double shrink = 1.0 - eta * lambda * (1.0 - rho);
  const double l1_step = eta * lambda * rho;
  for (long long e = 0; e < epochs; ++e) {
    rng.shuffle(order);
    for (auto r : order) {
      const auto& x = data.x[r];
      const double err = sigmoid(x.dot(w) + b) - data.y[r];
      // Gradient step on the smooth part, then the L1 proximal map.
      for (auto& wi : w) wi *= shrink;
      for (const auto& [i, v] : x.entries) w[i] -= eta * err * v;
      b -= eta * err;
      if (l1_step > 0)
        for (auto& wi : w) wi = wi > l1_step ? wi - l1_step : (wi < -l1_step ? wi + l1_step : 0.0);
    }
  }
  return std::make_unique<LogisticRegression>(spec, std::move(w), b);
}

double LogisticRegression::proba(const SparseVector& x) const { return sigmoid(x.dot(w_) + b_); }

void LogisticRegression::write_state(std::string& out) const {
  out += "bias " + io::format_double(b_) + "\n";
  out += "weights " + join_doubles(w_) + "\n";
}

// --- Linear SVM ------------------------------------------------------------

LinearSvm::LinearSvm(ClassifierSpec spec, DenseVector weights, double bias)
    : Classifier(std::move(spec), weights.size()), w_(std::move(weights)), b_(bias) {}

std::unique_ptr<LinearSvm> LinearSvm::fit(const ClassifierSpec& spec, const Dataset& data) {
  require_both_classes(data, "SVM");
  const std::size_t d = data.dim;
  const double lambda = 1.0 / (spec.real("C") * static_cast<double>(data.size()));
  const double radius = 1.0 / std::sqrt(lambda);
  const auto epochs = spec.integer("epochs");
  Rng rng(static_cast<std::uint64_t>(spec.integer("seed")));

  // w = scale * v, with v[d] the bias weight on a constant feature.
  DenseVector v(d + 1, 0.0);
  double scale = 1.0;
  double v_norm2 = 0.0;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  long long t = 0;
  for (long long e = 0; e < epochs; ++e) {
    rng.shuffle(order);
    for (auto r : order) {
      ++t;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      const auto& x = data.x[r];
      const double label = data.y[r] ? 1.0 : -1.0;
      const double vx = x.dot(v) + v[d];
      const double margin = label * scale * vx;

      const double factor = 1.0 - eta * lambda;
      if (factor <= 0.0) {
        std::fill(v.begin(), v.end(), 0.0);
        scale = 1.0;
        v_norm2 = 0.0;
      } else {
        scale *= factor;
      }
      if (margin < 1.0) {
        const double a = eta * label / scale;
        const double cur = factor <= 0.0 ? 0.0 : vx;
        const double x_norm2 = x.norm() * x.norm() + 1.0;
        v_norm2 += 2.0 * a * cur + a * a * x_norm2;
        for (const auto& [i, xv] : x.entries) v[i] += a * xv;
        v[d] += a;
      }
      const double w_norm = scale * std::sqrt(std::max(v_norm2, 0.0));
      if (w_norm > radius) scale *= radius / w_norm;
      if (scale < 1e-9) {
        for (auto& vi : v) vi *= scale;
        scale = 1.0;
        v_norm2 = 0.0;
        for (double vi : v) v_norm2 += vi * vi;
      }
    }
  }
  DenseVector w(d);
  for (std::size_t i = 0; i < d; ++i) w[i] = scale * v[i];
  return std::make_unique<LinearSvm>(spec, std::move(w), scale * v[d]);
}

double LinearSvm::decision_value(const SparseVector& x) const { return x.dot(w_) + b_; }

double LinearSvm::proba(const SparseVector& x) const { return sigmoid(decision_value(x)); }

void LinearSvm::write_state(std::string& out) const {
  out += "bias " + io::format_double(b_) + "\n";
  out += "weights " + join_doubles(w_) + "\n";
}

// --- KNN ---------------------------------------------------------------------

Knn::Knn(ClassifierSpec spec, std::size_t dim, std::vector<SparseVector> x, std::vector<int> y)
    : Classifier(std::move(spec), dim), x_(std::move(x)), y_(std::move(y)) {}

std::unique_ptr<Knn> Knn::fit(const ClassifierSpec& spec, const Dataset& data) {
  return std::make_unique<Knn>(spec, data.dim, data.x, data.y);
}

std::size_t Knn::k() const {
  return std::min(static_cast<std::size_t>(spec().integer("n_neighbors")), x_.size());
}

std::size_t Knn::positive_votes(const SparseVector& x) const {
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(x_.size());
  for (std::size_t i = 0; i < x_.size(); ++i) dist.emplace_back(squared_distance(x, x_[i]), i);
  const std::size_t kk = k();
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
  std::size_t votes = 0;
  for (std::size_t j = 0; j < kk; ++j) votes += static_cast<std::size_t>(y_[dist[j].second]);
  return votes;
}

double Knn::proba(const SparseVector& x) const {
  return static_cast<double>(positive_votes(x)) / static_cast<double>(k());
}

int Knn::decide(const SparseVector& x) const { return 2 * positive_votes(x) > k() ? 1 : 0; }

void Knn::write_state(std::string& out) const {
  out += "instances " + std::to_string(x_.size()) + "\n";
  for (std::size_t i = 0; i < x_.size(); ++i) {
    out += std::to_string(y_[i]);
    for (const auto& [f, v] : x_[i].entries) out += " " + std::to_string(f) + ":" + io::format_double(v);
    out += "\n";
  }
}

// --- CART ----------------------------------------------------------------

double gini_impurity(double n0, double n1) {
  const double n = n0 + n1;
  if (n <= 0) return 0.0;
  const double p0 = n0 / n, p1 = n1 / n;
  return 1.0 - p0 * p0 - p1 * p1;
}

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& data, std::size_t max_depth, std::size_t min_split, std::size_t max_features,
              std::uint64_t seed)
      : data_(data),
        max_depth_(max_depth),
        min_split_(min_split),
        max_features_(max_features),
        rng_(seed),
        buckets_(data.dim) {}

  std::vector<TreeNode> build(const std::vector<std::size_t>& indices) {
    grow(indices, 0);
    return std::move(nodes_);
  }

 private:
  struct Split {
    std::size_t feature;
    double threshold;
  };

  std::size_t grow(const std::vector<std::size_t>& idx, std::size_t depth) {
    double n1 = 0;
    for (auto s : idx) n1 += data_.y[s];
    const double n = static_cast<double>(idx.size());
    const std::size_t self = nodes_.size();
    TreeNode node;
    node.samples = idx.size();
    node.prob = n > 0 ? n1 / n : 0.0;
    node.impurity = gini_impurity(n - n1, n1);
    nodes_.push_back(node);

    const bool pure = n1 == 0 || n1 == n;
    if (pure || idx.size() < min_split_ || (max_depth_ && depth >= max_depth_)) return self;
    const auto split = best_split(idx, n - n1, n1);
    if (!split) return self;

    std::vector<std::size_t> left, right;
    for (auto s : idx) (data_.x[s].get(split->feature) <= split->threshold ? left : right).push_back(s);
    nodes_[self].feature = static_cast<long long>(split->feature);
    nodes_[self].threshold = split->threshold;
    const auto l = grow(left, depth + 1);
    const auto r = grow(right, depth + 1);
    nodes_[self].left = l;
    nodes_[self].right = r;
    return self;
  }

  std::optional<Split> best_split(const std::vector<std::size_t>& idx, double n0, double n1) {
    touched_.clear();
    for (auto s : idx) {
      for (const auto& [f, v] : data_.x[s].entries) {
        if (buckets_[f].empty()) touched_.push_back(f);
        buckets_[f].emplace_back(v, data_.y[s]);
      }
    }
    std::sort(touched_.begin(), touched_.end());
    std::vector<std::size_t> candidates = touched_;
    if (max_features_ < candidates.size()) {
      for (std::size_t k = 0; k < max_features_; ++k) {
        const std::size_t j = k + rng_.index(candidates.size() - k);
        std::swap(candidates[k], candidates[j]);
      }
      candidates.resize(max_features_);
      std::sort(candidates.begin(), candidates.end());
    }

    const double n = n0 + n1;
    std::optional<Split> best;
    double best_impurity = std::numeric_limits<double>::infinity();
    struct Item {
      double value;
      double c0;
      double c1;
    };
    std::vector<Item> items;
    for (auto f : candidates) {
      items.clear();
      double nz0 = 0, nz1 = 0;
      for (const auto& [v, y] : buckets_[f]) {
        items.push_back({v, y ? 0.0 : 1.0, y ? 1.0 : 0.0});
        (y ? nz1 : nz0) += 1;
      }
      if (n0 - nz0 + n1 - nz1 > 0) items.push_back({0.0, n0 - nz0, n1 - nz1});
      std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.value < b.value; });
      double l0 = 0, l1 = 0;
      for (std::size_t i = 0; i + 1 < items.size(); ++i) {
        l0 += items[i].c0;
        l1 += items[i].c1;
        if (items[i].value == items[i + 1].value) continue;
        const double nl = l0 + l1, nr = n - nl;
        const double weighted = (nl * gini_impurity(l0, l1) + nr * gini_impurity(n0 - l0, n1 - l1)) / n;
        if (weighted < best_impurity) {
          best_impurity = weighted;
          double thr = 0.5 * (items[i].value + items[i + 1].value);
          if (!(thr < items[i + 1].value)) thr = items[i].value;
          best = Split{f, thr};
        }
      }
    }
    for (auto f : touched_) buckets_[f].clear();
    return best;
  }

  const Dataset& data_;
  std::size_t max_depth_;
  std::size_t min_split_;
  std::size_t max_features_;
  Rng rng_;
  std::vector<std::vector<std::pair<double, int>>> buckets_;
  std::vector<std::size_t> touched_;
  std::vector<TreeNode> nodes_;
};

std::string write_nodes(const std::vector<TreeNode>& nodes) {
  std::string out = "nodes " + std::to_string(nodes.size()) + "\n";
  for (const auto& n : nodes) {
    out += std::to_string(n.feature) + " " + io::format_double(n.threshold) + " " + std::to_string(n.left) + " " +
           std::to_string(n.right) + " " + io::format_double(n.prob) + " " + std::to_string(n.samples) + " " +
           io::format_double(n.impurity) + "\n";
  }
  return out;
}

std::vector<TreeNode> read_nodes(LineReader& in, std::size_t dim) {
  const auto head = in.expect("nodes");
  if (head.size() != 2) throw FormatError("classifier: malformed 'nodes' line", in.line());
  const auto count = static_cast<std::size_t>(io::parse_int(head[1]));
  std::vector<TreeNode> nodes(count);
  for (auto& n : nodes) {
    const auto cols = io::split_ws(in.next());
    if (cols.size() != 7) throw FormatError("classifier: malformed tree node", in.line());
    n.feature = io::parse_int(cols[0]);
    n.threshold = io::parse_double(cols[1]);
    n.left = static_cast<std::size_t>(io::parse_int(cols[2]));
    n.right = static_cast<std::size_t>(io::parse_int(cols[3]));
    n.prob = io::parse_double(cols[4]);
    n.samples = static_cast<std::size_t>(io::parse_int(cols[5]));
    n.impurity = io::parse_double(cols[6]);
  }
  for (const auto& n : nodes) {
    if (n.leaf()) continue;
    if (static_cast<std::size_t>(n.feature) >= dim || n.left >= count || n.right >= count)
      throw FormatError("classifier: tree node references out of range", in.line());
  }
  if (nodes.empty()) throw FormatError("classifier: empty tree", in.line());
  return nodes;
}

}  // namespace

DecisionTree::DecisionTree(ClassifierSpec spec, std::size_t dim, std::vector<TreeNode> nodes)
    : Classifier(std::move(spec), dim), nodes_(std::move(nodes)) {}

std::unique_ptr<DecisionTree> DecisionTree::fit(const ClassifierSpec& spec, const Dataset& data,
                                                const std::vector<std::size_t>& indices, std::size_t max_features,
                                                std::uint64_t seed) {
  if (indices.empty()) throw TrainingError("CART: no training samples");
  TreeBuilder builder(data, static_cast<std::size_t>(spec.integer("max_depth")),
                      static_cast<std::size_t>(spec.integer("min_samples_split")), max_features, seed);
  return std::make_unique<DecisionTree>(spec, data.dim, builder.build(indices));
}

std::unique_ptr<DecisionTree> DecisionTree::fit(const ClassifierSpec& spec, const Dataset& data) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  return fit(spec, data, idx, resolve_max_features(spec.text("max_features"), data.dim),
             static_cast<std::uint64_t>(spec.integer("seed")));
}

std::size_t DecisionTree::depth() const {
  std::size_t best = 0;
  std::vector<std::pair<std::size_t, std::size_t>> stack = {{0, 0}};
  while (!stack.empty()) {
    const auto [i, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    if (!nodes_[i].leaf()) {
      stack.emplace_back(nodes_[i].left, d + 1);
      stack.emplace_back(nodes_[i].right, d + 1);
    }
  }
  return best;
}

double DecisionTree::proba(const SparseVector& x) const {
  std::size_t i = 0;
  while (!nodes_[i].leaf())
    i = x.get(static_cast<std::size_t>(nodes_[i].feature)) <= nodes_[i].threshold ? nodes_[i].left : nodes_[i].right;
  return nodes_[i].prob;
}

void DecisionTree::write_state(std::string& out) const { out += write_nodes(nodes_); }

// --- Random forest -----------------------------------------------------------

RandomForest::RandomForest(ClassifierSpec spec, std::size_t dim, std::vector<std::unique_ptr<DecisionTree>> trees)
    : Classifier(std::move(spec), dim), trees_(std::move(trees)) {}

std::unique_ptr<RandomForest> RandomForest::fit(const ClassifierSpec& spec, const Dataset& data) {
  const auto n_trees = static_cast<std::size_t>(spec.integer("n_trees"));
  const bool bootstrap = spec.integer("bootstrap") == 1;
  const std::size_t max_features = resolve_max_features(spec.text("max_features"), data.dim);
  const auto tree_spec = ClassifierSpec::with_defaults(
      Algorithm::CART, {{"criterion", spec.text("criterion")},
                        {"max_depth", spec.text("max_depth")},
                        {"min_samples_split", spec.text("min_samples_split")},
                        {"max_features", std::to_string(std::max<std::size_t>(max_features, 1))},
                        {"seed", spec.text("seed")}});

  Rng master(static_cast<std::uint64_t>(spec.integer("seed")));
  std::vector<std::unique_ptr<DecisionTree>> trees;
  for (std::size_t t = 0; t < n_trees; ++t) {
    const std::uint64_t tree_seed = master.next();
    Rng rng(tree_seed);
    std::vector<std::size_t> idx(data.size());
    if (bootstrap) {
      for (auto& i : idx) i = rng.index(data.size());
    } else {
      std::iota(idx.begin(), idx.end(), 0);
    }
    trees.push_back(DecisionTree::fit(tree_spec, data, idx, max_features, rng.next()));
  }
  return std::make_unique<RandomForest>(spec, data.dim, std::move(trees));
}

double RandomForest::proba(const SparseVector& x) const {
  std::size_t votes = 0;
  for (const auto& t : trees_) votes += static_cast<std::size_t>(t->predict(x));
  return static_cast<double>(votes) / static_cast<double>(trees_.size());
}

void RandomForest::write_state(std::string& out) const {
  out += "trees " + std::to_string(trees_.size()) + "\n";
  for (const auto& t : trees_) out += write_nodes(t->nodes());
}

// --- MLP ---------------------------------------------------------------------

Mlp::Mlp(ClassifierSpec spec, std::size_t dim, std::size_t hidden, DenseVector params)
    : Classifier(std::move(spec), dim), hidden_(hidden), params_(std::move(params)) {
  if (params_.size() != num_params(dim, hidden)) throw ValidationError("MLP: parameter vector has the wrong size");
}

Mlp::Mlp(ClassifierSpec spec, std::size_t dim, std::size_t hidden)
    : Mlp(std::move(spec), dim, hidden, DenseVector(num_params(dim, hidden), 0.0)) {}

double Mlp::loss(std::size_t dim, std::size_t hidden, const DenseVector& params, const Dataset& data,
                 const std::vector<std::size_t>& rows, double l2, DenseVector* grad) {
  const std::size_t b1_off = dim * hidden, w2_off = b1_off + hidden, b2_off = w2_off + hidden;
  if (grad) grad->assign(params.size(), 0.0);
  DenseVector z1(hidden), dz1(hidden);
  double total = 0.0;
  const double inv_n = rows.empty() ? 0.0 : 1.0 / static_cast<double>(rows.size());
  for (auto r : rows) {
    const auto& x = data.x[r];
    for (std::size_t j = 0; j < hidden; ++j) z1[j] = params[b1_off + j];
    for (const auto& [i, v] : x.entries) {
      const double* row = &params[i * hidden];
      for (std::size_t j = 0; j < hidden; ++j) z1[j] += v * row[j];
    }
    double z2 = params[b2_off];
    for (std::size_t j = 0; j < hidden; ++j) z2 += params[w2_off + j] * std::max(z1[j], 0.0);
    const double y = data.y[r];
    total += softplus(z2) - y * z2;
    if (!grad) continue;

    const double dz2 = (sigmoid(z2) - y) * inv_n;
    auto& g = *grad;
    g[b2_off] += dz2;
    for (std::size_t j = 0; j < hidden; ++j) {
      g[w2_off + j] += dz2 * std::max(z1[j], 0.0);
      dz1[j] = z1[j] > 0 ? dz2 * params[w2_off + j] : 0.0;
      g[b1_off + j] += dz1[j];
    }
    for (const auto& [i, v] : x.entries) {
      double* row = &g[i * hidden];
      for (std::size_t j = 0; j < hidden; ++j) row[j] += v * dz1[j];
    }
  }
  double penalty = 0.0;
  for (std::size_t k = 0; k < b1_off; ++k) penalty += params[k] * params[k];
  for (std::size_t j = 0; j < hidden; ++j) penalty += params[w2_off + j] * params[w2_off + j];
  if (grad && l2 > 0) {
    for (std::size_t k = 0; k < b1_off; ++k) (*grad)[k] += l2 * params[k];
    for (std::size_t j = 0; j < hidden; ++j) (*grad)[w2_off + j] += l2 * params[w2_off + j];
  }
  return total * inv_n + 0.5 * l2 * penalty;
}

std::unique_ptr<Mlp> Mlp::fit(const ClassifierSpec& spec, const Dataset& data) {
  const auto hidden = static_cast<std::size_t>(spec.integer("hidden_units"));
  const double lr = spec.real("learning_rate");
  const auto epochs = spec.integer("epochs");
  const auto batch = static_cast<std::size_t>(spec.integer("batch_size"));
  const double l2 = spec.real("l2");
  Rng rng(static_cast<std::uint64_t>(spec.integer("seed")));

  const std::size_t dim = data.dim;
  DenseVector params(num_params(dim, hidden), 0.0);
  const double a1 = std::sqrt(6.0 / static_cast<double>(dim + hidden));
  const double a2 = std::sqrt(6.0 / static_cast<double>(hidden + 1));
  for (std::size_t k = 0; k < dim * hidden; ++k) params[k] = rng.uniform(-a1, a1);
  for (std::size_t j = 0; j < hidden; ++j) params[dim * hidden + hidden + j] = rng.uniform(-a2, a2);

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  DenseVector grad;
  std::vector<std::size_t> rows;
  for (long long e = 0; e < epochs; ++e) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      rows.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                  order.begin() + static_cast<std::ptrdiff_t>(std::min(start + batch, order.size())));
      loss(dim, hidden, params, data, rows, l2, &grad);
      for (std::size_t k = 0; k < params.size(); ++k) params[k] -= lr * grad[k];
    }
  }
  return std::make_unique<Mlp>(spec, dim, hidden, std::move(params));
}

double Mlp::proba(const SparseVector& x) const {
  const std::size_t dim = this->dim();
  const std::size_t b1_off = dim * hidden_, w2_off = b1_off + hidden_, b2_off = w2_off + hidden_;
  DenseVector z1(params_.begin() + static_cast<std::ptrdiff_t>(b1_off),
                 params_.begin() + static_cast<std::ptrdiff_t>(w2_off));
  for (const auto& [i, v] : x.entries)
    for (std::size_t j = 0; j < hidden_; ++j) z1[j] += v * params_[i * hidden_ + j];
  double z2 = params_[b2_off];
  for (std::size_t j = 0; j < hidden_; ++j) z2 += params_[w2_off + j] * std::max(z1[j], 0.0);
  return sigmoid(z2);
}

void Mlp::write_state(std::string& out) const {
  out += "hidden " + std::to_string(hidden_) + "\n";
  out += "params " + join_doubles(params_) + "\n";
}

// --- Factory / persistence -------------------------------------------------

std::unique_ptr<Classifier> train(const ClassifierSpec& spec, const Dataset& data) {
  spec.validate();
  data.validate();
  switch (spec.algo) {
    case Algorithm::NB: return NaiveBayes::fit(spec, data);
    case Algorithm::LOGIT: return LogisticRegression::fit(spec, data);
    case Algorithm::SVM: return LinearSvm::fit(spec, data);
    case Algorithm::KNN: return Knn::fit(spec, data);
    case Algorithm::CART: return DecisionTree::fit(spec, data);
    case Algorithm::RF: return RandomForest::fit(spec, data);
    case Algorithm::MLP: return Mlp::fit(spec, data);
  }
  throw ValidationError("unsupported classifier");
}

std::unique_ptr<Classifier> deserialize_classifier(std::string_view text) {
  LineReader in(text);
  const auto head = io::split_ws(in.next());
  if (head.size() != 3 || head[0] != "cfdetect-classifier") throw FormatError("classifier: missing header", 1);
  if (head[1] != "v1") throw FormatError("classifier: unsupported format version '" + head[1] + "'", 1);
  ClassifierSpec spec;
  spec.algo = parse_algorithm(head[2]);
  const auto dim_line = in.expect("dim");
  if (dim_line.size() != 2) throw FormatError("classifier: malformed dim line", in.line());
  const auto dim = static_cast<std::size_t>(io::parse_int(dim_line[1]));
  while (true) {
    const auto cols = io::split_ws(in.next());
    if (cols.size() == 1 && cols[0] == "state") break;
    if (cols.size() != 3 || cols[0] != "param") throw FormatError("classifier: expected 'param key value'", in.line());
    spec.params[cols[1]] = cols[2];
  }
  spec.validate();

  switch (spec.algo) {
    case Algorithm::NB: {
      const auto prior = in.expect("prior");
      const auto lp = parse_doubles(prior, 1, 2, in.line());
      std::array<std::vector<double>, 2> ll;
      for (int c = 0; c < 2; ++c) ll[c] = parse_doubles(in.expect("loglik"), 1, dim, in.line());
      return std::make_unique<NaiveBayes>(spec, dim, std::array<double, 2>{lp[0], lp[1]}, std::move(ll));
    }
    case Algorithm::LOGIT:
    case Algorithm::SVM: {
      const auto bias = parse_doubles(in.expect("bias"), 1, 1, in.line())[0];
      auto w = parse_doubles(in.expect("weights"), 1, dim, in.line());
      if (spec.algo == Algorithm::LOGIT) return std::make_unique<LogisticRegression>(spec, std::move(w), bias);
      return std::make_unique<LinearSvm>(spec, std::move(w), bias);
    }
    case Algorithm::KNN: {
      const auto head_line = in.expect("instances");
      const auto n = static_cast<std::size_t>(io::parse_int(head_line.at(1)));
      std::vector<SparseVector> xs;
      std::vector<int> ys;
      for (std::size_t i = 0; i < n; ++i) {
        const auto cols = io::split_ws(in.next());
        if (cols.empty()) throw FormatError("classifier: empty instance", in.line());
        ys.push_back(static_cast<int>(io::parse_int(cols[0])));
        SparseVector x;
        x.dim = dim;
        for (std::size_t k = 1; k < cols.size(); ++k) {
          const auto colon = cols[k].find(':');
          if (colon == std::string::npos) throw FormatError("classifier: expected index:value", in.line());
          x.entries.emplace_back(static_cast<std::size_t>(io::parse_int(cols[k].substr(0, colon))),
                                 io::parse_double(cols[k].substr(colon + 1)));
        }
        x.validate();
        xs.push_back(std::move(x));
      }
      return std::make_unique<Knn>(spec, dim, std::move(xs), std::move(ys));
    }
    case Algorithm::CART:
      return std::make_unique<DecisionTree>(spec, dim, read_nodes(in, dim));
    case Algorithm::RF: {
      const auto head_line = in.expect("trees");
      const auto n = static_cast<std::size_t>(io::parse_int(head_line.at(1)));
      const auto tree_spec = ClassifierSpec::with_defaults(
          Algorithm::CART, {{"criterion", spec.text("criterion")},
                            {"max_depth", spec.text("max_depth")},
                            {"min_samples_split", spec.text("min_samples_split")},
                            {"seed", spec.text("seed")}});
      std::vector<std::unique_ptr<DecisionTree>> trees;
      for (std::size_t t = 0; t < n; ++t)
        trees.push_back(std::make_unique<DecisionTree>(tree_spec, dim, read_nodes(in, dim)));
      if (trees.empty()) throw FormatError("classifier: forest without trees", in.line());
      return std::make_unique<RandomForest>(spec, dim, std::move(trees));
    }
    case Algorithm::MLP: {
      const auto hidden_line = in.expect("hidden");
      const auto hidden = static_cast<std::size_t>(io::parse_int(hidden_line.at(1)));
      auto params = parse_doubles(in.expect("params"), 1, Mlp::num_params(dim, hidden), in.line());
      return std::make_unique<Mlp>(spec, dim, hidden, std::move(params));
    }
  }
  throw FormatError("classifier: unsupported algorithm");
}

std::unique_ptr<Classifier> load_classifier(const std::filesystem::path& path) {
  return deserialize_classifier(io::read_file(path));
}

}  // namespace cfd
