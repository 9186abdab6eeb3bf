#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "cfdetect/vectorize.hpp"

namespace cfd {

enum class Algorithm { NB, LOGIT, SVM, KNN, CART, RF, MLP };

std::string_view algorithm_name(Algorithm a);
Algorithm parse_algorithm(std::string_view name);

// Algorithm plus string-valued parameters. `with_defaults` fills every
// parameter the algorithm understands:
//   NB     alpha=1
//   LOGIT  alpha=1e-4 l1_ratio=0.5 learning_rate=0.1 epochs=20 seed=0
//   SVM    C=1 epochs=20 seed=0
//   KNN    n_neighbors=3
//   CART   criterion=gini max_depth=0 min_samples_split=2 max_features=all seed=0
//   RF     n_trees=100 criterion=gini max_depth=0 min_samples_split=2
//          max_features=sqrt bootstrap=1 seed=0
//   MLP    hidden_units=100 learning_rate=0.1 epochs=50 batch_size=32 l2=1e-4 seed=0
// max_depth=0 means unlimited.
struct ClassifierSpec {
  Algorithm algo = Algorithm::LOGIT;
  std::map<std::string, std::string> params;

  static ClassifierSpec with_defaults(Algorithm algo, std::map<std::string, std::string> overrides = {});

  double real(const std::string& key) const;
  long long integer(const std::string& key) const;
  const std::string& text(const std::string& key) const;

  // Unknown keys and out-of-range values raise ValidationError.
  void validate() const;
};

struct Dataset {
  std::vector<SparseVector> x;
  std::vector<int> y;
  std::size_t dim = 0;

  static Dataset from_dense(const std::vector<DenseVector>& x, const std::vector<int>& y);
  std::size_t size() const { return y.size(); }
  Dataset subset(const std::vector<std::size_t>& indices) const;
  void validate() const;
};

class Classifier {
 public:
  virtual ~Classifier() = default;

  const ClassifierSpec& spec() const { return spec_; }
  Algorithm algorithm() const { return spec_.algo; }
  std::size_t dim() const { return dim_; }

  // Probability of class 1. Throws ValidationError on a dimension mismatch.
  double predict_proba(const SparseVector& x) const;
  // Class 1 iff predict_proba >= 0.5, except SVM (decision value >= 0) and
  // KNN (strict majority; even-k ties go to 0).
  int predict(const SparseVector& x) const;

  // "cfdetect-classifier v1 <ALGO>" header, parameters, then the learned state.
  std::string serialize() const;
  void save(const std::filesystem::path& path) const;

 protected:
  Classifier(ClassifierSpec spec, std::size_t dim) : spec_(std::move(spec)), dim_(dim) {}

  virtual double proba(const SparseVector& x) const = 0;
  virtual int decide(const SparseVector& x) const { return proba(x) >= 0.5 ? 1 : 0; }
  virtual void write_state(std::string& out) const = 0;

 private:
  ClassifierSpec spec_;
  std::size_t dim_;
};

std::unique_ptr<Classifier> train(const ClassifierSpec& spec, const Dataset& data);
std::unique_ptr<Classifier> deserialize_classifier(std::string_view text);
std::unique_ptr<Classifier> load_classifier(const std::filesystem::path& path);

// --- Concrete models ------------------------------------------------------

// Multinomial naive Bayes with Laplace smoothing.
class NaiveBayes final : public Classifier {
 public:
  NaiveBayes(ClassifierSpec spec, std::size_t dim, std::array<double, 2> log_prior,
             std::array<std::vector<double>, 2> log_likelihood);
  static std::unique_ptr<NaiveBayes> fit(const ClassifierSpec& spec, const Dataset& data);

  // Posterior over {0, 1}.
  std::array<double, 2> posterior(const SparseVector& x) const;
  const std::array<double, 2>& log_prior() const { return log_prior_; }

 protected:
  double proba(const SparseVector& x) const override { return posterior(x)[1]; }
  void write_state(std::string& out) const override;

 private:
  std::array<double, 2> log_prior_;
  std::array<std::vector<double>, 2> log_likelihood_;
};

// lambda * (l1_ratio * ||w||_1 + (1 - l1_ratio) * 0.5 * ||w||_2^2)
double elastic_net_penalty(const DenseVector& w, double lambda, double l1_ratio);

// Mean logistic loss plus the elastic-net penalty, as a function of
// params = [w_0 .. w_{dim-1}, bias]. The bias is not penalized.
struct LogisticObjective {
  const Dataset& data;
  double lambda;
  double l1_ratio;

  double value(const DenseVector& params) const;
  // Uses sign(w) for the L1 term; exact wherever no weight is zero.
  DenseVector gradient(const DenseVector& params) const;
};

// Elastic-net logistic regression trained by proximal SGD.
class LogisticRegression final : public Classifier {
 public:
  LogisticRegression(ClassifierSpec spec, DenseVector weights, double bias);
  static std::unique_ptr<LogisticRegression> fit(const ClassifierSpec& spec, const Dataset& data);

  const DenseVector& weights() const { return w_; }
  double bias() const { return b_; }

 protected:
  double proba(const SparseVector& x) const override;
  void write_state(std::string& out) const override;

 private:
  DenseVector w_;
  double b_;
};

// Linear SVM: hinge loss + L2, Pegasos primal SGD with lambda = 1 / (C n).
// The bias is an extra constant feature.
class LinearSvm final : public Classifier {
 public:
  LinearSvm(ClassifierSpec spec, DenseVector weights, double bias);
  static std::unique_ptr<LinearSvm> fit(const ClassifierSpec& spec, const Dataset& data);

  double decision_value(const SparseVector& x) const;
  const DenseVector& weights() const { return w_; }

 protected:
  // Logistic squashing of the decision value (uncalibrated).
  double proba(const SparseVector& x) const override;
  int decide(const SparseVector& x) const override { return decision_value(x) >= 0.0 ? 1 : 0; }
  void write_state(std::string& out) const override;

 private:
  DenseVector w_;
  double b_;
};

// Euclidean k-nearest neighbours; distance ties go to the earlier instance.
class Knn final : public Classifier {
 public:
  Knn(ClassifierSpec spec, std::size_t dim, std::vector<SparseVector> x, std::vector<int> y);
  static std::unique_ptr<Knn> fit(const ClassifierSpec& spec, const Dataset& data);

  // Number of positive labels among the k nearest instances.
  std::size_t positive_votes(const SparseVector& x) const;

 protected:
  double proba(const SparseVector& x) const override;
  int decide(const SparseVector& x) const override;
  void write_state(std::string& out) const override;

 private:
  std::size_t k() const;
  std::vector<SparseVector> x_;
  std::vector<int> y_;
};

double gini_impurity(double n0, double n1);

struct TreeNode {
  // Internal nodes: go left iff x[feature] <= threshold.
  long long feature = -1;
  double threshold = 0.0;
  std::size_t left = 0;
  std::size_t right = 0;
  // Every node: positive fraction and sample count of its training samples.
  double prob = 0.0;
  std::size_t samples = 0;
  double impurity = 0.0;

  bool leaf() const { return feature < 0; }
};

// CART with gini splits, grown to purity or the depth cap.
class DecisionTree final : public Classifier {
 public:
  DecisionTree(ClassifierSpec spec, std::size_t dim, std::vector<TreeNode> nodes);
  // `indices` may repeat (bootstrap). When max_features < dim, each node
  // draws that many candidate features among those that vary in the node.
  static std::unique_ptr<DecisionTree> fit(const ClassifierSpec& spec, const Dataset& data,
                                           const std::vector<std::size_t>& indices, std::size_t max_features,
                                           std::uint64_t seed);
  static std::unique_ptr<DecisionTree> fit(const ClassifierSpec& spec, const Dataset& data);

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  std::size_t depth() const;

 protected:
  double proba(const SparseVector& x) const override;
  void write_state(std::string& out) const override;

 private:
  friend class RandomForest;
  std::vector<TreeNode> nodes_;
};

// Bagged CART with per-node feature subsampling. predict_proba is the
// fraction of trees voting 1.
class RandomForest final : public Classifier {
 public:
  RandomForest(ClassifierSpec spec, std::size_t dim, std::vector<std::unique_ptr<DecisionTree>> trees);
  static std::unique_ptr<RandomForest> fit(const ClassifierSpec& spec, const Dataset& data);

  const std::vector<std::unique_ptr<DecisionTree>>& trees() const { return trees_; }

 protected:
  double proba(const SparseVector& x) const override;
  void write_state(std::string& out) const override;

 private:
  std::vector<std::unique_ptr<DecisionTree>> trees_;
};

// One hidden ReLU layer, sigmoid output, binary cross-entropy.
// Parameter layout: W1 (dim x hidden, row per input feature), b1 (hidden),
// w2 (hidden), b2.
class Mlp final : public Classifier {
 public:
  Mlp(ClassifierSpec spec, std::size_t dim, std::size_t hidden, DenseVector params);
  // All-zero parameters.
  Mlp(ClassifierSpec spec, std::size_t dim, std::size_t hidden);
  static std::unique_ptr<Mlp> fit(const ClassifierSpec& spec, const Dataset& data);

  static std::size_t num_params(std::size_t dim, std::size_t hidden) { return dim * hidden + 2 * hidden + 1; }

  // Mean cross-entropy over `rows` plus (l2/2)(||W1||^2 + ||w2||^2), and its
  // gradient with respect to `params`.
  static double loss(std::size_t dim, std::size_t hidden, const DenseVector& params, const Dataset& data,
                     const std::vector<std::size_t>& rows, double l2, DenseVector* grad);

  const DenseVector& params() const { return params_; }
  std::size_t hidden() const { return hidden_; }

 protected:
  double proba(const SparseVector& x) const override;
  void write_state(std::string& out) const override;

 private:
  std::size_t hidden_;
  DenseVector params_;
};

double sigmoid(double z);

}  // namespace cfd
