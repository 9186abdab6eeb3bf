#include <cmath>

#include "cfdetect/classify.hpp"
#include "cfdetect/error.hpp"
#include "cfdetect/rng.hpp"
#include "doctest.h"

using namespace cfd;

namespace {

SparseVector dense(DenseVector v) { return SparseVector::from_dense(v); }

// Two Gaussian blobs in 4 dimensions, separable along the first axis.
Dataset blobs(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<DenseVector> x;
  std::vector<int> y;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    DenseVector v(4);
    for (auto& e : v) e = 0.3 * rng.normal();
    v[0] += label ? 2.0 : -2.0;
    v[1] += 1.0;
    x.push_back(v);
    y.push_back(label);
  }
  return Dataset::from_dense(x, y);
}

double train_accuracy(const Classifier& m, const Dataset& d) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < d.size(); ++i) ok += m.predict(d.x[i]) == d.y[i];
  return static_cast<double>(ok) / static_cast<double>(d.size());
}

}  // namespace

TEST_SUITE("classify") {
  TEST_CASE("spec defaults and validation") {
    const auto s = ClassifierSpec::with_defaults(Algorithm::RF);
    CHECK(s.integer("n_trees") == 100);
    CHECK(s.text("max_features") == "sqrt");
    CHECK_THROWS_AS(ClassifierSpec::with_defaults(Algorithm::NB, {{"C", "1"}}), ValidationError);
    CHECK_THROWS_AS(ClassifierSpec::with_defaults(Algorithm::SVM, {{"C", "-1"}}), ValidationError);
    CHECK_THROWS_AS(ClassifierSpec::with_defaults(Algorithm::KNN, {{"n_neighbors", "x"}}), ValidationError);
    CHECK(parse_algorithm("logit") == Algorithm::LOGIT);
    CHECK_THROWS_AS(parse_algorithm("XGB"), ValidationError);
  }

  TEST_CASE("naive bayes hand example") {
    const auto d = Dataset::from_dense({{2, 0}, {0, 2}}, {0, 1});
    const auto m = NaiveBayes::fit(ClassifierSpec::with_defaults(Algorithm::NB), d);
    CHECK(std::exp(m->log_prior()[0]) == doctest::Approx(0.5));
    CHECK(m->predict(dense({3, 0})) == 0);
    CHECK(m->predict_proba(dense({3, 0})) == doctest::Approx(1.0 / 28.0).epsilon(1e-12));
    CHECK_THROWS_AS(train(ClassifierSpec::with_defaults(Algorithm::NB), Dataset::from_dense({{-1, 0}, {0, 1}}, {0, 1})),
                    TrainingError);
  }

  TEST_CASE("logit with zero epochs is the zero model") {
    const auto d = blobs(20, 1);
    const auto m = train(ClassifierSpec::with_defaults(Algorithm::LOGIT, {{"epochs", "0"}}), d);
    for (const auto& x : d.x) CHECK(m->predict_proba(x) == 0.5);
  }

  TEST_CASE("elastic net drives irrelevant weights to zero") {
    const auto d = blobs(200, 2);
    const auto m = LogisticRegression::fit(
        ClassifierSpec::with_defaults(Algorithm::LOGIT, {{"alpha", "0.05"}, {"l1_ratio", "1"}, {"epochs", "30"}}), d);
    CHECK(m->weights()[0] > 0.1);
    CHECK(m->weights()[2] == 0.0);
    CHECK(m->weights()[3] == 0.0);
    CHECK(train_accuracy(*m, d) == 1.0);
  }

  TEST_CASE("margin-based models reject single-class data") {
    const auto d = Dataset::from_dense({{1, 0}, {0, 1}}, {1, 1});
    CHECK_THROWS_AS(train(ClassifierSpec::with_defaults(Algorithm::SVM), d), TrainingError);
    CHECK_THROWS_AS(train(ClassifierSpec::with_defaults(Algorithm::LOGIT), d), TrainingError);
    const auto tree = train(ClassifierSpec::with_defaults(Algorithm::CART), d);
    CHECK(tree->predict(dense({5, 5})) == 1);
  }

  TEST_CASE("knn votes") {
    const auto d = Dataset::from_dense({{0}, {0.1}, {10}}, {0, 0, 1});
    const auto m = train(ClassifierSpec::with_defaults(Algorithm::KNN), d);
    CHECK(m->predict(dense({0.05})) == 0);
    CHECK(m->predict_proba(dense({0.05})) == doctest::Approx(1.0 / 3.0));
    const auto even = train(ClassifierSpec::with_defaults(Algorithm::KNN, {{"n_neighbors", "2"}}),
                            Dataset::from_dense({{0}, {1}}, {1, 0}));
    CHECK(even->predict(dense({0.5})) == 0);
  }

  TEST_CASE("cart on separable data") {
    const auto d = Dataset::from_dense({{0}, {1}, {2}, {3}}, {0, 0, 1, 1});
    const auto m = DecisionTree::fit(ClassifierSpec::with_defaults(Algorithm::CART), d);
    REQUIRE(m->nodes().size() == 3);
    CHECK(m->nodes()[0].impurity == doctest::Approx(0.5));
    CHECK(m->nodes()[0].threshold == doctest::Approx(1.5));
    CHECK(m->nodes()[1].impurity == 0.0);
    CHECK(train_accuracy(*m, d) == 1.0);
    CHECK(gini_impurity(3, 0) == 0.0);
    CHECK(m->depth() == 1);
  }

  TEST_CASE("cart and forest are deterministic per seed") {
    const auto d = blobs(60, 3);
    const auto spec = ClassifierSpec::with_defaults(Algorithm::RF, {{"n_trees", "15"}, {"seed", "9"}});
    CHECK(train(spec, d)->serialize() == train(spec, d)->serialize());
    const auto other = ClassifierSpec::with_defaults(Algorithm::RF, {{"n_trees", "15"}, {"seed", "10"}});
    CHECK(train(spec, d)->serialize() != train(other, d)->serialize());
  }

  TEST_CASE("mlp zero weights give one half") {
    Mlp m(ClassifierSpec::with_defaults(Algorithm::MLP, {{"hidden_units", "3"}}), 2, 3);
    CHECK(m.predict_proba(dense({1, -2})) == 0.5);
  }

  TEST_CASE("every algorithm learns separable blobs") {
    const auto d = blobs(80, 4);
    for (auto a : {Algorithm::NB, Algorithm::LOGIT, Algorithm::SVM, Algorithm::KNN, Algorithm::CART, Algorithm::RF,
                   Algorithm::MLP}) {
      CAPTURE(algorithm_name(a));
      auto spec = ClassifierSpec::with_defaults(a);
      Dataset data = d;
      if (a == Algorithm::NB)
        for (auto& x : data.x)
          for (auto& [i, v] : x.entries) v += 4.0;
      const auto m = train(spec, data);
      CHECK(train_accuracy(*m, data) >= 0.95);
    }
  }

  TEST_CASE("serialization round trip preserves predictions") {
    const auto d = blobs(40, 5);
    for (auto a : {Algorithm::LOGIT, Algorithm::SVM, Algorithm::KNN, Algorithm::CART, Algorithm::RF, Algorithm::MLP}) {
      CAPTURE(algorithm_name(a));
      const auto m = train(ClassifierSpec::with_defaults(a, a == Algorithm::RF ? std::map<std::string, std::string>{
                                                                                     {"n_trees", "5"}}
                                                                               : std::map<std::string, std::string>{}),
                           d);
      const auto back = deserialize_classifier(m->serialize());
      CHECK(back->serialize() == m->serialize());
      for (const auto& x : d.x) CHECK(back->predict_proba(x) == m->predict_proba(x));
    }
    CHECK_THROWS_AS(deserialize_classifier("cfdetect-classifier v1 NB\ndim x\n"), FormatError);
  }

  TEST_CASE("dimension mismatch") {
    const auto m = train(ClassifierSpec::with_defaults(Algorithm::SVM), blobs(10, 6));
    CHECK_THROWS_AS(m->predict(dense({1, 2})), ValidationError);
  }

  TEST_CASE("dataset validation") {
    Dataset d = Dataset::from_dense({{1, 2}}, {3});
    CHECK_THROWS_AS(d.validate(), ValidationError);
    CHECK_THROWS_AS(train(ClassifierSpec::with_defaults(Algorithm::NB), Dataset{}), ValidationError);
  }
}
