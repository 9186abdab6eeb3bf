#include <cmath>

#include "cfdetect/classify.hpp"
#include "cfdetect/corpus.hpp"
#include "cfdetect/error.hpp"
#include "cfdetect/eval.hpp"
#include "cfdetect/rng.hpp"
#include "doctest.h"
#include "json.hpp"
#include "test_util.hpp"

using namespace cfd;

TEST_SUITE("eval") {
  TEST_CASE("prf1") {
    CHECK(prf1(0.7272, 0.0873).f1 == doctest::Approx(0.1559).epsilon(1e-3));
    const auto perfect = prf1(Confusion{5, 0, 0, 5});
    CHECK(perfect.precision == 1.0);
    CHECK(perfect.f1 == 1.0);
    const auto zero = prf1(Confusion{});
    CHECK(zero.precision == 0.0);
    CHECK(zero.recall == 0.0);
    CHECK(zero.f1 == 0.0);
  }

  TEST_CASE("confusion from labels") {
    const auto c = Confusion::from_labels({1, 1, 0, 0, 1}, {1, 0, 0, 1, 1});
    CHECK(c.tp == 2);
    CHECK(c.fp == 1);
    CHECK(c.fn == 1);
    CHECK(c.tn == 1);
    CHECK(c.swapped().tp == 1);
    CHECK_THROWS_AS(Confusion::from_labels({1}, {1, 0}), ValidationError);
  }

  TEST_CASE("classification report") {
    const auto r = classification_report({1, 1, 0, 0}, {1, 0, 0, 0});
    CHECK(r.precision == 0.5);
    CHECK(r.recall == 1.0);
    CHECK(*r.accuracy == 0.75);
    CHECK(r.per_class.at("0").support == 3.0);
    const auto j = nlohmann::json::parse(r.to_json());
    CHECK(j.at("f1").get<double>() == doctest::Approx(2.0 / 3.0));
    CHECK(j.contains("per_class"));
    CHECK_FALSE(j.contains("exact_match"));
  }

  TEST_CASE("token chunk f1: hand-counted case") {
    using enum Chunk;
    const std::vector<Chunk> gold = {A, A, A, A, A, I, I, I, I, I};
    const std::vector<Chunk> pred = {I, A, A, A, I, A, I, I, I, I};
    const auto r = token_chunk_f1({pred}, {gold});
    CHECK(r.precision == doctest::Approx(0.75));
    CHECK(r.recall == doctest::Approx(0.6));
    CHECK(r.f1 == doctest::Approx(2.0 / 3.0));
    CHECK(token_chunk_f1({gold}, {gold}).f1 == 1.0);
    CHECK(token_chunk_f1({std::vector<Chunk>(10, I)}, {gold}).recall == 0.0);
    CHECK_THROWS_WITH_AS(token_chunk_f1({{A}}, {{A, A}}, {"s9"}), doctest::Contains("s9"), ValidationError);
  }

  TEST_CASE("exact match") {
    const SpanAnnotation a{CharSpan{0, 5}, CharSpan{6, 9}};
    const SpanAnnotation off{CharSpan{0, 4}, CharSpan{6, 9}};
    CHECK(exact_match({a, a}, {a, a}) == 1.0);
    CHECK(exact_match({off}, {a}) == 0.0);
    CHECK(exact_match({a, off, off, off}, {a, a, a, a}) == 0.25);

    Task2Item x{{"1", "text"}, a}, y{{"2", "text"}, a};
    CHECK(exact_match(std::vector<Task2Item>{y, x}, std::vector<Task2Item>{x, y}) == 1.0);
    Task2Item z{{"3", "text"}, a};
    CHECK_THROWS_AS(exact_match(std::vector<Task2Item>{x, z}, std::vector<Task2Item>{x, y}), ValidationError);
  }

  TEST_CASE("stratified folds") {
    std::vector<int> y(12, 0);
    for (int i = 0; i < 4; ++i) y[i * 3] = 1;
    const auto plan = stratified_kfold(y, 3, 1);
    std::vector<int> pos;
    for (std::size_t f = 0; f < 3; ++f) {
      int p = 0;
      for (auto i : plan.test_indices(f)) p += y[i];
      pos.push_back(p);
      CHECK(plan.train_indices(f).size() + plan.test_indices(f).size() == 12);
    }
    std::sort(pos.begin(), pos.end());
    CHECK(pos == std::vector<int>{1, 1, 2});
    CHECK_THROWS_AS(stratified_kfold(y, 5, 1), ValidationError);
    CHECK_THROWS_AS(stratified_kfold(y, 1, 1), ValidationError);
    CHECK_NOTHROW(stratified_kfold(std::vector<int>(9, 0), 3, 1, true));
  }

  TEST_CASE("fold sizes on 13000 items") {
    std::vector<int> y(13000);
    Rng rng(3);
    for (auto& v : y) v = rng.uniform() < 0.11 ? 1 : 0;
    const auto plan = stratified_kfold(y, 3, 0);
    for (std::size_t f = 0; f < 3; ++f) {
      const double n = static_cast<double>(plan.test_indices(f).size());
      CHECK(std::abs(n - 13000.0 / 3.0) <= 1.0);
    }
  }

  TEST_CASE("cross validation") {
    std::vector<DenseVector> x;
    std::vector<int> y;
    for (int i = 0; i < 30; ++i) {
      x.push_back({i < 15 ? 0.0 + 0.01 * i : 5.0 + 0.01 * i});
      y.push_back(i < 15 ? 0 : 1);
    }
    const auto d = Dataset::from_dense(x, y);
    const auto knn = cross_validate(ClassifierSpec::with_defaults(Algorithm::KNN), d, {3, 4, 1});
    CHECK(knn.folds == 3);
    CHECK(knn.mean.at("f1") == 1.0);
    CHECK(knn.stddev.at("f1") == 0.0);

    const auto a = cross_validate(ClassifierSpec::with_defaults(Algorithm::LOGIT), d, {3, 4, 1});
    const auto b = cross_validate(ClassifierSpec::with_defaults(Algorithm::LOGIT), d, {3, 4, 3});
    CHECK(a.to_json() == b.to_json());

    // A constant feature leaves a tree nothing to split on: majority vote.
    std::vector<DenseVector> flat(20, DenseVector{1.0});
    std::vector<int> balanced(20);
    for (int i = 0; i < 20; ++i) balanced[i] = i % 2;
    const auto maj = cross_validate(ClassifierSpec::with_defaults(Algorithm::CART), Dataset::from_dense(flat, balanced),
                                    {2, 0, 1});
    CHECK(maj.mean.at("accuracy") == doctest::Approx(0.5).epsilon(0.05));
  }

  TEST_CASE("crf cross validation on the sample corpus") {
    const auto data = read_conll(test::data_dir() / "task2_sample.conll");
    TrainConfig cfg;
    cfg.epochs = 30;
    const auto r = cross_validate_crf(data, {}, cfg, {3, 0, 2});
    CHECK(r.folds == 3);
    CHECK(r.mean.count("f1_A") == 1);
    CHECK(r.mean.count("exact_match") == 1);
    CHECK(r.mean.at("f1") > 0.8);
  }

  TEST_CASE("token offsets fall back to the joined tokens") {
    TaggedSentence s;
    s.tokens = {"ab", "c"};
    s.tags = {"X", "Y"};
    const auto offs = token_offsets(s);
    CHECK(offs == std::vector<CharSpan>{{0, 2}, {3, 4}});
  }
}
