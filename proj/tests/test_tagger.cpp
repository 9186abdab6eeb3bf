#include "cfdetect/corpus.hpp"
#include "cfdetect/error.hpp"
#include "cfdetect/tagger.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cfd;

namespace {
TaggedSentence sent(std::vector<std::string> tokens, std::vector<std::string> tags) {
  TaggedSentence s;
  s.tokens = std::move(tokens);
  s.tags = std::move(tags);
  return s;
}
}  // namespace

TEST_SUITE("tagger") {
  TEST_CASE("memorizes a single sentence") {
    const auto m = train_tagger({sent({"dogs", "bark"}, {"NNS", "VBP"})}, 5, 0);
    CHECK(tag(m, {"dogs", "bark"}) == std::vector<std::string>{"NNS", "VBP"});
    CHECK(m.averaged());
  }

  TEST_CASE("training preconditions") {
    CHECK_THROWS_AS(train_tagger({}, 5, 0), TrainingError);
    CHECK_THROWS_AS(train_tagger({sent({"a"}, {"DT"})}, 0, 0), TrainingError);
  }

  TEST_CASE("context disambiguates") {
    std::vector<TaggedSentence> data = {sent({"I", "run", "fast"}, {"PRP", "VBP", "RB"}),
                                        sent({"a", "run", "today"}, {"DT", "NN", "NN"})};
    const auto m = train_tagger(data, 10, 3);
    CHECK(tag(m, {"I", "run", "fast"}) == data[0].tags);
    CHECK(tag(m, {"a", "run", "today"}) == data[1].tags);
  }

  TEST_CASE("suffix evidence tags unseen -ed words as verbs") {
    std::vector<TaggedSentence> data;
    for (const char* v : {"walked", "talked", "jumped", "played", "opened", "called", "wanted", "looked"})
      data.push_back(sent({"they", v, "home"}, {"PRP", "VBD", "NN"}));
    const auto m = train_tagger(data, 10, 1);
    const auto tags = tag(m, {"they", "smiled", "home"});
    CHECK((tags[1] == "VBD" || tags[1] == "VBN"));
  }

  TEST_CASE("serialization round trip") {
    const auto m = train_tagger({sent({"dogs", "bark"}, {"NNS", "VBP"}), sent({"a", "dog"}, {"DT", "NN"})}, 3, 0);
    const auto back = TaggerModel::deserialize(m.serialize());
    CHECK(back.serialize() == m.serialize());
    CHECK(tag(back, {"a", "dog", "barks"}) == tag(m, {"a", "dog", "barks"}));
    CHECK_THROWS_AS(TaggerModel::deserialize("nonsense"), FormatError);
  }

  TEST_CASE("tag normalization") {
    auto s = sent({"It", "could", "not", "have", "happened"}, {"PRP", "VBD", "RB", "VB", "VBN"});
    const auto n = normalize_tags(s);
    CHECK(n.tags == std::vector<std::string>{"PRP", "MD", "RP", "VB", "VBN"});

    auto w = sent({"I", "really", "wish", "it", "was", "n't"}, {"PRP", "RB", "NN", "PRP", "VBD", "RB"});
    CHECK(normalize_tags(w).tags == std::vector<std::string>{"PRP", "RB", "VBP", "PRP", "VBD", "RP"});

    auto d = sent({"her", "wishes", "came"}, {"PRP$", "VBZ", "VBD"});
    CHECK(normalize_tags(d).tags[1] == "NNS");

    auto plain = sent({"Dogs", "bark"}, {"NNS", "VBP"});
    CHECK(normalize_tags(plain).tags == plain.tags);
  }
}
