#include "cfdetect/error.hpp"
#include "cfdetect/grammar.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cfd;

using Tags = std::vector<std::string>;

TEST_SUITE("grammar") {
  TEST_CASE("pattern parsing") {
    const auto g = parse_grammar("ModalChunks: MD VB VBN\nWishVerbs: PRP VBP PRP.* VBD\n");
    REQUIRE(g.patterns.size() == 2);
    CHECK(g.patterns[0].atoms.size() == 3);
    for (const auto& a : g.patterns[0].atoms) CHECK_FALSE(a.wildcard);
    CHECK(g.patterns[1].atoms[2].wildcard);
    CHECK(g.patterns[1].atoms[2].tag_prefix == "PRP");
    CHECK(g.patterns[1].family == PatternFamily::WishVerbs);
    CHECK(g.patterns[1].source_text == "PRP VBP PRP.* VBD");
    CHECK(g.feature_dim() == 6);
  }

  TEST_CASE("parse errors name the line") {
    try {
      parse_grammar("# header\nIfClauses:\n");
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(parse_grammar("Conditionals: IN PRP\n"), FormatError);
    CHECK_THROWS_AS(parse_grammar("IfClauses: IN .*\n"), FormatError);
    CHECK_THROWS_AS(parse_grammar("IfClauses: IN PRP\nIfClauses: IN PRP\n"), FormatError);
    CHECK_THROWS_AS(parse_grammar("IfClauses: A B C D E F G H I J K L M\n"), FormatError);
  }

  TEST_CASE("match semantics") {
    const auto g = parse_grammar("VerbInversion: VBD PRP VBN\nIfClauses: NN.*\nModalChunks: MD VB\n");
    CHECK(match(g.patterns[0], {"VBD", "PRP", "VBN"}) == std::vector<std::size_t>{0});
    CHECK(match(g.patterns[1], {"NNS", "VBD", "NNP"}) == std::vector<std::size_t>{0, 2});
    CHECK(match(g.patterns[2], {"VB", "MD"}).empty());
    CHECK(match(g.patterns[2], {}).empty());
  }

  TEST_CASE("featurize and classify with the shipped grammar") {
    const auto g = default_grammar();
    CHECK(g.patterns.size() == 46);
    CHECK(g.feature_dim() == 50);
    const Tags if_there = {"IN", "EX", "VBD", "DT", "NN"};
    const auto fv = featurize(g, if_there);
    CHECK(fv.per_family[static_cast<std::size_t>(PatternFamily::IfClauses)] == 1);
    CHECK(fv.per_family[static_cast<std::size_t>(PatternFamily::VerbInversion)] == 0);
    CHECK(fv.dense().size() == 50);

    const auto none = featurize(g, {"NNS", "VBP"});
    for (double v : none.dense()) CHECK(v == 0.0);
    CHECK(rule_based_classify(g, {"VBD", "PRP", "VBD"}) == 1);
    CHECK(rule_based_classify(g, {"NNS", "VBP"}) == 0);
  }

  TEST_CASE("shipped file equals the built-in grammar") {
    const auto file = parse_pattern_file(std::filesystem::path(CFD_SOURCE_DIR) / "data" / "counterfactual.patterns");
    const auto builtin = default_grammar();
    REQUIRE(file.patterns.size() == builtin.patterns.size());
    for (std::size_t i = 0; i < file.patterns.size(); ++i)
      CHECK(file.patterns[i].source_text == builtin.patterns[i].source_text);
  }
}
