#include <string>

#include "cfdetect/corpus.hpp"
#include "cfdetect/csv.hpp"
#include "cfdetect/error.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cfd;

TEST_SUITE("corpus") {
  TEST_CASE("task1 csv: quoted row") {
    const auto items =
        parse_task1_csv("sentenceID,gold_label,sentence\n100000,1,\"If dogs had no ears, they could not hear\"\n");
    REQUIRE(items.size() == 1);
    CHECK(items[0].sentence.id == "100000");
    CHECK(items[0].label == 1);
    CHECK(items[0].sentence.text == "If dogs had no ears, they could not hear");
  }

  TEST_CASE("task1 csv: header only and bad rows") {
    CHECK(parse_task1_csv("sentenceID,gold_label,sentence\n").empty());
    try {
      parse_task1_csv("sentenceID,gold_label,sentence\n1,0,a\n2,2,b\n");
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS(parse_task1_csv("sentenceID,sentence\n1,a\n"), FormatError);
    CHECK_THROWS_AS(parse_task1_csv("sentenceID,gold_label,sentence\n1,0,a\n1,1,b\n"), FormatError);
  }

  TEST_CASE("task2 csv: inclusive ids become half-open spans") {
    // 40 characters.
    const std::string text = "If it had rained today, we would stay in";
    REQUIRE(text.size() == 40);
    const auto items = parse_task2_csv(
        "sentenceID,sentence,antecedent_startid,antecedent_endid,consequent_startid,consequent_endid\n"
        "7,\"" + text + "\",0,13,-1,-1\n");
    REQUIRE(items.size() == 1);
    REQUIRE(items[0].spans.antecedent);
    CHECK(*items[0].spans.antecedent == CharSpan{0, 14});
    CHECK_FALSE(items[0].spans.consequent);
    CHECK(format_task2_csv(items).find("7,\"" + text + "\",0,13,-1,-1") != std::string::npos);
  }

  TEST_CASE("task2 csv: invalid spans") {
    const std::string head =
        "sentenceID,sentence,antecedent_startid,antecedent_endid,consequent_startid,consequent_endid\n";
    CHECK_THROWS_AS(parse_task2_csv(head + "1,abcdefghijklmnop,10,5,-1,-1\n"), FormatError);
    CHECK_THROWS_AS(parse_task2_csv(head + "1,abc,0,5,-1,-1\n"), FormatError);
    CHECK_THROWS_AS(parse_task2_csv(head + "1,abcdefgh,0,4,3,6\n"), FormatError);
  }

  TEST_CASE("tokenize splits punctuation and clitics") {
    const auto [tokens, offsets] = tokenize("I wouldn't go, \"really\".");
    const std::vector<std::string> want = {"I", "would", "n't", "go", ",", "\"", "really", "\"", "."};
    CHECK(tokens == want);
    CHECK(offsets[1] == CharSpan{2, 7});
    CHECK(offsets[2] == CharSpan{7, 10});
    CHECK(tokenize("").first.empty());
  }

  TEST_CASE("align spans to chunks") {
    TaggedSentence s;
    s.text = "If I had known , I would have left";
    std::tie(s.tokens, s.offsets) = tokenize(s.text);
    s.tags.assign(s.tokens.size(), "X");
    REQUIRE(s.tokens.size() == 9);
    SpanAnnotation ann{CharSpan{0, 14}, CharSpan{17, 34}};
    const auto chunks = align_spans_to_chunks(s, ann);
    const std::vector<Chunk> want = {Chunk::A, Chunk::A, Chunk::A, Chunk::A, Chunk::I,
                                     Chunk::C, Chunk::C, Chunk::C, Chunk::C};
    CHECK(chunks == want);

    CHECK(align_spans_to_chunks(s, {}) == std::vector<Chunk>(9, Chunk::I));
    CHECK(align_spans_to_chunks(s, {CharSpan{0, 34}, std::nullopt}) == std::vector<Chunk>(9, Chunk::A));
    CHECK_THROWS_AS(align_spans_to_chunks(s.offsets, {CharSpan{0, 12}, CharSpan{11, 14}}), AlignmentError);
  }

  TEST_CASE("conll round trip") {
    const std::string text = "# id: s1\n# text: Had you known\nHad\tVBD\tA\nyou\tPRP\tA\nknown\tVBN\tI\n\n";
    const auto parsed = parse_conll(text);
    REQUIRE(parsed.size() == 1);
    CHECK(parsed[0].chunks == std::vector<Chunk>{Chunk::A, Chunk::A, Chunk::I});
    CHECK(format_conll(parsed) == text);
    CHECK(parse_conll("").empty());
    CHECK(parse_conll("a\tDT\n\nb\tNN\n").size() == 2);
  }

  TEST_CASE("conll: ner and chunk columns") {
    const auto three = parse_conll("Obama\tNNP\tB-PER\nwon\tVBD\tO\n");
    REQUIRE(three.size() == 1);
    CHECK(three[0].ner == std::vector<std::string>{"B-PER", "O"});
    CHECK_FALSE(three[0].has_chunks());
    const auto four = parse_conll("Obama\tNNP\tB-PER\tA\nwon\tVBD\tO\tC\n");
    CHECK(four[0].has_ner());
    CHECK(four[0].chunks == std::vector<Chunk>{Chunk::A, Chunk::C});
  }

  TEST_CASE("conll: format errors carry line numbers") {
    try {
      parse_conll("a\tDT\tA\nb\tNN\n");
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(parse_conll("a\tDT\tA\nb\tNN\tQ\tZ\n"), FormatError);
    CHECK_THROWS_AS(parse_conll("onlytoken\n"), FormatError);
  }

  TEST_CASE("split sizes") {
    const auto s = split_sizes(13000, SplitSpec{});
    CHECK(s.train == 5200);
    CHECK(s.valid == 3900);
    CHECK(s.test == 3900);
    const auto one = split_sizes(1, SplitSpec{});
    CHECK(one.train == 1);
    CHECK(one.valid == 0);
    CHECK(one.test == 0);
  }

  TEST_CASE("split dataset: explicit counts and determinism") {
    std::vector<int> items(3551);
    for (int i = 0; i < 3551; ++i) items[i] = i;
    const auto split = split_dataset(items, SplitSizes{1740, 746, 1065}, 7);
    CHECK(split.train.size() == 1740);
    CHECK(split.valid.size() == 746);
    CHECK(split.test.size() == 1065);
    const auto again = split_dataset(items, SplitSizes{1740, 746, 1065}, 7);
    CHECK(split.test == again.test);
    std::vector<int> all = split.train;
    all.insert(all.end(), split.valid.begin(), split.valid.end());
    all.insert(all.end(), split.test.begin(), split.test.end());
    std::sort(all.begin(), all.end());
    CHECK(all == items);
    CHECK_THROWS_AS(split_dataset(items, SplitSizes{1, 1, 1}, 7), ValidationError);
    CHECK_THROWS_AS(SplitSpec({0.5, 0.5, 0.5, 0}).validate(), ValidationError);
  }

  TEST_CASE("sample files load") {
    const auto t1 = load_task1_csv(test::data_dir() / "task1_sample.csv");
    CHECK(t1.size() == 60);
    const auto t2 = load_task2_csv(test::data_dir() / "task2_sample.csv");
    const auto conll = read_conll(test::data_dir() / "task2_sample.conll");
    REQUIRE(t2.size() == conll.size());
    for (std::size_t i = 0; i < t2.size(); ++i) {
      CHECK(t2[i].sentence.id == conll[i].id);
      CHECK(align_spans_to_chunks(conll[i], t2[i].spans) == conll[i].chunks);
    }
  }
}
