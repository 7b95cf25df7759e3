#include <doctest.h>

#include <random>

#include "e2r/analytics.hpp"
#include "e2r/error.hpp"

using namespace e2r;

namespace {

TokenizedDoc doc(std::string id, std::vector<std::string> tokens) { return {std::move(id), std::move(tokens), {}}; }

std::vector<std::string> repeat(const std::vector<std::pair<std::string, int>>& counts) {
  std::vector<std::string> out;
  for (const auto& [t, n] : counts) out.insert(out.end(), n, t);
  return out;
}

Utterance user(std::string text, std::string photo = "childhood") {
  return {0, Speaker::User, std::move(text), 0, std::move(photo), 1};
}

ErrorCode code_of(auto fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Io;
}

}  // namespace

TEST_SUITE("analytics") {
  TEST_CASE("word tokenizer folds case and strips punctuation") {
    UnicodeWordTokenizer t;
    CHECK(t.tokenize("The TV, the Film... and 1970s!") ==
          std::vector<std::string>{"the", "tv", "the", "film", "and", "1970s"});
    CHECK(t.tokenize("  ,.;  ").empty());
    // Fullwidth and CJK punctuation separate words; CJK characters are word characters.
    CHECK(t.tokenize("电视，电影。") == std::vector<std::string>{"电视", "电影"});
    CHECK(t.tokenize("café—bar") == std::vector<std::string>{"café", "bar"});
  }

  TEST_CASE("character n-gram tokenizer") {
    CharNgramTokenizer t(2);
    CHECK(t.tokenize("我家电视") == std::vector<std::string>{"我家", "家电", "电视"});
    CHECK(t.tokenize("电 TV") == std::vector<std::string>{"电", "tv"});
    CHECK(t.id() == "char-2gram");
    CHECK(make_tokenizer("char-3gram")->id() == "char-3gram");
    CHECK(make_tokenizer("unicode-word")->id() == "unicode-word");
    CHECK(code_of([] { make_tokenizer("bpe"); }) == ErrorCode::ConfigInvalid);
  }

  TEST_CASE("user document keeps only user speech") {
    UnicodeWordTokenizer t;
    std::vector<Utterance> tr{{1, Speaker::Agent, "Television question?", 0, "childhood", 1},
                              user("Our television was small"), user("The city changed", "urban")};
    const auto all = user_document("P1", tr, t);
    CHECK(all.tokens.size() == 7);
    const auto child = user_document("P1", tr, t, "childhood");
    CHECK(child.tokens == std::vector<std::string>{"our", "television", "was", "small"});
    CHECK(child.source_photo_ids == std::vector<std::string>{"childhood"});
  }

  TEST_CASE("keyword counts from the focused participant") {
    const auto d = doc("P1", repeat({{"television", 6}, {"film", 6}, {"home", 2}, {"sofa", 1}}));
    const auto k = keyword_frequencies(d, 5);
    REQUIRE(k.size() == 4);
    CHECK(k[0] == TermCount{"film", 6});
    CHECK(k[1] == TermCount{"television", 6});
    CHECK(k[2] == TermCount{"home", 2});
    CHECK(keyword_frequencies(d, 2).size() == 2);
  }

  TEST_CASE("keyword counts from the diffuse participant") {
    const auto d = doc("P6", repeat({{"child", 9}, {"times", 11}, {"family", 17}, {"school", 3}}));
    const auto k = keyword_frequencies(d, 3);
    REQUIRE(k.size() == 3);
    CHECK(k[0] == TermCount{"family", 17});
    CHECK(k[1] == TermCount{"times", 11});
    CHECK(k[2] == TermCount{"child", 9});
    CHECK(code_of([] { keyword_frequencies(doc("e", {}), 5); }) == ErrorCode::EmptyDocument);
  }

  TEST_CASE("keyword counts equal a brute-force scan") {
    std::mt19937_64 rng(8);
    const std::vector<std::string> vocab{"tv", "film", "family", "child", "times", "street", "bike", "radio"};
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<std::string> tokens(1 + rng() % 80);
      for (auto& t : tokens) t = vocab[rng() % vocab.size()];
      const auto k = keyword_frequencies(doc("d", tokens), vocab.size());
      std::size_t total = 0;
      for (const auto& [term, count] : k) {
        int brute = 0;
        for (const auto& t : tokens) brute += t == term ? 1 : 0;
        CHECK(count == brute);
        total += static_cast<std::size_t>(count);
      }
      CHECK(total == tokens.size());
      for (std::size_t i = 1; i < k.size(); ++i) {
        CHECK((k[i - 1].second > k[i].second || (k[i - 1].second == k[i].second && k[i - 1].first < k[i].first)));
      }
    }
  }

  TEST_CASE("tf-idf on a two-document corpus") {
    const std::vector<TokenizedDoc> c{doc("d1", {"tv", "tv", "film"}), doc("d2", {"family"})};
    const auto t = tfidf(c);
    CHECK(t.corpus_size == 2);
    // (2/3) ln 2
    CHECK(std::abs(t.find("d1", "tv")->tfidf - 0.46209812037329684) < 1e-12);
    CHECK(t.find("d2", "tv") == nullptr);
  }

  TEST_CASE("tf-idf hand-computed on three documents") {
    const std::vector<TokenizedDoc> c{doc("d1", {"tv", "tv", "film"}), doc("d2", {"family", "tv"}),
                                      doc("d3", {"family", "child", "child", "times"})};
    const auto t = tfidf(c);
    // ln(3/2) = 0.4054651081081644, ln 3 = 1.0986122886681098
    CHECK(std::abs(t.idf.at("tv") - 0.4054651081081644) < 1e-12);
    CHECK(std::abs(t.idf.at("film") - 1.0986122886681098) < 1e-12);
    CHECK(std::abs(t.find("d1", "tv")->tfidf - 0.2703100720721096) < 1e-9);
    CHECK(std::abs(t.find("d1", "film")->tfidf - 0.3662040962227033) < 1e-9);
    CHECK(std::abs(t.find("d2", "family")->tfidf - 0.2027325540540822) < 1e-9);
    CHECK(std::abs(t.find("d2", "tv")->tfidf - 0.2027325540540822) < 1e-9);
    CHECK(std::abs(t.find("d3", "child")->tfidf - 0.5493061443340549) < 1e-9);
    CHECK(std::abs(t.find("d3", "family")->tfidf - 0.1013662770270411) < 1e-9);
    CHECK(std::abs(t.find("d3", "times")->tfidf - 0.2746530721670275) < 1e-9);
    CHECK(t.find("d3", "child")->tf == 0.5);
    for (const auto& d : t.docs) {
      for (const auto& [term, e] : d) {
        CHECK(e.tf > 0.0);
        CHECK(e.tf <= 1.0);
        CHECK(e.tfidf == doctest::Approx(e.tf * e.idf).epsilon(1e-15));
      }
    }
  }

  TEST_CASE("tf-idf edge cases") {
    const std::vector<TokenizedDoc> shared{doc("a", {"x", "y"}), doc("b", {"x"})};
    const auto t = tfidf(shared);
    CHECK(t.find("a", "x")->tfidf == 0.0);
    CHECK(t.find("b", "x")->tfidf == 0.0);
    const std::vector<TokenizedDoc> one{doc("a", {"x"})};
    CHECK(code_of([&] { tfidf(one); }) == ErrorCode::CorpusTooSmall);
    const std::vector<TokenizedDoc> with_empty{doc("a", {"x"}), doc("b", {})};
    CHECK(code_of([&] { tfidf(with_empty); }) == ErrorCode::EmptyDocument);
  }

  TEST_CASE("adding a document without a term raises its idf") {
    std::mt19937_64 rng(21);
    const std::vector<std::string> vocab{"a", "b", "c", "d", "e"};
    for (int trial = 0; trial < 30; ++trial) {
      std::vector<TokenizedDoc> c;
      for (int d = 0; d < 2 + static_cast<int>(rng() % 3); ++d) {
        std::vector<std::string> tokens(1 + rng() % 6);
        for (auto& t : tokens) t = vocab[rng() % vocab.size()];
        c.push_back(doc("d" + std::to_string(d), tokens));
      }
      const auto before = tfidf(c);
      c.push_back(doc("extra", {"zzz"}));
      const auto after = tfidf(c);
      for (const auto& [term, idf] : before.idf) CHECK(after.idf.at(term) > idf);
    }
  }

  TEST_CASE("lexicon parsing") {
    UnicodeWordTokenizer t;
    const auto lex = parse_lexicon(R"({"Television": ["TV", "Television", "film"], "Decoration": ["poster"]})", t);
    CHECK(lex.at("Television") == std::set<std::string>{"tv", "television", "film"});
    CHECK(code_of([&] { parse_lexicon("[1,2]", t); }) == ErrorCode::ConfigInvalid);
    CHECK(code_of([&] { parse_lexicon("{", t); }) == ErrorCode::ConfigInvalid);
  }

  TEST_CASE("focused participant correlates with the top ROI") {
    UnicodeWordTokenizer t;
    const auto lex = parse_lexicon(R"({"Television": ["television", "tv", "film"], "Decoration": ["poster"]})", t);
    // 10 user tokens, 3 of them in the Television lexicon.
    const std::vector<Utterance> tr{user("We watched television and film"), user("our TV was at home")};
    const std::vector<PhotoAttention> photos{{"childhood", {{1, "Television", 0.8}, {2, "Decoration", 0.2}}, 0.8}};
    const auto r = roi_theme_correlation("P1", photos, tr, lex, t);
    REQUIRE(r.rows.size() == 1);
    CHECK(r.rows[0].top_label == "Television");
    CHECK(r.rows[0].correlation == doctest::Approx(0.30));
    CHECK(r.rows[0].focused);
    const auto csv = correlation_csv(r);
    CHECK(csv.rfind("# tokenizer=unicode-word; tfidf=tf=count/len;idf=ln(N/df);no-smoothing; focus_threshold=0.50\n", 0) == 0);
    CHECK(csv.find("participant,photo_id,top_roi,correlation,focus_index,tag,top_terms\n") != std::string::npos);
    CHECK(csv.find("P1,childhood,Television,0.3000,0.8000,focused,") != std::string::npos);
    CHECK(correlation_summary(r).find("focused attention") != std::string::npos);
  }

  TEST_CASE("diffuse attention and missing lexicon entries") {
    UnicodeWordTokenizer t;
    const auto lex = parse_lexicon(R"({"People": ["people"], "Furniture": ["chair"], "Plants": ["plant"]})", t);
    const std::vector<Utterance> tr{user("people chair plant people chair plant")};
    const std::vector<PhotoAttention> even{
        {"childhood", {{1, "People", 1.0 / 3}, {2, "Furniture", 1.0 / 3}, {3, "Plants", 1.0 / 3}}, 1.0 / 3}};
    const auto r = roi_theme_correlation("P6", even, tr, lex, t);
    CHECK_FALSE(r.rows[0].focused);
    CHECK(correlation_csv(r).find(",diffuse,") != std::string::npos);
    const std::vector<PhotoAttention> unknown{{"childhood", {{1, "Heating", 1.0}}, 1.0}};
    CHECK(code_of([&] { roi_theme_correlation("P6", unknown, tr, lex, t); }) == ErrorCode::MissingLexiconEntry);
  }

  TEST_CASE("tf-idf CSV records the tokenizer") {
    const std::vector<TokenizedDoc> c{doc("d1", {"tv", "tv", "film"}), doc("d2", {"family"})};
    const auto csv = tfidf_csv(tfidf(c), "unicode-word");
    CHECK(csv.rfind("# tokenizer=unicode-word;", 0) == 0);
    CHECK(csv.find("doc_id,term,tf,idf,tfidf\n") != std::string::npos);
    CHECK(csv.find("d1,tv,0.666667,0.693147,0.462098\n") != std::string::npos);
  }
}
