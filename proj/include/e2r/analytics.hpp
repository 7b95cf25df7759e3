#pragma once

#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "e2r/session.hpp"

namespace e2r {

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<std::string> tokenize(std::string_view text) const = 0;
  virtual std::string id() const = 0;
};

// Letters/digits runs (any non-punctuation code point counts as a letter);
// ASCII is lowercase-folded.
class UnicodeWordTokenizer final : public Tokenizer {
 public:
  std::vector<std::string> tokenize(std::string_view text) const override;
  std::string id() const override { return "unicode-word"; }
};

// Code-point n-grams over runs of non-ASCII word characters (for unsegmented
// CJK text); ASCII words are kept whole.
class CharNgramTokenizer final : public Tokenizer {
 public:
  explicit CharNgramTokenizer(int n = 2) : n_(n) {}
  std::vector<std::string> tokenize(std::string_view text) const override;
  std::string id() const override { return "char-" + std::to_string(n_) + "gram"; }

 private:
  int n_;
};

std::unique_ptr<Tokenizer> make_tokenizer(std::string_view id);

struct TokenizedDoc {
  std::string doc_id;
  std::vector<std::string> tokens;
  std::vector<std::string> source_photo_ids;
};

// User utterances only, optionally limited to one photo.
TokenizedDoc user_document(std::string doc_id, std::span<const Utterance> transcript, const Tokenizer& tokenizer,
                           std::string_view photo_id = {});

using TermCount = std::pair<std::string, int>;

// Count desc, then term asc; truncated to top_k. Throws EmptyDocument.
std::vector<TermCount> keyword_frequencies(const TokenizedDoc& doc, std::size_t top_k);

inline constexpr std::string_view kTfIdfVariant = "tf=count/len;idf=ln(N/df);no-smoothing";

struct TfIdfEntry {
  double tf = 0.0;
  double idf = 0.0;
  double tfidf = 0.0;
};

struct TfIdfTable {
  std::size_t corpus_size = 0;
  std::vector<std::string> doc_ids;
  std::vector<std::map<std::string, TfIdfEntry>> docs;  // parallel to doc_ids
  std::map<std::string, double> idf;

  const TfIdfEntry* find(std::string_view doc_id, const std::string& term) const;
};

// Throws CorpusTooSmall below 2 documents, EmptyDocument on an empty one.
TfIdfTable tfidf(std::span<const TokenizedDoc> corpus);

// label -> keyword set (keywords pass through the tokenizer).
using ThemeLexicon = std::map<std::string, std::set<std::string>>;
ThemeLexicon parse_lexicon(std::string_view json_text, const Tokenizer& tokenizer);

struct PhotoAttention {
  std::string photo_id;
  std::vector<RoiDigest> rois;
  double focus = 0.0;
};

struct CorrelationRow {
  std::string participant;
  std::string photo_id;
  std::string top_label;  // empty when the top ROI is unlabeled or absent
  double correlation = 0.0;  // share of user tokens in the top label's lexicon
  double focus = 0.0;
  bool focused = false;
  std::vector<TermCount> top_terms;
};

struct CorrelationReport {
  std::string tokenizer_id;
  std::string tfidf_variant{kTfIdfVariant};
  double focus_threshold = 0.5;
  std::vector<CorrelationRow> rows;
};

// Throws MissingLexiconEntry when a labelled ROI has no lexicon entry.
CorrelationReport roi_theme_correlation(std::string participant, std::span<const PhotoAttention> photos,
                                        std::span<const Utterance> transcript, const ThemeLexicon& lexicon,
                                        const Tokenizer& tokenizer, double focus_threshold = 0.5,
                                        std::size_t top_terms = 5);

std::string correlation_csv(const CorrelationReport& report);
std::string correlation_summary(const CorrelationReport& report);
std::string tfidf_csv(const TfIdfTable& table, std::string_view tokenizer_id);

}  // namespace e2r
