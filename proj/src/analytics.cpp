#include "e2r/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "e2r/error.hpp"

namespace e2r {

namespace {

struct CodePoint {
  char32_t value = 0;
  std::size_t offset = 0;
  std::size_t length = 1;
};

// Lenient UTF-8 decoding: invalid bytes decode as U+FFFD of length 1.
std::vector<CodePoint> decode_utf8(std::string_view s) {
  std::vector<CodePoint> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b = static_cast<unsigned char>(s[i]);
    int len = 1;
    char32_t cp = 0xFFFD;
    if (b < 0x80) {
      cp = b;
    } else if ((b >> 5) == 0x6) {
      len = 2;
      cp = b & 0x1F;
    } else if ((b >> 4) == 0xE) {
      len = 3;
      cp = b & 0x0F;
    } else if ((b >> 3) == 0x1E) {
      len = 4;
      cp = b & 0x07;
    } else {
      out.push_back({0xFFFD, i, 1});
      ++i;
      continue;
    }
    if (i + len > s.size()) {
      out.push_back({0xFFFD, i, 1});
      ++i;
      continue;
    }
    bool ok = true;
    for (int k = 1; k < len; ++k) {
      const auto c = static_cast<unsigned char>(s[i + k]);
      if ((c >> 6) != 0x2) ok = false;
      cp = (cp << 6) | (c & 0x3F);
    }
    if (!ok) {
      out.push_back({0xFFFD, i, 1});
      ++i;
      continue;
    }
    out.push_back({cp, i, static_cast<std::size_t>(len)});
    i += len;
  }
  return out;
}

bool is_punctuation_or_space(char32_t c) {
  if (c < 0x80) return !std::isalnum(static_cast<int>(c));
  return c == 0xFFFD || (c >= 0x00A0 && c <= 0x00BF) || (c >= 0x2000 && c <= 0x206F) ||
         (c >= 0x3000 && c <= 0x303F) || (c >= 0xFF01 && c <= 0xFF0F) || (c >= 0xFF1A && c <= 0xFF20) ||
         (c >= 0xFF3B && c <= 0xFF40) || (c >= 0xFF5B && c <= 0xFF65) || c == 0x00D7 || c == 0x00F7;
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

}  // namespace

std::vector<std::string> UnicodeWordTokenizer::tokenize(std::string_view text) const {
  std::vector<std::string> out;
  const auto cps = decode_utf8(text);
  std::size_t start = 0;
  bool in_word = false;
  for (std::size_t k = 0; k <= cps.size(); ++k) {
    const bool word = k < cps.size() && !is_punctuation_or_space(cps[k].value);
    if (word && !in_word) {
      start = cps[k].offset;
      in_word = true;
    } else if (!word && in_word) {
      const auto end = k < cps.size() ? cps[k].offset : text.size();
      out.push_back(lower_ascii(text.substr(start, end - start)));
      in_word = false;
    }
  }
  return out;
}

std::vector<std::string> CharNgramTokenizer::tokenize(std::string_view text) const {
  std::vector<std::string> out;
  const auto cps = decode_utf8(text);
  std::size_t k = 0;
  while (k < cps.size()) {
    if (is_punctuation_or_space(cps[k].value)) {
      ++k;
      continue;
    }
    const bool ascii = cps[k].value < 0x80;
    std::size_t end = k;
    while (end < cps.size() && !is_punctuation_or_space(cps[end].value) && (cps[end].value < 0x80) == ascii) ++end;
    auto slice = [&](std::size_t a, std::size_t b) {
      const auto from = cps[a].offset;
      const auto to = cps[b - 1].offset + cps[b - 1].length;
      return lower_ascii(text.substr(from, to - from));
    };
    const auto len = end - k;
    if (ascii || len <= static_cast<std::size_t>(n_)) {
      out.push_back(slice(k, end));
    } else {
      for (std::size_t a = k; a + n_ <= end; ++a) out.push_back(slice(a, a + n_));
    }
    k = end;
  }
  return out;
}

std::unique_ptr<Tokenizer> make_tokenizer(std::string_view id) {
  if (id.empty() || id == "unicode-word") return std::make_unique<UnicodeWordTokenizer>();
  if (id.starts_with("char-") && id.ends_with("gram")) {
    const auto n = std::stoi(std::string(id.substr(5, id.size() - 9)));
    if (n < 1) throw Error(ErrorCode::ConfigInvalid, "n-gram size must be >= 1");
    return std::make_unique<CharNgramTokenizer>(n);
  }
  throw Error(ErrorCode::ConfigInvalid, "unknown tokenizer '" + std::string(id) + "'");
}

TokenizedDoc user_document(std::string doc_id, std::span<const Utterance> transcript, const Tokenizer& tokenizer,
                           std::string_view photo_id) {
  TokenizedDoc doc;
  doc.doc_id = std::move(doc_id);
  for (const auto& u : transcript) {
    if (u.speaker != Speaker::User) continue;
    if (!photo_id.empty() && u.photo_id != photo_id) continue;
    auto toks = tokenizer.tokenize(u.text);
    doc.tokens.insert(doc.tokens.end(), toks.begin(), toks.end());
    if (std::find(doc.source_photo_ids.begin(), doc.source_photo_ids.end(), u.photo_id) == doc.source_photo_ids.end()) {
      doc.source_photo_ids.push_back(u.photo_id);
    }
  }
  return doc;
}

std::vector<TermCount> keyword_frequencies(const TokenizedDoc& doc, std::size_t top_k) {
  if (doc.tokens.empty()) throw Error(ErrorCode::EmptyDocument, "document '" + doc.doc_id + "' has no tokens");
  std::map<std::string, int> counts;
  for (const auto& t : doc.tokens) ++counts[t];
  std::vector<TermCount> out(counts.begin(), counts.end());
  std::stable_sort(out.begin(), out.end(), [](const TermCount& a, const TermCount& b) { return a.second > b.second; });
  if (out.size() > top_k) out.resize(top_k);
  return out;
}

const TfIdfEntry* TfIdfTable::find(std::string_view doc_id, const std::string& term) const {
  for (std::size_t d = 0; d < doc_ids.size(); ++d) {
    if (doc_ids[d] != doc_id) continue;
    auto it = docs[d].find(term);
    return it == docs[d].end() ? nullptr : &it->second;
  }
  return nullptr;
}

TfIdfTable tfidf(std::span<const TokenizedDoc> corpus) {
  if (corpus.size() < 2) throw Error(ErrorCode::CorpusTooSmall, std::to_string(corpus.size()) + " document(s), need 2");
  TfIdfTable table;
  table.corpus_size = corpus.size();
  std::vector<std::map<std::string, int>> counts(corpus.size());
  std::map<std::string, int> df;
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    if (corpus[d].tokens.empty()) {
      throw Error(ErrorCode::EmptyDocument, "document '" + corpus[d].doc_id + "' has no tokens");
    }
    for (const auto& t : corpus[d].tokens) ++counts[d][t];
    for (const auto& [t, _] : counts[d]) ++df[t];
  }
  const double n = static_cast<double>(corpus.size());
  for (const auto& [t, f] : df) table.idf[t] = std::log(n / f);
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    table.doc_ids.push_back(corpus[d].doc_id);
    auto& row = table.docs.emplace_back();
    const double len = static_cast<double>(corpus[d].tokens.size());
    for (const auto& [t, c] : counts[d]) {
      TfIdfEntry e;
      e.tf = c / len;
      e.idf = table.idf[t];
      e.tfidf = e.tf * e.idf;
      row.emplace(t, e);
    }
  }
  return table;
}

ThemeLexicon parse_lexicon(std::string_view json_text, const Tokenizer& tokenizer) {
  ThemeLexicon lex;
  try {
    const auto j = nlohmann::json::parse(json_text);
    for (const auto& [label, words] : j.items()) {
      auto& set = lex[label];
      for (const auto& w : words) {
        for (auto& tok : tokenizer.tokenize(w.get<std::string>())) set.insert(std::move(tok));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("lexicon: ") + e.what());
  }
  return lex;
}

CorrelationReport roi_theme_correlation(std::string participant, std::span<const PhotoAttention> photos,
                                        std::span<const Utterance> transcript, const ThemeLexicon& lexicon,
                                        const Tokenizer& tokenizer, double focus_threshold, std::size_t top_terms) {
  for (const auto& p : photos) {
    for (const auto& r : p.rois) {
      if (r.label && !lexicon.contains(*r.label)) {
        throw Error(ErrorCode::MissingLexiconEntry, "no lexicon entry for ROI label '" + *r.label + "'");
      }
    }
  }
  CorrelationReport report;
  report.tokenizer_id = tokenizer.id();
  report.focus_threshold = focus_threshold;
  for (const auto& p : photos) {
    CorrelationRow row;
    row.participant = participant;
    row.photo_id = p.photo_id;
    row.focus = p.focus;
    row.focused = p.focus >= focus_threshold;
    const RoiDigest* top = nullptr;
    for (const auto& r : p.rois) {
      if (r.rank == 1) top = &r;
    }
    const auto doc = user_document(participant, transcript, tokenizer, p.photo_id);
    if (top && top->label) {
      row.top_label = *top->label;
      const auto& words = lexicon.at(*top->label);
      std::size_t hits = 0;
      for (const auto& t : doc.tokens) hits += words.contains(t) ? 1 : 0;
      row.correlation = doc.tokens.empty() ? 0.0 : static_cast<double>(hits) / doc.tokens.size();
    }
    if (!doc.tokens.empty()) row.top_terms = keyword_frequencies(doc, top_terms);
    report.rows.push_back(std::move(row));
  }
  return report;
}

namespace {

std::string num(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string correlation_csv(const CorrelationReport& report) {
  std::ostringstream out;
  out << "# tokenizer=" << report.tokenizer_id << "; tfidf=" << report.tfidf_variant
      << "; focus_threshold=" << num(report.focus_threshold, 2) << '\n';
  out << "participant,photo_id,top_roi,correlation,focus_index,tag,top_terms\n";
  for (const auto& r : report.rows) {
    std::string terms;
    for (const auto& [t, c] : r.top_terms) terms += (terms.empty() ? "" : " ") + t + ":" + std::to_string(c);
    out << csv_field(r.participant) << ',' << csv_field(r.photo_id) << ',' << csv_field(r.top_label) << ','
        << num(r.correlation, 4) << ',' << num(r.focus, 4) << ',' << (r.focused ? "focused" : "diffuse") << ','
        << csv_field(terms) << '\n';
  }
  return out.str();
}

std::string correlation_summary(const CorrelationReport& report) {
  std::ostringstream out;
  out << "ROI / conversation correlation (tokenizer " << report.tokenizer_id << ", " << report.tfidf_variant << ")\n";
  for (const auto& r : report.rows) {
    out << "  " << r.participant << " / " << r.photo_id << ": " << (r.focused ? "focused" : "diffuse")
        << " attention (focus " << num(r.focus, 2) << ")";
    if (!r.top_label.empty()) {
      out << ", top ROI " << r.top_label << ", " << num(100.0 * r.correlation, 1) << "% of user words on that theme";
    }
    if (!r.top_terms.empty()) {
      out << "; frequent words:";
      for (const auto& [t, c] : r.top_terms) out << ' ' << t << " (" << c << ")";
    }
    out << '\n';
  }
  return out.str();
}

std::string tfidf_csv(const TfIdfTable& table, std::string_view tokenizer_id) {
  std::ostringstream out;
  out << "# tokenizer=" << tokenizer_id << "; tfidf=" << kTfIdfVariant << "; N=" << table.corpus_size << '\n';
  out << "doc_id,term,tf,idf,tfidf\n";
  for (std::size_t d = 0; d < table.doc_ids.size(); ++d) {
    for (const auto& [t, e] : table.docs[d]) {
      out << csv_field(table.doc_ids[d]) << ',' << csv_field(t) << ',' << num(e.tf, 6) << ',' << num(e.idf, 6) << ','
          << num(e.tfidf, 6) << '\n';
    }
  }
  return out.str();
}

}  // namespace e2r
