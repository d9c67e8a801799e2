#include "repfactor/profile.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "repfactor/error.hpp"

namespace repfactor {
namespace {

icu::UnicodeString nfc(const std::string& utf8) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error(ErrorCode::IoFailure, "ICU NFC normalizer unavailable");
  icu::UnicodeString out = norm->normalize(icu::UnicodeString::fromUTF8(utf8), status);
  if (U_FAILURE(status)) throw Error(ErrorCode::ParseError, "cannot normalize: " + utf8);
  return out;
}

}  // namespace

std::int64_t coverage_count(std::vector<std::pair<char32_t, std::int64_t>> counts, double coverage) {
  std::sort(counts.begin(), counts.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::int64_t total = 0;
  for (const auto& [ch, n] : counts) total += n;
  if (total == 0) return 0;

  const double target = coverage * static_cast<double>(total);
  // Absorbs the representation error of e.g. 0.999 * 1000.
  const double slack = 1e-9 * static_cast<double>(total);
  std::int64_t cumulative = 0;
  std::int64_t used = 0;
  for (const auto& [ch, n] : counts) {
    cumulative += n;
    ++used;
    if (static_cast<double>(cumulative) + slack >= target) break;
  }
  return used;
}

LanguageProfile profile_corpus(const std::vector<TokenLemma>& tokens, const ProfileOptions& opts) {
  if (tokens.empty()) throw Error(ErrorCode::EmptyCorpus, "no tokens to profile");

  std::map<char32_t, std::int64_t> chars;
  std::set<std::string> lemmas;
  for (const auto& t : tokens) {
    const icu::UnicodeString s = nfc(t.token);
    for (int32_t i = 0; i < s.length();) {
      const UChar32 c = s.char32At(i);
      i += U16_LENGTH(c);
      if (u_isUWhiteSpace(c)) continue;
      ++chars[static_cast<char32_t>(c)];
    }
    icu::UnicodeString lemma = nfc(t.lemma);
    if (opts.case_fold_lemmas) lemma.foldCase();
    std::string key;
    lemma.toUTF8String(key);
    lemmas.insert(std::move(key));
  }

  LanguageProfile p;
  p.data_size = static_cast<std::int64_t>(tokens.size());
  p.ttr = static_cast<double>(lemmas.size()) / static_cast<double>(tokens.size());
  p.unique_chars = coverage_count({chars.begin(), chars.end()}, opts.coverage);
  return p;
}

std::vector<TokenLemma> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  std::vector<TokenLemma> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(lineno) + ": expected token<TAB>lemma");
    out.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return out;
}

}  // namespace repfactor
