#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace repfactor {

struct LanguageProfile {
  std::string group_id;
  std::int64_t unique_chars = 0;  // characters covering 99.9% of occurrences
  double ttr = 0.0;               // unique lemmas / tokens
  std::int64_t data_size = 0;     // tokens
};

struct TokenLemma {
  std::string token;
  std::string lemma;
};

struct ProfileOptions {
  double coverage = 0.999;
  bool case_fold_lemmas = false;
};

/// Characters are counted over the NFC-normalized tokens, whitespace
/// excluded; ties in frequency are broken by ascending codepoint.
LanguageProfile profile_corpus(const std::vector<TokenLemma>& tokens, const ProfileOptions& opts = {});

/// Size of the smallest frequency-ordered prefix of characters whose
/// cumulative count reaches `coverage` of the total.
std::int64_t coverage_count(std::vector<std::pair<char32_t, std::int64_t>> counts, double coverage);

/// Reads `token<TAB>lemma` lines; blank lines are skipped.
std::vector<TokenLemma> read_corpus(const std::filesystem::path& path);

}  // namespace repfactor
