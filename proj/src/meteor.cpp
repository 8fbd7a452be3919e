#include "radlabel/meteor.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace radlabel {

namespace {

bool is_word_byte(char c) {
  const auto uc = static_cast<unsigned char>(c);
  return std::isalnum(uc) || uc >= 0x80 || c == '\'';
}

struct SuffixTable {
  const char* lang;
  std::vector<const char*> suffixes;  // longest first
};

const std::vector<const char*>& suffixes_for(const std::string& lang) {
  static const SuffixTable kEnglish{"en", {"ments", "ment", "ingly", "ing", "edly", "ed",
                                           "ously", "ies", "es", "ly", "s"}};
  static const SuffixTable kSpanish{"es", {"aciones", "ciones", "amente", "mente", "idades",
                                           "idad", "arias", "aria", "icos", "icas", "es", "s"}};
  static const SuffixTable kFrench{"fr", {"issements", "issement", "atrices", "atrice", "ements",
                                          "ement", "euses", "euse", "ives", "ive", "es", "s"}};
  static const SuffixTable kDanish{"da", {"ernes", "erens", "erne", "eren", "erer", "ede", "ende",
                                          "er", "en", "et", "e", "s"}};
  static const SuffixTable kShared{"", {"es", "s", "e"}};
  if (lang == "en") return kEnglish.suffixes;
  if (lang == "es") return kSpanish.suffixes;
  if (lang == "fr") return kFrench.suffixes;
  if (lang == "da") return kDanish.suffixes;
  return kShared.suffixes;
}

bool ends_with(const std::string& word, const char* suffix) {
  const std::size_t len = std::char_traits<char>::length(suffix);
  return word.size() >= len && word.compare(word.size() - len, len, suffix) == 0;
}

// Greedy in-order unigram alignment over positions that pass `same`.
template <typename Same>
void match_stage(const std::vector<std::string>& hyp, const std::vector<std::string>& ref,
                 std::vector<int>& hyp_to_ref, std::vector<bool>& ref_used, Same same) {
  for (std::size_t i = 0; i < hyp.size(); ++i) {
    if (hyp_to_ref[i] >= 0) continue;
    for (std::size_t j = 0; j < ref.size(); ++j) {
      if (ref_used[j]) continue;
      if (same(hyp[i], ref[j])) {
        hyp_to_ref[i] = static_cast<int>(j);
        ref_used[j] = true;
        break;
      }
    }
  }
}

}  // namespace

std::vector<std::string> meteor_tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  bool current_is_word = false;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(current);
    current.clear();
  };
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
      continue;
    }
    const bool word = is_word_byte(c);
    if (!current.empty() && word != current_is_word) flush();
    current_is_word = word;
    const auto uc = static_cast<unsigned char>(c);
    current.push_back(uc < 0x80 ? static_cast<char>(std::tolower(uc)) : c);
  }
  flush();
  return tokens;
}

std::string light_stem(const std::string& token, const std::string& lang) {
  std::string stem = token;
  // Strip to a fixpoint so inflection chains ("findings" vs "finding") agree.
  bool stripped = true;
  while (stripped) {
    stripped = false;
    for (const char* suffix : suffixes_for(lang)) {
      const std::size_t len = std::char_traits<char>::length(suffix);
      if (stem.size() >= len + 3 && ends_with(stem, suffix)) {
        stem.resize(stem.size() - len);
        stripped = true;
        break;
      }
    }
  }
  return stem;
}

MeteorScore meteor_detailed(const std::string& hypothesis, const std::string& reference,
                            const std::string& lang) {
  MeteorScore result;
  const auto hyp = meteor_tokenize(hypothesis);
  const auto ref = meteor_tokenize(reference);
  if (hyp.empty() || ref.empty()) return result;

  std::vector<int> hyp_to_ref(hyp.size(), -1);
  std::vector<bool> ref_used(ref.size(), false);
  match_stage(hyp, ref, hyp_to_ref, ref_used,
              [](const std::string& a, const std::string& b) { return a == b; });
  match_stage(hyp, ref, hyp_to_ref, ref_used, [&](const std::string& a, const std::string& b) {
    return light_stem(a, lang) == light_stem(b, lang);
  });

  int matches = 0;
  int chunks = 0;
  int prev_ref = -2;
  for (std::size_t i = 0; i < hyp.size(); ++i) {
    if (hyp_to_ref[i] < 0) continue;
    ++matches;
    // A chunk continues only when both sides advance by exactly one position.
    if (!(i > 0 && hyp_to_ref[i] == prev_ref + 1 && hyp_to_ref[i - 1] == prev_ref)) ++chunks;
    prev_ref = hyp_to_ref[i];
  }
  if (matches == 0) return result;

  result.matches = matches;
  result.chunks = chunks;
  result.precision = static_cast<double>(matches) / static_cast<double>(hyp.size());
  result.recall = static_cast<double>(matches) / static_cast<double>(ref.size());
  result.fmean = 10.0 * result.precision * result.recall /
                 (result.recall + 9.0 * result.precision);
  const double frag = static_cast<double>(chunks) / static_cast<double>(matches);
  result.penalty = 0.5 * frag * frag * frag;
  result.score = result.fmean * (1.0 - result.penalty);
  return result;
}

double meteor(const std::string& hypothesis, const std::string& reference,
              const std::string& lang) {
  return meteor_detailed(hypothesis, reference, lang).score;
}

}  // namespace radlabel
