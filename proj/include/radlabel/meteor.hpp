#pragma once

#include <string>
#include <vector>

namespace radlabel {

// Lowercase + punctuation-detached whitespace tokens. Bytes outside ASCII are
// kept inside words, so accented and Danish characters survive.
std::vector<std::string> meteor_tokenize(const std::string& text);

// Light suffix-stripping stemmer for en/es/fr/da; unknown tags fall back to a
// shared suffix list. Strips at most one suffix and keeps stems >= 3 chars.
std::string light_stem(const std::string& token, const std::string& lang);

struct MeteorScore {
  double score = 0.0;
  int matches = 0;
  int chunks = 0;
  double precision = 0.0;
  double recall = 0.0;
  double fmean = 0.0;
  double penalty = 0.0;
};

// Unigram METEOR: exact-match stage then stemmed stage, Fmean = 10PR/(R+9P),
// fragmentation penalty 0.5*(chunks/matches)^3. Zero when nothing matches.
MeteorScore meteor_detailed(const std::string& hypothesis, const std::string& reference,
                            const std::string& lang = "en");
double meteor(const std::string& hypothesis, const std::string& reference,
              const std::string& lang = "en");

}  // namespace radlabel
