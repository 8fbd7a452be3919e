#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <unistd.h>

#include "radlabel/taxonomy.hpp"

namespace radlabel::testing {

// Self-cleaning unique directory under the system temp root.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("radlabel_test_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path file(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline TaxonomySpec make_taxonomy(std::vector<std::string> findings,
                                  std::set<MentionClass> classes = {MentionClass::Positive},
                                  std::string id = "fixture") {
  return TaxonomySpec(std::move(id), std::move(findings), std::move(classes));
}

inline AnnotatedReport make_report(std::string id, LabelMap labels, std::string text = {},
                                   std::string language = "en") {
  AnnotatedReport item;
  item.report.id = id;
  item.report.language = std::move(language);
  item.report.text = text.empty() ? "report text for " + id : std::move(text);
  item.report.source = "fixture";
  item.labels = std::move(labels);
  return item;
}

// The instruction block for the five-finding positive-only chest X-ray
// taxonomy, frozen for byte-exact comparison.
inline const char* casia_prompt() {
  return "You are a helpful radiology assistant. Given a radiology report, classify each "
         "abnormality into a class. Output a valid JSON with each abnormality as key, and the "
         "class as value. The keys must be ['cardiomegaly', 'mass', 'pleural effusion', "
         "'pneumonia', 'pneumothorax']. The values can be one of [-1, 1]. The values have the "
         "following interpretation: (1) the abnormality was mentioned, even with uncertainty, in "
         "the report e.g. 'A large pleural effusion', 'The cardiac contours are stable.', 'The "
         "cardiac size cannot be evaluated.';  (-1) the abnormality was not mentioned in the "
         "report, or the abnormality was negatively mentioned in the report; e.g. 'No "
         "pneumothorax.'.";
}

inline TaxonomySpec casia_taxonomy() {
  return make_taxonomy({"cardiomegaly", "mass", "pleural effusion", "pneumonia", "pneumothorax"},
                       {MentionClass::Positive}, "casia");
}

}  // namespace radlabel::testing
