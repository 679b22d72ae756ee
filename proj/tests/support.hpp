#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pneumo/featurestore.hpp"

namespace testing {

struct Synthetic {
  pneumo::FeatureMatrix features;
  pneumo::LabelVector labels;
};

// Unit-variance Gaussian noise everywhere. For rows of the k-th entry of
// `classes`, each column in `informative` gets mean k * shift.
Synthetic planted(std::size_t per_class, std::size_t d, const std::vector<std::size_t>& informative,
                  double shift, std::uint64_t seed,
                  const std::vector<pneumo::ClassId>& classes = {pneumo::kNormal, pneumo::kBacterial});

// Three classes: column 0 separates normal from pneumonia, column 1 separates
// bacterial from viral. Remaining columns are noise.
Synthetic three_class_blobs(std::size_t per_class, std::size_t d, double shift, std::uint64_t seed);

// Uniform random n x d matrix in [0, 1).
pneumo::FeatureMatrix uniform_matrix(std::size_t n, std::size_t d, std::uint64_t seed);

class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::string slurp(const std::filesystem::path& path);
void spit(const std::filesystem::path& path, const std::string& text);

}  // namespace testing
