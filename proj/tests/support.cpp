#include "support.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "pneumo/random.hpp"

namespace testing {

Synthetic planted(std::size_t per_class, std::size_t d, const std::vector<std::size_t>& informative,
                  double shift, std::uint64_t seed, const std::vector<pneumo::ClassId>& classes) {
  pneumo::Rng rng(seed);
  const std::size_t n = per_class * classes.size();
  Synthetic s{pneumo::FeatureMatrix(n, d), {}};
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = i % classes.size();
    s.labels.labels.push_back(classes[k]);
    for (std::size_t f = 0; f < d; ++f) s.features(i, f) = static_cast<float>(rng.normal());
    for (std::size_t f : informative) s.features(i, f) += static_cast<float>(shift * static_cast<double>(k));
  }
  return s;
}

Synthetic three_class_blobs(std::size_t per_class, std::size_t d, double shift, std::uint64_t seed) {
  pneumo::Rng rng(seed);
  Synthetic s{pneumo::FeatureMatrix(3 * per_class, d), {}};
  for (std::size_t i = 0; i < 3 * per_class; ++i) {
    const auto cls = static_cast<pneumo::ClassId>(i % 3);
    s.labels.labels.push_back(cls);
    for (std::size_t f = 0; f < d; ++f) s.features(i, f) = static_cast<float>(rng.normal());
    if (cls != pneumo::kNormal) s.features(i, 0) += static_cast<float>(shift);
    if (cls == pneumo::kViral) s.features(i, 1) += static_cast<float>(shift);
  }
  return s;
}

pneumo::FeatureMatrix uniform_matrix(std::size_t n, std::size_t d, std::uint64_t seed) {
  pneumo::Rng rng(seed);
  pneumo::FeatureMatrix m(n, d);
  for (float& v : m.values()) v = static_cast<float>(rng.uniform());
  return m;
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("pneumo-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace testing
