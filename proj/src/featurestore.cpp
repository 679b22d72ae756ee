#include "pneumo/featurestore.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "pneumo/error.hpp"
#include "pneumo/random.hpp"

namespace pneumo {

namespace fs = std::filesystem;
using nlohmann::json;

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), values_(rows * cols, 0.0f) {}

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<float> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  require(values_.size() == rows * cols, "matrix value count does not match its shape");
}

FeatureMatrix FeatureMatrix::take_rows(std::span<const Index> rows) const {
  FeatureMatrix out(rows.size(), cols_);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i] < rows_, "row index out of range");
    std::copy_n(values_.data() + rows[i] * cols_, cols_, out.values_.data() + i * cols_);
  }
  out.origin = origin;
  return out;
}

bool FeatureMatrix::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](float v) { return std::isfinite(v); });
}

std::vector<ClassId> LabelVector::classes() const {
  std::vector<ClassId> ids(labels.begin(), labels.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

LabelVector LabelVector::take(std::span<const Index> rows) const {
  LabelVector out;
  out.class_names = class_names;
  out.labels.reserve(rows.size());
  for (Index r : rows) {
    require(r < labels.size(), "label index out of range");
    out.labels.push_back(labels[r]);
  }
  return out;
}

void LabelVector::validate() const {
  for (ClassId id : labels) {
    require(id >= 0, "negative class id " + std::to_string(id));
    require(static_cast<std::size_t>(id) < class_names.size(),
            "class id " + std::to_string(id) + " has no class name");
  }
}

namespace {

std::map<ClassId, IndexList> members_by_class(std::span<const Index> indices,
                                              const LabelVector& labels) {
  std::map<ClassId, IndexList> groups;
  for (Index i : indices) {
    require(i < labels.size(), "index " + std::to_string(i) + " out of range");
    groups[labels[i]].push_back(i);
  }
  for (auto& [id, members] : groups) std::sort(members.begin(), members.end());
  return groups;
}

}  // namespace

IndexList balance_downsample(const LabelVector& labels, std::uint64_t seed) {
  IndexList all(labels.size());
  std::iota(all.begin(), all.end(), Index{0});
  auto groups = members_by_class(all, labels);
  require(groups.size() >= 2, "balancing needs at least two classes");

  std::size_t smallest = SIZE_MAX;
  for (const auto& [id, members] : groups) smallest = std::min(smallest, members.size());

  Rng rng(seed);
  IndexList out;
  out.reserve(smallest * groups.size());
  for (auto& [id, members] : groups) {
    rng.shuffle(std::span<Index>(members));
    out.insert(out.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(smallest));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> apportion(std::size_t total, std::span<const double> weights) {
  require(!weights.empty(), "apportion needs at least one weight");
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  require(sum > 0.0, "apportion weights must have a positive sum");

  std::vector<std::size_t> counts(weights.size());
  std::vector<double> remainder(weights.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double quota = static_cast<double>(total) * weights[i] / sum;
    counts[i] = static_cast<std::size_t>(std::floor(quota));
    remainder[i] = quota - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++counts[order[k % order.size()]];
  return counts;
}

SplitPlan split_holdout(std::span<const Index> indices, const LabelVector& labels,
                        std::uint64_t seed, const SplitFractions& fractions) {
  auto groups = members_by_class(indices, labels);
  require(!groups.empty(), "cannot split an empty index set");

  SplitPlan plan;
  plan.seed = seed;
  plan.fractions = fractions;

  const double outer[] = {fractions.test2, 1.0 - fractions.test2};
  const double inner[] = {fractions.train, fractions.val, fractions.test1};

  Rng rng(seed);
  for (auto& [id, members] : groups) {
    require(members.size() >= 10, "class " + std::to_string(id) + " has " +
                                       std::to_string(members.size()) +
                                       " members; hold-out splitting needs at least 10");
    rng.shuffle(std::span<Index>(members));
    const auto top = apportion(members.size(), outer);
    const auto rest = apportion(top[1], inner);

    auto it = members.begin();
    auto take = [&it](IndexList& dst, std::size_t n) {
      dst.insert(dst.end(), it, it + static_cast<std::ptrdiff_t>(n));
      it += static_cast<std::ptrdiff_t>(n);
    };
    take(plan.test2, top[0]);
    take(plan.train, rest[0]);
    take(plan.val, rest[1]);
    take(plan.test1, rest[2]);
  }
  for (IndexList* list : {&plan.train, &plan.val, &plan.test1, &plan.test2})
    std::sort(list->begin(), list->end());
  return plan;
}

StandardizationParams fit_standardizer(const FeatureMatrix& matrix,
                                       std::span<const Index> train_rows) {
  require(!train_rows.empty(), "standardizer needs at least one training row");
  const std::size_t d = matrix.cols();
  StandardizationParams p;
  p.mean.assign(d, 0.0);
  p.stddev.assign(d, 0.0);
  for (Index r : train_rows) {
    require(r < matrix.rows(), "training row index out of range");
    auto row = matrix.row(r);
    for (std::size_t c = 0; c < d; ++c) p.mean[c] += row[c];
  }
  const double n = static_cast<double>(train_rows.size());
  for (double& m : p.mean) m /= n;
  for (Index r : train_rows) {
    auto row = matrix.row(r);
    for (std::size_t c = 0; c < d; ++c) {
      const double dev = row[c] - p.mean[c];
      p.stddev[c] += dev * dev;
    }
  }
  for (double& s : p.stddev) s = std::sqrt(s / n);
  return p;
}

StandardizationParams fit_standardizer(const FeatureMatrix& matrix) {
  IndexList all(matrix.rows());
  std::iota(all.begin(), all.end(), Index{0});
  return fit_standardizer(matrix, all);
}

FeatureMatrix apply_standardizer(const StandardizationParams& params, const FeatureMatrix& matrix) {
  require(params.mean.size() == matrix.cols() && params.stddev.size() == matrix.cols(),
          "standardizer dimension does not match matrix");
  FeatureMatrix out(matrix.rows(), matrix.cols());
  out.origin = matrix.origin;
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    auto src = matrix.row(r);
    auto dst = out.row(r);
    for (std::size_t c = 0; c < matrix.cols(); ++c) {
      // zero-variance features map to 0
      dst[c] = params.stddev[c] > 0.0
                   ? static_cast<float>((src[c] - params.mean[c]) / params.stddev[c])
                   : 0.0f;
    }
  }
  return out;
}

// --- FMX -------------------------------------------------------------------

namespace {

constexpr std::size_t kFmxHeaderSize = 20;
constexpr char kFmxMagic[4] = {'F', 'M', 'X', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 |
         std::uint32_t{p[3]} << 24;
}

}  // namespace

std::vector<std::uint8_t> encode_fmx(const FeatureMatrix& matrix) {
  require(matrix.rows() <= UINT32_MAX && matrix.cols() <= UINT32_MAX,
          "matrix too large for the FMX format");
  require(matrix.all_finite(), "refusing to write a matrix with non-finite values");
  std::vector<std::uint8_t> out;
  out.reserve(kFmxHeaderSize + 4 * matrix.values().size());
  out.insert(out.end(), kFmxMagic, kFmxMagic + 4);
  put_u32(out, static_cast<std::uint32_t>(matrix.rows()));
  put_u32(out, static_cast<std::uint32_t>(matrix.cols()));
  out.push_back(0);                      // dtype: f32 LE
  out.insert(out.end(), 7, std::uint8_t{0});  // reserved
  for (float v : matrix.values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

FeatureMatrix decode_fmx(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kFmxMagic, 4) != 0)
    throw Error(ErrorCode::kFormatBadMagic, "not an FMX1 file (bad magic)");
  if (bytes.size() < kFmxHeaderSize)
    throw Error(ErrorCode::kFormatTruncated, "FMX header truncated");
  if (bytes[12] != 0)
    throw Error(ErrorCode::kFormatBadDtype,
                "unsupported FMX dtype code " + std::to_string(bytes[12]));
  for (std::size_t i = 13; i < kFmxHeaderSize; ++i)
    if (bytes[i] != 0) throw Error(ErrorCode::kFormatBadHeader, "FMX reserved bytes not zero");

  const std::uint64_t rows = get_u32(bytes.data() + 4);
  const std::uint64_t cols = get_u32(bytes.data() + 8);
  const std::uint64_t payload = rows * cols * 4;
  const std::uint64_t available = bytes.size() - kFmxHeaderSize;
  if (available < payload)
    throw Error(ErrorCode::kFormatTruncated, "FMX payload truncated: expected " +
                                                 std::to_string(payload) + " bytes, found " +
                                                 std::to_string(available));
  if (available > payload)
    throw Error(ErrorCode::kFormatBadHeader, "FMX file has trailing bytes after the payload");

  std::vector<float> values(rows * cols);
  const std::uint8_t* p = bytes.data() + kFmxHeaderSize;
  for (std::size_t i = 0; i < values.size(); ++i, p += 4) {
    values[i] = std::bit_cast<float>(get_u32(p));
    if (!std::isfinite(values[i]))
      throw Error(ErrorCode::kFormatNonFinite,
                  "non-finite value at row " + std::to_string(i / cols) + ", column " +
                      std::to_string(i % cols));
  }
  return FeatureMatrix(rows, cols, std::move(values));
}

namespace {

std::vector<std::uint8_t> read_binary_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

void write_fmx(const FeatureMatrix& matrix, const fs::path& path) {
  write_file_atomic(path, encode_fmx(matrix));
}

FeatureMatrix read_fmx(const fs::path& path) {
  const auto bytes = read_binary_file(path);
  try {
    return decode_fmx(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kIo, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot rename into " + path.string() + ": " + ec.message());
}

void write_file_atomic(const fs::path& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text_file(const fs::path& path) {
  const auto bytes = read_binary_file(path);
  return std::string(bytes.begin(), bytes.end());
}

// --- text formats ------------------------------------------------------------

namespace {

template <typename Fn>
void for_each_line(const std::string& text, Fn&& fn) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    fn(line, lineno);
  }
}

long long parse_integer(const std::string& line, std::size_t lineno, const fs::path& path) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(line, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || line.find_first_not_of(" \t", used) != std::string::npos)
    throw_invalid(path.string() + ":" + std::to_string(lineno) + ": expected an integer, got '" +
                  line + "'");
  return v;
}

}  // namespace

LabelVector read_labels(const fs::path& path) {
  LabelVector out;
  for_each_line(read_text_file(path), [&](const std::string& line, std::size_t lineno) {
    const long long v = parse_integer(line, lineno, path);
    require(v >= 0 && v <= INT32_MAX,
            path.string() + ":" + std::to_string(lineno) + ": class id out of range");
    out.labels.push_back(static_cast<ClassId>(v));
  });
  for (ClassId id : out.labels)
    while (out.class_names.size() <= static_cast<std::size_t>(id))
      out.class_names.push_back("class_" + std::to_string(out.class_names.size()));
  return out;
}

void write_labels(const LabelVector& labels, const fs::path& path) {
  std::string text;
  for (ClassId id : labels.labels) text += std::to_string(id) + "\n";
  write_file_atomic(path, text);
}

IndexList read_indices(const fs::path& path) {
  IndexList out;
  for_each_line(read_text_file(path), [&](const std::string& line, std::size_t lineno) {
    const long long v = parse_integer(line, lineno, path);
    require(v >= 0, path.string() + ":" + std::to_string(lineno) + ": negative index");
    out.push_back(static_cast<Index>(v));
  });
  return out;
}

void write_indices(std::span<const Index> indices, const fs::path& path) {
  std::string text;
  for (Index i : indices) text += std::to_string(i) + "\n";
  write_file_atomic(path, text);
}

Manifest read_manifest(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
    Manifest m;
    m.dataset_name = j.value("dataset_name", "");
    m.class_names = j.value("class_names", std::vector<std::string>{});
    m.backbone = j.value("backbone", "");
    m.layer = j.value("layer", "");
    m.image_ids = j.value("image_ids", std::vector<std::string>{});
    return m;
  } catch (const json::exception& e) {
    throw_invalid(path.string() + ": malformed manifest: " + e.what());
  }
}

void write_manifest(const Manifest& m, const fs::path& path) {
  json j = {{"dataset_name", m.dataset_name}, {"class_names", m.class_names},
            {"backbone", m.backbone},         {"layer", m.layer},
            {"image_ids", m.image_ids}};
  write_file_atomic(path, j.dump(2) + "\n");
}

std::string split_plan_to_json(const SplitPlan& plan) {
  json j = {{"seed", plan.seed},
            {"fractions",
             {{"test2", plan.fractions.test2},
              {"train", plan.fractions.train},
              {"val", plan.fractions.val},
              {"test1", plan.fractions.test1}}},
            {"train", plan.train},
            {"val", plan.val},
            {"test1", plan.test1},
            {"test2", plan.test2}};
  return j.dump(2) + "\n";
}

SplitPlan split_plan_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    SplitPlan plan;
    plan.seed = j.at("seed").get<std::uint64_t>();
    const json& f = j.at("fractions");
    plan.fractions = {f.at("test2").get<double>(), f.at("train").get<double>(),
                      f.at("val").get<double>(), f.at("test1").get<double>()};
    plan.train = j.at("train").get<IndexList>();
    plan.val = j.at("val").get<IndexList>();
    plan.test1 = j.at("test1").get<IndexList>();
    plan.test2 = j.at("test2").get<IndexList>();
    return plan;
  } catch (const json::exception& e) {
    throw_invalid(std::string("malformed split plan: ") + e.what());
  }
}

}  // namespace pneumo
