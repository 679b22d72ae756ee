#include "pneumo/selection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include "pneumo/error.hpp"
#include "pneumo/random.hpp"

namespace pneumo {

const char* score_method_name(ScoreMethod method) noexcept {
  switch (method) {
    case ScoreMethod::kRelieff: return "relieff";
    case ScoreMethod::kChiSquare: return "chi2";
    case ScoreMethod::kUnknown: break;
  }
  return "unknown";
}

ScoreMethod parse_score_method(const std::string& name) {
  if (name == "relieff") return ScoreMethod::kRelieff;
  if (name == "chi2") return ScoreMethod::kChiSquare;
  throw_invalid("unknown scoring method '" + name + "' (expected relieff or chi2)");
}

// --- ReliefF -----------------------------------------------------------------

namespace {

struct Neighbor {
  double distance;
  Index row;
  bool operator<(const Neighbor& o) const {
    return distance < o.distance || (distance == o.distance && row < o.row);
  }
};

// The k smallest (distance, row) pairs among `candidates`, ascending.
void nearest(std::span<const Index> candidates, std::span<const double> distance, Index self,
             std::size_t k, std::vector<Neighbor>& out) {
  out.clear();
  for (Index j : candidates) {
    if (j == self) continue;
    out.push_back({distance[j], j});
  }
  const std::size_t keep = std::min(k, out.size());
  std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(keep), out.end());
  out.resize(keep);
}

}  // namespace

ScoreVector relieff_scores(const FeatureMatrix& matrix, const LabelVector& labels,
                           const ReliefOptions& options) {
  const std::size_t n = matrix.rows();
  const std::size_t d = matrix.cols();
  require(labels.size() == n, "label count does not match matrix rows");
  require(options.k_neighbors >= 1, "k_neighbors must be at least 1");

  std::map<ClassId, IndexList> by_class;
  for (Index i = 0; i < n; ++i) by_class[labels[i]].push_back(i);
  require(by_class.size() >= 2, "ReliefF needs at least two classes");
  std::size_t smallest = SIZE_MAX;
  for (const auto& [id, rows] : by_class) smallest = std::min(smallest, rows.size());
  require(options.k_neighbors <= smallest - 1,
          "k_neighbors=" + std::to_string(options.k_neighbors) +
              " exceeds smallest class size minus one (" + std::to_string(smallest - 1) + ")");

  std::size_t rounds = options.sample_rounds == 0 ? n : options.sample_rounds;
  require(rounds <= n, "sample_rounds cannot exceed the number of rows");

  // Raw values plus per-column range; a feature difference is |a - b| / range
  // so equal raw gaps stay exactly equal. Zero-range columns contribute 0.
  std::vector<double> z(n * d), range(d);
  for (std::size_t f = 0; f < d; ++f) {
    double lo = matrix(0, f), hi = matrix(0, f);
    for (std::size_t i = 0; i < n; ++i) {
      z[i * d + f] = matrix(i, f);
      lo = std::min<double>(lo, matrix(i, f));
      hi = std::max<double>(hi, matrix(i, f));
    }
    range[f] = hi - lo;
  }
  auto diff = [&](const double* a, const double* b, std::size_t f) {
    return range[f] > 0.0 ? std::abs(a[f] - b[f]) / range[f] : 0.0;
  };

  std::vector<Index> sampled(n);
  std::iota(sampled.begin(), sampled.end(), Index{0});
  if (rounds < n) {
    Rng rng(options.seed);
    rng.shuffle(std::span<Index>(sampled));
    sampled.resize(rounds);
    std::sort(sampled.begin(), sampled.end());
  }

  std::map<ClassId, double> prior;
  for (const auto& [id, rows] : by_class)
    prior[id] = static_cast<double>(rows.size()) / static_cast<double>(n);

  const double scale = 1.0 / (static_cast<double>(rounds) * static_cast<double>(options.k_neighbors));
  std::vector<double> weight(d, 0.0);
  std::vector<double> distance(n);
  std::vector<Neighbor> neigh;

  auto accumulate = [&](Index r, const std::vector<Neighbor>& ns, double factor) {
    const double* zr = &z[r * d];
    for (const Neighbor& nb : ns) {
      const double* zn = &z[nb.row * d];
      for (std::size_t f = 0; f < d; ++f) weight[f] += factor * diff(zr, zn, f);
    }
  };

  for (Index r : sampled) {
    const double* zr = &z[r * d];
    for (Index j = 0; j < n; ++j) {
      const double* zj = &z[j * d];
      double s = 0.0;
      for (std::size_t f = 0; f < d; ++f) s += diff(zr, zj, f);
      distance[j] = s;
    }
    const ClassId own = labels[r];
    nearest(by_class[own], distance, r, options.k_neighbors, neigh);
    accumulate(r, neigh, -scale);
    for (const auto& [id, rows] : by_class) {
      if (id == own) continue;
      nearest(rows, distance, r, options.k_neighbors, neigh);
      accumulate(r, neigh, scale * prior[id] / (1.0 - prior[own]));
    }
  }

  ScoreVector out;
  out.scores = std::move(weight);
  out.method = ScoreMethod::kRelieff;
  out.params = {{"k_neighbors", static_cast<double>(options.k_neighbors)},
                {"sample_rounds", static_cast<double>(rounds)},
                {"seed", static_cast<double>(options.seed)}};
  return out;
}

// --- chi-square ---------------------------------------------------------------

std::vector<std::size_t> equal_frequency_bins(std::span<const float> column, std::size_t n_bins) {
  require(n_bins >= 2, "chi-square needs at least 2 bins");
  const std::size_t n = column.size();
  std::vector<std::size_t> bins(n, 0);
  if (n == 0) return bins;

  std::vector<float> sorted(column.begin(), column.end());
  std::sort(sorted.begin(), sorted.end());
  // Cut b sits at the value of rank ceil(b*n/B); a value belongs to the bin
  // counting how many cuts are <= it.
  std::vector<float> cuts;
  for (std::size_t b = 1; b < n_bins; ++b) {
    const std::size_t rank = std::min(n - 1, (b * n + n_bins - 1) / n_bins);
    if (sorted[rank] > sorted.front()) cuts.push_back(sorted[rank]);
  }
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::vector<std::size_t> raw(n);
  std::vector<bool> used(cuts.size() + 1, false);
  for (std::size_t i = 0; i < n; ++i) {
    raw[i] = static_cast<std::size_t>(std::upper_bound(cuts.begin(), cuts.end(), column[i]) -
                                      cuts.begin());
    used[raw[i]] = true;
  }
  std::vector<std::size_t> compact(used.size());
  std::size_t next = 0;
  for (std::size_t b = 0; b < used.size(); ++b)
    if (used[b]) compact[b] = next++;
  for (std::size_t i = 0; i < n; ++i) bins[i] = compact[raw[i]];
  return bins;
}

double chi_square_statistic(const std::vector<std::vector<double>>& observed) {
  if (observed.empty()) return 0.0;
  const std::size_t cols = observed.front().size();
  std::vector<double> row_total(observed.size(), 0.0), col_total(cols, 0.0);
  double total = 0.0;
  for (std::size_t r = 0; r < observed.size(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      row_total[r] += observed[r][c];
      col_total[c] += observed[r][c];
    }
    total += row_total[r];
  }
  if (total <= 0.0) return 0.0;
  double chi2 = 0.0;
  for (std::size_t r = 0; r < observed.size(); ++r) {
    if (row_total[r] <= 0.0) continue;
    for (std::size_t c = 0; c < cols; ++c) {
      if (col_total[c] <= 0.0) continue;
      const double expected = row_total[r] * col_total[c] / total;
      const double dev = observed[r][c] - expected;
      chi2 += dev * dev / expected;
    }
  }
  return chi2;
}

ScoreVector chi_square_scores(const FeatureMatrix& matrix, const LabelVector& labels,
                              std::size_t n_bins) {
  const std::size_t n = matrix.rows();
  require(labels.size() == n, "label count does not match matrix rows");
  require(n_bins >= 2, "chi-square needs at least 2 bins");

  const auto classes = labels.classes();
  std::vector<std::size_t> class_col(n);
  for (std::size_t i = 0; i < n; ++i)
    class_col[i] = static_cast<std::size_t>(
        std::lower_bound(classes.begin(), classes.end(), labels[i]) - classes.begin());

  ScoreVector out;
  out.method = ScoreMethod::kChiSquare;
  out.params = {{"n_bins", static_cast<double>(n_bins)}};
  out.scores.resize(matrix.cols());

  std::vector<float> column(n);
  for (std::size_t f = 0; f < matrix.cols(); ++f) {
    for (std::size_t i = 0; i < n; ++i) column[i] = matrix(i, f);
    const auto bins = equal_frequency_bins(column, n_bins);
    const std::size_t n_used = bins.empty() ? 0 : *std::max_element(bins.begin(), bins.end()) + 1;
    std::vector<std::vector<double>> table(n_used, std::vector<double>(classes.size(), 0.0));
    for (std::size_t i = 0; i < n; ++i) table[bins[i]][class_col[i]] += 1.0;
    out.scores[f] = chi_square_statistic(table);
  }
  return out;
}

// --- ranking and cutoff ---------------------------------------------------------

Ranking rank_features(const ScoreVector& scores) {
  Ranking r;
  r.order.resize(scores.size());
  std::iota(r.order.begin(), r.order.end(), Index{0});
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&](Index a, Index b) { return scores.scores[a] > scores.scores[b]; });
  return r;
}

std::vector<double> ranked_scores(const ScoreVector& scores, const Ranking& ranking) {
  std::vector<double> out;
  out.reserve(ranking.order.size());
  for (Index i : ranking.order) out.push_back(scores.scores[i]);
  return out;
}

std::vector<double> chord_distances(std::span<const double> s) {
  const std::size_t d = s.size();
  std::vector<double> dist(d, 0.0);
  if (d < 3) return dist;
  const auto [lo_it, hi_it] = std::minmax_element(s.begin(), s.end());
  const double lo = *lo_it, range = *hi_it - *lo_it;
  if (!(range > 0.0)) return dist;

  auto y = [&](std::size_t i) { return (s[i] - lo) / range; };
  const double y0 = y(0), y1 = y(d - 1);
  const double dy = y1 - y0;
  const double norm = std::sqrt(dy * dy + 1.0);
  for (std::size_t i = 0; i < d; ++i) {
    const double x = static_cast<double>(i) / static_cast<double>(d - 1);
    dist[i] = std::abs(dy * x - (y(i) - y0)) / norm;
  }
  return dist;
}

std::size_t elbow_cutoff(std::span<const double> sorted_scores) {
  require(sorted_scores.size() >= 3, "elbow cutoff needs at least 3 scores");
  for (std::size_t i = 1; i < sorted_scores.size(); ++i)
    require(sorted_scores[i] <= sorted_scores[i - 1],
            "elbow cutoff needs non-increasing scores (increase at position " +
                std::to_string(i) + ")");
  const auto dist = chord_distances(sorted_scores);
  const double best = *std::max_element(dist.begin(), dist.end());
  for (std::size_t i = 0; i < dist.size(); ++i)
    if (dist[i] >= best - kElbowTieTolerance) return i + 1;
  return 1;
}

SelectionResult select_top(const Ranking& ranking, std::size_t k) {
  require(k >= 1 && k <= ranking.order.size(), "selection size out of range");
  SelectionResult out;
  out.cutoff_k = k;
  out.selected.assign(ranking.order.begin(), ranking.order.begin() + static_cast<std::ptrdiff_t>(k));
  return out;
}

SelectionResult select_elbow(const ScoreVector& scores) {
  const Ranking ranking = rank_features(scores);
  if (scores.size() < 3) return select_top(ranking, scores.size());
  return select_top(ranking, elbow_cutoff(ranked_scores(scores, ranking)));
}

FeatureMatrix select_subset(const FeatureMatrix& matrix, std::span<const Index> columns) {
  for (Index c : columns)
    require(c < matrix.cols(), "selected column " + std::to_string(c) + " out of range");
  FeatureMatrix out(matrix.rows(), columns.size());
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    auto src = matrix.row(r);
    auto dst = out.row(r);
    for (std::size_t j = 0; j < columns.size(); ++j) dst[j] = src[columns[j]];
  }
  return out;
}

// --- CSV -----------------------------------------------------------------------

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string scores_to_csv(const ScoreVector& scores) {
  const Ranking ranking = rank_features(scores);
  std::vector<std::size_t> rank(scores.size());
  for (std::size_t pos = 0; pos < ranking.order.size(); ++pos) rank[ranking.order[pos]] = pos + 1;
  std::string out = "feature_index,score,rank\n";
  for (std::size_t i = 0; i < scores.size(); ++i)
    out += std::to_string(i) + "," + format_double(scores.scores[i]) + "," +
           std::to_string(rank[i]) + "\n";
  return out;
}

ScoreVector scores_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw_invalid("empty scores file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == "feature_index,score,rank", "scores file has unexpected header '" + line + "'");

  std::vector<std::pair<std::size_t, double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    unsigned long long index = 0, rank = 0;
    double score = 0.0;
    char tail = 0;
    if (std::sscanf(line.c_str(), "%llu,%lf,%llu%c", &index, &score, &rank, &tail) != 3)
      throw_invalid("scores file line " + std::to_string(lineno) + " is malformed");
    rows.emplace_back(static_cast<std::size_t>(index), score);
  }
  ScoreVector out;
  out.scores.assign(rows.size(), 0.0);
  std::vector<bool> seen(rows.size(), false);
  for (const auto& [index, score] : rows) {
    require(index < rows.size() && !seen[index],
            "scores file feature indices must be a permutation of 0..d-1");
    seen[index] = true;
    out.scores[index] = score;
  }
  return out;
}

void write_scores_csv(const ScoreVector& scores, const std::filesystem::path& path) {
  write_file_atomic(path, scores_to_csv(scores));
}

ScoreVector read_scores_csv(const std::filesystem::path& path) {
  return scores_from_csv(read_text_file(path));
}

std::string score_curve_csv(const ScoreVector& scores) {
  const Ranking ranking = rank_features(scores);
  const auto sorted = ranked_scores(scores, ranking);
  const auto dist = chord_distances(sorted);
  double lo = 0.0, range = 0.0;
  if (!sorted.empty()) {
    lo = sorted.back();
    range = sorted.front() - sorted.back();
  }
  const double last = sorted.size() > 1 ? static_cast<double>(sorted.size() - 1) : 1.0;
  std::string out = "rank,feature_index,score,normalized_rank,normalized_score,chord_distance\n";
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double ny = range > 0.0 ? (sorted[i] - lo) / range : 0.0;
    out += std::to_string(i + 1) + "," + std::to_string(ranking.order[i]) + "," +
           format_double(sorted[i]) + "," + format_double(static_cast<double>(i) / last) + "," +
           format_double(ny) + "," + format_double(dist[i]) + "\n";
  }
  return out;
}

}  // namespace pneumo
