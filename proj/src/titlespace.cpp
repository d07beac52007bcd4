#include "notesplit/titlespace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "notesplit/csv.hpp"
#include "notesplit/error.hpp"
#include "notesplit/random.hpp"

namespace notesplit {

std::optional<std::size_t> TitleSpace::find(const std::string& title) const {
  auto it = std::find(titles.begin(), titles.end(), title);
  if (it == titles.end()) return std::nullopt;
  return static_cast<std::size_t>(it - titles.begin());
}

void TitleSpace::validate() const {
  if (static_cast<std::size_t>(vectors.rows()) != titles.size() || counts.size() != titles.size())
    throw InvalidArgument("title space: titles, vectors and counts differ in length");
}

double cosine_similarity(const Vector& a, const Vector& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

namespace {

Matrix unit_rows(const Matrix& m) {
  Matrix out = m;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double norm = out.row(i).norm();
    if (norm > 0.0) out.row(i) /= norm;
  }
  return out;
}

// Renumbers cluster ids by first appearance; negative ids are kept.
void canonicalize(std::vector<int>& assignment) {
  std::vector<int> remap;
  for (auto& a : assignment) {
    if (a < 0) continue;
    if (static_cast<std::size_t>(a) >= remap.size()) remap.resize(static_cast<std::size_t>(a) + 1, -1);
    auto& r = remap[static_cast<std::size_t>(a)];
    if (r < 0) r = static_cast<int>(std::count_if(remap.begin(), remap.end(), [](int x) { return x >= 0; }));
    a = r;
  }
}

double squared_distance(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

struct LloydRun {
  std::vector<int> assignment;
  std::vector<double> history;
  double inertia = 0.0;
  std::size_t iterations = 0;
};

LloydRun lloyd(const Matrix& points, std::size_t k, std::size_t max_iter, Rng& rng) {
  const auto n = static_cast<std::size_t>(points.rows());
  const auto d = points.cols();
  Matrix centers(static_cast<Eigen::Index>(k), d);
  std::vector<bool> chosen(n, false);

  // k-means++ seeding.
  std::size_t first = rng.below(n);
  chosen[first] = true;
  centers.row(0) = points.row(static_cast<Eigen::Index>(first));
  std::vector<double> nearest(n);
  for (std::size_t i = 0; i < n; ++i) nearest[i] = squared_distance(points, static_cast<Eigen::Index>(i), centers, 0);
  for (std::size_t c = 1; c < k; ++c) {
    const double total = std::accumulate(nearest.begin(), nearest.end(), 0.0);
    std::size_t pick = n;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += nearest[i];
        if (nearest[i] > 0.0 && acc > target) {
          pick = i;
          break;
        }
      }
      if (pick == n)
        for (std::size_t i = n; i-- > 0;)
          if (nearest[i] > 0.0) {
            pick = i;
            break;
          }
    }
    if (pick == n)
      for (std::size_t i = 0; i < n; ++i)
        if (!chosen[i]) {
          pick = i;
          break;
        }
    chosen[pick] = true;
    centers.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(pick));
    for (std::size_t i = 0; i < n; ++i)
      nearest[i] = std::min(nearest[i], squared_distance(points, static_cast<Eigen::Index>(i), centers,
                                                         static_cast<Eigen::Index>(c)));
  }

  LloydRun run;
  run.assignment.assign(n, -1);
  bool converged = false;
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      int arg = 0;
      for (std::size_t c = 0; c < k; ++c) {
        const double dist =
            squared_distance(points, static_cast<Eigen::Index>(i), centers, static_cast<Eigen::Index>(c));
        if (dist < best) {
          best = dist;
          arg = static_cast<int>(c);
        }
      }
      changed = changed || run.assignment[i] != arg;
      run.assignment[i] = arg;
      inertia += best;
    }
    run.history.push_back(inertia);
    run.iterations = iter + 1;
    if (!changed) {
      converged = true;
      break;
    }
    Matrix sums = Matrix::Zero(static_cast<Eigen::Index>(k), d);
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(run.assignment[i]) += points.row(static_cast<Eigen::Index>(i));
      ++sizes[static_cast<std::size_t>(run.assignment[i])];
    }
    for (std::size_t c = 0; c < k; ++c)
      if (sizes[c] > 0) centers.row(static_cast<Eigen::Index>(c)) = sums.row(static_cast<Eigen::Index>(c)) / static_cast<double>(sizes[c]);
  }
  if (converged) {
    run.inertia = run.history.back();
  } else {
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      inertia += squared_distance(points, static_cast<Eigen::Index>(i), centers, run.assignment[i]);
    run.inertia = inertia;
  }
  return run;
}

}  // namespace

DistanceMatrix distance_matrix(const TitleSpace& space) {
  space.validate();
  const auto c = static_cast<Eigen::Index>(space.size());
  DistanceMatrix out;
  const Matrix unit = unit_rows(space.vectors);
  std::vector<bool> zero(static_cast<std::size_t>(c), false);
  for (Eigen::Index i = 0; i < c; ++i) {
    if (space.vectors.row(i).norm() == 0.0) {
      zero[static_cast<std::size_t>(i)] = true;
      out.zero_rows.push_back(static_cast<std::size_t>(i));
    }
  }
  if (c == 0 || out.zero_rows.size() == static_cast<std::size_t>(c))
    throw InvalidArgument("distance_matrix: every title vector is zero");
  out.distances.resize(c, c);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (Eigen::Index i = 0; i < c; ++i) {
    for (Eigen::Index j = i; j < c; ++j) {
      double d;
      if (zero[static_cast<std::size_t>(i)] || zero[static_cast<std::size_t>(j)]) d = nan;
      else if (i == j) d = 0.0;
      else d = 1.0 - unit.row(i).dot(unit.row(j));
      out.distances(i, j) = out.distances(j, i) = d;
    }
  }
  return out;
}

std::vector<Neighbor> nearest_titles(const TitleSpace& space, std::size_t id, std::size_t n) {
  space.validate();
  if (id >= space.size()) throw NotFound("unknown title id " + std::to_string(id));
  const Vector query = space.vectors.row(static_cast<Eigen::Index>(id)).transpose();
  std::vector<Neighbor> all;
  for (std::size_t j = 0; j < space.size(); ++j) {
    if (j == id) continue;
    all.push_back({j, space.titles[j], cosine_similarity(query, space.vectors.row(static_cast<Eigen::Index>(j)).transpose())});
  }
  std::stable_sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) { return a.similarity > b.similarity; });
  all.resize(std::min(n, all.size()));
  return all;
}

std::vector<Neighbor> nearest_titles(const TitleSpace& space, const std::string& title, std::size_t n) {
  const auto id = space.find(title);
  if (!id) throw NotFound("unknown title '" + title + "'");
  return nearest_titles(space, *id, n);
}

const char* to_string(ClusterMethod method) {
  switch (method) {
    case ClusterMethod::kmeans: return "kmeans";
    case ClusterMethod::agglomerative: return "agglomerative";
    case ClusterMethod::dbscan: return "dbscan";
  }
  return "?";
}

ClusterMethod parse_cluster_method(const std::string& name) {
  if (name == "kmeans") return ClusterMethod::kmeans;
  if (name == "agglomerative") return ClusterMethod::agglomerative;
  if (name == "dbscan") return ClusterMethod::dbscan;
  throw InvalidArgument("unknown clustering method '" + name + "'");
}

Linkage parse_linkage(const std::string& name) {
  if (name == "average") return Linkage::average;
  if (name == "single") return Linkage::single;
  if (name == "complete") return Linkage::complete;
  throw InvalidArgument("unknown linkage '" + name + "'");
}

Metric parse_metric(const std::string& name) {
  if (name == "cosine") return Metric::cosine;
  if (name == "euclidean") return Metric::euclidean;
  throw InvalidArgument("unknown metric '" + name + "'");
}

std::size_t Clustering::n_clusters() const {
  int top = -1;
  for (int a : assignment) top = std::max(top, a);
  return static_cast<std::size_t>(top + 1);
}

double point_distance(const Matrix& points, std::size_t i, std::size_t j, Metric metric) {
  const auto a = points.row(static_cast<Eigen::Index>(i));
  const auto b = points.row(static_cast<Eigen::Index>(j));
  if (metric == Metric::euclidean) return (a - b).norm();
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 1.0;
  return 1.0 - a.dot(b) / (na * nb);
}

Clustering kmeans(const Matrix& points, const KMeansConfig& config) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (config.k == 0 || config.k > n)
    throw InvalidArgument("kmeans: k=" + std::to_string(config.k) + " must be in [1, " + std::to_string(n) + "]");
  const Matrix data = config.normalize ? unit_rows(points) : points;
  LloydRun best;
  bool have = false;
  for (std::size_t init = 0; init < std::max<std::size_t>(1, config.n_init); ++init) {
    Rng rng(mix_seed(config.seed, init));
    LloydRun run = lloyd(data, config.k, std::max<std::size_t>(1, config.max_iter), rng);
    if (!have || run.inertia < best.inertia) {
      best = std::move(run);
      have = true;
    }
  }
  Clustering out;
  out.method = ClusterMethod::kmeans;
  out.metric = Metric::euclidean;
  out.k = config.k;
  out.assignment = std::move(best.assignment);
  canonicalize(out.assignment);
  out.inertia = best.inertia;
  out.inertia_history = std::move(best.history);
  out.iterations = best.iterations;
  return out;
}

Clustering agglomerative(const Matrix& points, std::size_t k, Linkage linkage, Metric metric) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (k == 0 || k > n)
    throw InvalidArgument("agglomerative: k=" + std::to_string(k) + " must be in [1, " + std::to_string(n) + "]");

  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) dist[i][j] = dist[j][i] = point_distance(points, i, j, metric);

  std::vector<bool> active(n, true);
  std::vector<std::size_t> size(n, 1);
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  // best[i]: active j > i minimizing dist[i][j], ties by smallest j.
  std::vector<std::size_t> best(n, kNone);
  auto refresh = [&](std::size_t i) {
    best[i] = kNone;
    for (std::size_t j = i + 1; j < n; ++j)
      if (active[j] && (best[i] == kNone || dist[i][j] < dist[i][best[i]])) best[i] = j;
  };
  for (std::size_t i = 0; i < n; ++i) refresh(i);

  for (std::size_t clusters = n; clusters > k; --clusters) {
    std::size_t a = kNone;
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i] || best[i] == kNone) continue;
      if (a == kNone || dist[i][best[i]] < dist[a][best[a]]) a = i;
    }
    const std::size_t b = best[a];
    for (std::size_t x = 0; x < n; ++x) {
      if (!active[x] || x == a || x == b) continue;
      double merged;
      switch (linkage) {
        case Linkage::single: merged = std::min(dist[a][x], dist[b][x]); break;
        case Linkage::complete: merged = std::max(dist[a][x], dist[b][x]); break;
        default:
          merged = (static_cast<double>(size[a]) * dist[a][x] + static_cast<double>(size[b]) * dist[b][x]) /
                   static_cast<double>(size[a] + size[b]);
      }
      dist[a][x] = dist[x][a] = merged;
    }
    active[b] = false;
    size[a] += size[b];
    parent[b] = a;
    refresh(a);
    for (std::size_t x = 0; x < a; ++x) {
      if (!active[x]) continue;
      if (best[x] == a || best[x] == b) refresh(x);
      else if (best[x] == kNone || dist[x][a] < dist[x][best[x]] || (dist[x][a] == dist[x][best[x]] && a < best[x])) best[x] = a;
    }
    for (std::size_t x = a + 1; x < b; ++x)
      if (active[x] && best[x] == b) refresh(x);
  }

  Clustering out;
  out.method = ClusterMethod::agglomerative;
  out.k = k;
  out.linkage = linkage;
  out.metric = metric;
  out.assignment.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t root = i;
    while (parent[root] != root) root = parent[root];
    out.assignment[i] = static_cast<int>(root);
  }
  canonicalize(out.assignment);
  return out;
}

Clustering dbscan(const Matrix& points, double eps, std::size_t min_pts, Metric metric) {
  if (!(eps > 0.0)) throw InvalidArgument("dbscan: eps must be positive");
  if (min_pts < 1) throw InvalidArgument("dbscan: min_pts must be at least 1");
  const auto n = static_cast<std::size_t>(points.rows());
  auto neighbours = [&](std::size_t p) {
    std::vector<std::size_t> out;
    for (std::size_t q = 0; q < n; ++q)
      if (point_distance(points, p, q, metric) <= eps) out.push_back(q);
    return out;
  };

  constexpr int kUnvisited = -2;
  std::vector<int> label(n, kUnvisited);
  int cluster = 0;
  for (std::size_t p = 0; p < n; ++p) {
    if (label[p] != kUnvisited) continue;
    auto seeds = neighbours(p);
    if (seeds.size() < min_pts) {
      label[p] = Clustering::kNoise;
      continue;
    }
    label[p] = cluster;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const std::size_t q = seeds[s];
      if (label[q] == Clustering::kNoise) label[q] = cluster;
      if (label[q] != kUnvisited) continue;
      label[q] = cluster;
      auto more = neighbours(q);
      if (more.size() >= min_pts) seeds.insert(seeds.end(), more.begin(), more.end());
    }
    ++cluster;
  }

  Clustering out;
  out.method = ClusterMethod::dbscan;
  out.metric = metric;
  out.eps = eps;
  out.min_pts = min_pts;
  out.assignment = std::move(label);
  out.k = out.n_clusters();
  return out;
}

namespace {

std::string tsv_field(std::string s) {
  for (auto& ch : s)
    if (ch == '\t' || ch == '\n' || ch == '\r') ch = ' ';
  return s;
}

}  // namespace

void export_projector(const TitleSpace& space, const Clustering* clustering, const std::filesystem::path& vectors_path,
                      const std::filesystem::path& metadata_path) {
  space.validate();
  if (clustering && clustering->assignment.size() != space.size())
    throw InvalidArgument("clustering does not cover the title space");
  std::ofstream vectors(vectors_path, std::ios::binary | std::ios::trunc);
  std::ofstream meta(metadata_path, std::ios::binary | std::ios::trunc);
  if (!vectors || !meta) throw IoError("cannot write projector files");
  char buf[40];
  for (Eigen::Index i = 0; i < space.vectors.rows(); ++i) {
    for (Eigen::Index j = 0; j < space.vectors.cols(); ++j) {
      if (j > 0) vectors << '\t';
      std::snprintf(buf, sizeof(buf), "%.17g", space.vectors(i, j));
      vectors << buf;
    }
    vectors << '\n';
  }
  meta << "title\tcount\tcluster\n";
  for (std::size_t i = 0; i < space.size(); ++i) {
    meta << tsv_field(space.titles[i]) << '\t' << space.counts[i] << '\t';
    if (clustering) meta << clustering->assignment[i];
    meta << '\n';
  }
  if (!vectors || !meta) throw IoError("write failed for projector files");
}

Matrix load_projector_vectors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::istringstream fields(line);
    std::string field;
    while (std::getline(fields, field, '\t')) row.push_back(std::strtod(field.c_str(), nullptr));
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError(rows.size() + 1, "ragged vectors file");
    rows.push_back(std::move(row));
  }
  Matrix out(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return out;
}

void save_clustering_csv(const TitleSpace& space, const Clustering& clustering, const std::filesystem::path& path) {
  if (clustering.assignment.size() != space.size()) throw InvalidArgument("clustering does not cover the title space");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  csv::write_row(out, {"title", "cluster", "count"});
  for (std::size_t i = 0; i < space.size(); ++i)
    csv::write_row(out, {space.titles[i], std::to_string(clustering.assignment[i]), std::to_string(space.counts[i])});
}

}  // namespace notesplit
