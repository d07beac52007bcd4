#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "notesplit/linalg.hpp"

namespace notesplit {

/// Title embeddings, one row per vocabulary label in id order.
struct TitleSpace {
  std::vector<std::string> titles;
  Matrix vectors;  // C × d
  std::vector<std::size_t> counts;

  std::size_t size() const { return titles.size(); }
  std::optional<std::size_t> find(const std::string& title) const;
  /// Throws InvalidArgument when the three fields disagree in length.
  void validate() const;
};

double cosine_similarity(const Vector& a, const Vector& b);

struct DistanceMatrix {
  Matrix distances;                   // 1 - cos; NaN rows/columns for zero vectors
  std::vector<std::size_t> zero_rows;
};

/// Throws InvalidArgument when every row is zero.
DistanceMatrix distance_matrix(const TitleSpace& space);

struct Neighbor {
  std::size_t id = 0;
  std::string title;
  double similarity = 0.0;
};

/// Top-n titles by cosine similarity, self excluded, ties by ascending id.
/// Throws NotFound for an unknown title.
std::vector<Neighbor> nearest_titles(const TitleSpace& space, std::size_t id, std::size_t n = 15);
std::vector<Neighbor> nearest_titles(const TitleSpace& space, const std::string& title, std::size_t n = 15);

enum class ClusterMethod { kmeans, agglomerative, dbscan };
enum class Linkage { average, single, complete };
enum class Metric { cosine, euclidean };

const char* to_string(ClusterMethod method);
ClusterMethod parse_cluster_method(const std::string& name);
Linkage parse_linkage(const std::string& name);
Metric parse_metric(const std::string& name);

struct Clustering {
  static constexpr int kNoise = -1;

  std::vector<int> assignment;  // cluster ids numbered by first appearance
  ClusterMethod method = ClusterMethod::kmeans;
  std::size_t k = 0;
  Linkage linkage = Linkage::average;
  Metric metric = Metric::euclidean;
  double eps = 0.0;
  std::size_t min_pts = 0;
  double inertia = 0.0;                // kmeans only
  std::vector<double> inertia_history; // kmeans: one entry per Lloyd iteration
  std::size_t iterations = 0;

  std::size_t n_clusters() const;
};

struct KMeansConfig {
  std::size_t k = 20;
  std::uint64_t seed = 0;
  std::size_t max_iter = 300;
  std::size_t n_init = 10;  // restarts; the lowest-inertia run is kept
  bool normalize = false;   // unit-normalize rows before clustering
};

/// k-means++ seeding followed by Lloyd iterations in Euclidean distance.
/// Throws InvalidArgument when k is zero or exceeds the number of points.
Clustering kmeans(const Matrix& points, const KMeansConfig& config);

/// Bottom-up merging until k clusters remain; ties merge the pair with the
/// smallest indices.
Clustering agglomerative(const Matrix& points, std::size_t k, Linkage linkage = Linkage::average,
                         Metric metric = Metric::cosine);

/// Density clustering; points within eps (inclusive) are neighbours and a
/// point with at least min_pts neighbours (itself included) is a core point.
Clustering dbscan(const Matrix& points, double eps, std::size_t min_pts, Metric metric = Metric::cosine);

double point_distance(const Matrix& points, std::size_t i, std::size_t j, Metric metric);

/// TensorFlow Embedding Projector pair: a header-less vectors TSV and a
/// metadata TSV with header "title\tcount\tcluster".
void export_projector(const TitleSpace& space, const Clustering* clustering,
                      const std::filesystem::path& vectors_path, const std::filesystem::path& metadata_path);
Matrix load_projector_vectors(const std::filesystem::path& path);

/// CSV: title,cluster,count with a header row.
void save_clustering_csv(const TitleSpace& space, const Clustering& clustering, const std::filesystem::path& path);

}  // namespace notesplit
