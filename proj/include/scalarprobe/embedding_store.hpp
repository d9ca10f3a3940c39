#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace scalarprobe {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Frozen per-object vectors from one encoder.
//
// File format, UTF-8:
//   #dim=<D>\tencoder=<name>[\t<key>=<value>...]
//   <object>\t<v1> <v2> ... <vD>
class EmbeddingTable {
 public:
  EmbeddingTable(std::string encoder_name, int dim);

  // Throws ValidationError on a duplicate name, wrong length or non-finite value.
  void add(const std::string& object, const Vector& v);

  const std::string& encoder_name() const { return encoder_name_; }
  int dim() const { return dim_; }
  std::size_t size() const { return names_.size(); }
  bool contains(const std::string& object) const { return index_.count(object) != 0; }
  const std::vector<std::string>& objects() const { return names_; }

  // Throws ValidationError when the object is absent.
  Eigen::Map<const Vector> row(const std::string& object) const;

  // Stacks the requested objects into an n x dim matrix.
  Matrix gather(const std::vector<std::string>& objects) const;

  std::map<std::string, std::string>& metadata() { return metadata_; }
  const std::map<std::string, std::string>& metadata() const { return metadata_; }

 private:
  std::string encoder_name_;
  int dim_;
  std::vector<std::string> names_;
  std::vector<double> data_;
  std::unordered_map<std::string, std::size_t> index_;
  std::map<std::string, std::string> metadata_;
};

// Throws ParseError (with the 1-based line) on any format violation.
EmbeddingTable load_table(std::istream& in);
EmbeddingTable load_table(const std::string& path);

// Writes shortest round-trip decimal floats.
void save_table(const EmbeddingTable& table, std::ostream& out);
void save_table(const EmbeddingTable& table, const std::string& path);

struct PcaProjection {
  Vector mean;        // dim
  Matrix components;  // k x dim, orthonormal rows

  int k() const { return static_cast<int>(components.rows()); }
  int dim() const { return static_cast<int>(components.cols()); }
};

// Top-k right singular directions of the centered data. Each component is
// signed so its largest-magnitude entry is positive. Throws ValidationError
// when k < 1, k > min(n - 1, dim), or the centered data has rank < k.
PcaProjection fit_pca(const Matrix& x, int k = 150);

Vector apply_pca(const PcaProjection& proj, const Vector& x);
Matrix apply_pca(const PcaProjection& proj, const Matrix& x);

// Per-dimension z-score fitted on training rows. Zero-variance dimensions
// get unit scale.
struct Standardizer {
  Vector mean;
  Vector scale;

  static Standardizer fit(const Matrix& x);
  Vector apply(const Vector& x) const;
  Matrix apply(const Matrix& x) const;
};

}  // namespace scalarprobe
