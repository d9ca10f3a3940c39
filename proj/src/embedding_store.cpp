#include "scalarprobe/embedding_store.hpp"

#include "scalarprobe/error.hpp"

#include <Eigen/SVD>

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

namespace scalarprobe {

EmbeddingTable::EmbeddingTable(std::string encoder_name, int dim) : encoder_name_(std::move(encoder_name)), dim_(dim) {
  if (dim < 1) throw ValidationError("embedding dim must be >= 1");
}

void EmbeddingTable::add(const std::string& object, const Vector& v) {
  if (v.size() != dim_) throw ValidationError("embedding for '" + object + "' has wrong length");
  if (!v.allFinite()) throw ValidationError("embedding for '" + object + "' has a non-finite value");
  if (!index_.emplace(object, names_.size()).second) {
    throw ValidationError("duplicate object '" + object + "'");
  }
  names_.push_back(object);
  data_.insert(data_.end(), v.data(), v.data() + v.size());
}

Eigen::Map<const Vector> EmbeddingTable::row(const std::string& object) const {
  auto it = index_.find(object);
  if (it == index_.end()) throw ValidationError("no embedding for '" + object + "'");
  return Eigen::Map<const Vector>(data_.data() + it->second * dim_, dim_);
}

Matrix EmbeddingTable::gather(const std::vector<std::string>& objects) const {
  Matrix out(static_cast<Eigen::Index>(objects.size()), dim_);
  for (std::size_t i = 0; i < objects.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = row(objects[i]).transpose();
  return out;
}

EmbeddingTable load_table(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing header", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("#", 0) != 0) throw ParseError("header must start with '#'", 1);

  std::map<std::string, std::string> header;
  std::string_view rest = std::string_view(line).substr(1);
  while (!rest.empty()) {
    std::size_t tab = rest.find('\t');
    std::string_view field = rest.substr(0, tab);
    std::size_t eq = field.find('=');
    if (eq == std::string_view::npos) throw ParseError("header field without '='", 1);
    header[std::string(field.substr(0, eq))] = std::string(field.substr(eq + 1));
    rest = tab == std::string_view::npos ? std::string_view{} : rest.substr(tab + 1);
  }
  auto dim_it = header.find("dim");
  auto enc_it = header.find("encoder");
  if (dim_it == header.end() || enc_it == header.end()) throw ParseError("header needs dim= and encoder=", 1);
  int dim = 0;
  const std::string& dim_text = dim_it->second;
  auto [dp, dec] = std::from_chars(dim_text.data(), dim_text.data() + dim_text.size(), dim);
  if (dec != std::errc() || dp != dim_text.data() + dim_text.size() || dim < 1) {
    throw ParseError("bad dim '" + dim_text + "'", 1);
  }

  EmbeddingTable table(enc_it->second, dim);
  for (auto& [key, value] : header) {
    if (key != "dim" && key != "encoder") table.metadata()[key] = value;
  }

  std::size_t line_no = 1;
  Vector v(dim);
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) throw ParseError("expected '<object>\\t<values>'", line_no);
    std::string object = line.substr(0, tab);

    const char* p = line.data() + tab + 1;
    const char* end = line.data() + line.size();
    int filled = 0;
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      if (filled == dim) throw ParseError("more than " + std::to_string(dim) + " values", line_no);
      double x = 0.0;
      auto [np, ec] = std::from_chars(p, end, x);
      if (ec != std::errc() || (np < end && *np != ' ')) throw ParseError("bad float", line_no);
      if (!std::isfinite(x)) throw ParseError("non-finite value", line_no);
      v[filled++] = x;
      p = np;
    }
    if (filled != dim) {
      throw ParseError("expected " + std::to_string(dim) + " values, got " + std::to_string(filled), line_no);
    }
    if (table.contains(object)) throw ParseError("duplicate object '" + object + "'", line_no);
    table.add(object, v);
  }
  if (in.bad()) throw ValidationError("read error in embedding file");
  return table;
}

EmbeddingTable load_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open embedding file '" + path + "'");
  return load_table(in);
}

void save_table(const EmbeddingTable& table, std::ostream& out) {
  out << "#dim=" << table.dim() << "\tencoder=" << table.encoder_name();
  for (const auto& [key, value] : table.metadata()) out << '\t' << key << '=' << value;
  out << '\n';
  char buf[64];
  for (const auto& name : table.objects()) {
    out << name << '\t';
    auto row = table.row(name);
    for (int j = 0; j < table.dim(); ++j) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, row[j]);
      if (j > 0) out << ' ';
      out.write(buf, ptr - buf);
    }
    out << '\n';
  }
}

void save_table(const EmbeddingTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write embedding file '" + path + "'");
  save_table(table, out);
  if (!out) throw ValidationError("write error on '" + path + "'");
}

PcaProjection fit_pca(const Matrix& x, int k) {
  const auto n = x.rows();
  const auto dim = x.cols();
  if (n < 2) throw ValidationError("fit_pca: need at least 2 rows");
  if (k < 1 || k > std::min<Eigen::Index>(n - 1, dim)) {
    throw ValidationError("fit_pca: k=" + std::to_string(k) + " exceeds min(n-1, dim)");
  }
  PcaProjection proj;
  proj.mean = x.colwise().mean().transpose();
  Eigen::MatrixXd centered = x.rowwise() - proj.mean.transpose();

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double tol = std::max<double>(n, dim) * std::numeric_limits<double>::epsilon() * (s.size() ? s[0] : 0.0);
  if (s.size() < k || s[0] == 0.0 || s[k - 1] <= tol) {
    throw ValidationError("fit_pca: data rank is below k=" + std::to_string(k));
  }
  proj.components = svd.matrixV().leftCols(k).transpose();
  for (int r = 0; r < k; ++r) {
    Eigen::Index arg = 0;
    proj.components.row(r).cwiseAbs().maxCoeff(&arg);
    if (proj.components(r, arg) < 0) proj.components.row(r) *= -1.0;
  }
  return proj;
}

Vector apply_pca(const PcaProjection& proj, const Vector& x) {
  if (x.size() != proj.dim()) throw ValidationError("apply_pca: length mismatch");
  return proj.components * (x - proj.mean);
}

Matrix apply_pca(const PcaProjection& proj, const Matrix& x) {
  if (x.cols() != proj.dim()) throw ValidationError("apply_pca: length mismatch");
  return (x.rowwise() - proj.mean.transpose()) * proj.components.transpose();
}

Standardizer Standardizer::fit(const Matrix& x) {
  if (x.rows() < 1) throw ValidationError("standardizer: no rows");
  Standardizer s;
  s.mean = x.colwise().mean().transpose();
  Matrix centered = x.rowwise() - s.mean.transpose();
  s.scale = (centered.colwise().squaredNorm() / static_cast<double>(x.rows())).cwiseSqrt().transpose();
  for (Eigen::Index j = 0; j < s.scale.size(); ++j) {
    if (!(s.scale[j] > 1e-12)) s.scale[j] = 1.0;
  }
  return s;
}

Vector Standardizer::apply(const Vector& x) const {
  if (x.size() != mean.size()) throw ValidationError("standardizer: length mismatch");
  return (x - mean).cwiseQuotient(scale);
}

Matrix Standardizer::apply(const Matrix& x) const {
  if (x.cols() != mean.size()) throw ValidationError("standardizer: length mismatch");
  return (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

}  // namespace scalarprobe
