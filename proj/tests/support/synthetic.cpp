#include "support/synthetic.hpp"

#include <cmath>
#include <fstream>
#include <random>

namespace synthetic {
namespace {

using scalarprobe::Attribute;
using scalarprobe::ScalarRecord;
using scalarprobe::Vector;

Vector unit_direction(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector u(dim);
  for (int j = 0; j < dim; ++j) u[j] = normal(rng);
  return u / u.norm();
}

std::string object_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "obj%05d", i);
  return buf;
}

}  // namespace

Dataset linear(int n_objects, int dim, double noise_fraction, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> centre(-2, 9);
  std::uniform_real_distribution<double> offset(-0.3, 0.3);
  std::uniform_int_distribution<int> count(1, 5);
  const double step = 1.0;
  const Vector u = unit_direction(dim, rng);

  Dataset ds{{}, scalarprobe::EmbeddingTable("synthetic-linear", dim), u};
  for (int i = 0; i < n_objects; ++i) {
    const std::string name = object_name(i);
    const int c = centre(rng);
    const double log_value = c + offset(rng);
    for (int r = 0; r < 40; ++r) {
      ds.records.push_back({name, Attribute::kMass, std::pow(10.0, log_value + 0.15 * normal(rng)), count(rng)});
    }
    Vector e = c * step * u;
    for (int j = 0; j < dim; ++j) e[j] += noise_fraction * step * normal(rng);
    ds.table.add(name, e);
  }
  return ds;
}

Dataset bimodal(int n_objects, int dim, int gap, double noise_fraction, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> low(-2, 9 - gap);
  std::uniform_real_distribution<double> jitter(-0.2, 0.2);
  Vector u = unit_direction(dim, rng);
  Vector v = unit_direction(dim, rng);
  v -= v.dot(u) * u;
  v /= v.norm();

  Dataset ds{{}, scalarprobe::EmbeddingTable("synthetic-bimodal", dim), u};
  for (int i = 0; i < n_objects; ++i) {
    const std::string name = object_name(i);
    const int a = low(rng);
    ds.records.push_back({name, Attribute::kMass, std::pow(10.0, a + jitter(rng)), 60});
    ds.records.push_back({name, Attribute::kMass, std::pow(10.0, a + gap + jitter(rng)), 60});
    Vector e = a * u + (a + gap) * v;
    for (int j = 0; j < dim; ++j) e[j] += noise_fraction * normal(rng);
    ds.table.add(name, e);
  }
  return ds;
}

void write_records(const std::vector<ScalarRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path);
  out.precision(17);
  for (const auto& r : records) {
    out << r.object << '\t' << scalarprobe::to_string(r.attribute) << '\t' << r.value << '\t' << r.count << '\n';
  }
}

std::filesystem::path temp_dir(const std::string& tag) {
  std::random_device rd;
  auto dir = std::filesystem::temp_directory_path() / ("scalarprobe-" + tag + "-" + std::to_string(rd()));
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace synthetic
