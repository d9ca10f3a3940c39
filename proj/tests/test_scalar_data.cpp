#include "scalarprobe/error.hpp"
#include "scalarprobe/scalar_data.hpp"

#include <doctest.h>
#include <mpfr.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace scalarprobe;

namespace {

// clamp(round_half_away(log_base(v))) evaluated with 256-bit MPFR.
int mpfr_bucket(double v, const BucketScheme& s) {
  mpfr_t x, l;
  mpfr_inits2(256, x, l, static_cast<mpfr_ptr>(nullptr));
  mpfr_set_d(x, v, MPFR_RNDN);
  if (s.base() == 10) {
    mpfr_log10(l, x, MPFR_RNDN);
  } else {
    mpfr_t lb;
    mpfr_init2(lb, 256);
    mpfr_log2(l, x, MPFR_RNDN);
    mpfr_set_si(lb, s.base(), MPFR_RNDN);
    mpfr_log2(lb, lb, MPFR_RNDN);
    mpfr_div(l, l, lb, MPFR_RNDN);
    mpfr_clear(lb);
  }
  mpfr_round(l, l);
  long r = mpfr_get_si(l, MPFR_RNDN);
  mpfr_clears(x, l, static_cast<mpfr_ptr>(nullptr));
  return static_cast<int>(std::clamp<long>(r, s.min_exp(), s.max_label()));
}

ScalarRecord rec(double v, std::int64_t c = 1) { return {"obj", Attribute::kMass, v, c}; }

EmpiricalDistribution dist_from(std::initializer_list<std::pair<int, double>> mass) {
  Probs p{};
  for (auto [label, m] : mass) p[label + 2] = m;
  return {BucketScheme::decimal(), p, 1};
}

// Grid-scan oracle: evaluate the smoothed density independently and count
// rises followed by falls, each of at least `prominence` (zig-zag with
// hysteresis). Before the first qualifying move only a peak sitting on the
// grid edge counts, and a final climb counts only if it tops out on the edge.
int zigzag_peaks(const EmpiricalDistribution& d, double bandwidth = 0.75, double step = 0.05,
                 double prominence = 1e-3) {
  std::vector<double> g;
  for (double x = -3.0; x <= 10.0 + 1e-9; x += step) {
    double f = 0.0;
    for (int label = -2; label <= 9; ++label) {
      double z = (x - label) / bandwidth;
      f += d.prob_at_label(label) * std::exp(-z * z / 2) / (bandwidth * std::sqrt(2 * M_PI));
    }
    g.push_back(f);
  }
  enum { kStart, kRising, kFalling } state = kStart;
  int peaks = 0;
  double hi = g[0], lo = g[0], extreme = g[0];
  std::size_t hi_at = 0, extreme_at = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double v = g[i];
    if (state == kStart) {
      if (v > hi) hi = v, hi_at = i;
      lo = std::min(lo, v);
      if (hi - v >= prominence) {
        if (hi_at == 0) ++peaks;
        state = kFalling;
        extreme = v;
      } else if (v - lo >= prominence) {
        state = kRising;
        extreme = v, extreme_at = i;
      }
    } else if (state == kRising) {
      if (v > extreme) extreme = v, extreme_at = i;
      if (extreme - v >= prominence) {
        ++peaks;
        state = kFalling;
        extreme = v;
      }
    } else {
      if (v < extreme) extreme = v;
      if (v - extreme >= prominence) {
        state = kRising;
        extreme = v, extreme_at = i;
      }
    }
  }
  if (state == kRising && extreme_at + 1 == g.size()) ++peaks;
  return std::max(peaks, 1);
}

}  // namespace

TEST_CASE("bucketize examples") {
  const auto s = BucketScheme::decimal();
  CHECK(s.bucketize(314.1) == 2);
  CHECK(s.bucketize(0.005) == -2);
  // round(log10(9.99e9)) = round(9.9996) = 10, clamped to 9.
  CHECK(std::round(std::log10(9.99e9)) == 10.0);
  CHECK(s.bucketize(9.99e9) == 9);
  CHECK(s.bucketize(1e-30) == -2);
  CHECK(s.bucketize(1.0) == 0);
  CHECK_THROWS_AS(s.bucketize(0.0), ValidationError);
  CHECK_THROWS_AS(s.bucketize(-1.0), ValidationError);
  CHECK_THROWS_AS(s.bucketize(std::nan("")), ValidationError);
}

TEST_CASE("bucketize matches a high-precision oracle at the half-way boundaries") {
  for (const auto& s : {BucketScheme::decimal(), BucketScheme::power_of_four()}) {
    for (int label = s.min_exp() - 1; label <= s.max_label(); ++label) {
      double b = std::pow(static_cast<double>(s.base()), label + 0.5);
      double x = b;
      for (int k = 0; k < 4; ++k) x = std::nextafter(x, 0.0);
      for (int k = 0; k < 9; ++k, x = std::nextafter(x, INFINITY)) {
        CHECK_MESSAGE(s.bucketize(x) == mpfr_bucket(x, s), "base " << s.base() << " x=" << x);
      }
    }
  }
  // Exact half-way values exist in base 4: 4^(1/2) = 2 and 4^(-1/2) = 0.5.
  const auto four = BucketScheme::power_of_four();
  CHECK(four.bucketize(2.0) == 1);
  CHECK(four.bucketize(0.5) == -1);
  CHECK(four.bucketize(8.0) == 2);
}

TEST_CASE("bucketize is monotone") {
  const auto s = BucketScheme::decimal();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> e(-5, 12);
  std::vector<double> xs;
  for (int i = 0; i < 5000; ++i) xs.push_back(std::pow(10.0, e(rng)));
  std::sort(xs.begin(), xs.end());
  for (std::size_t i = 1; i < xs.size(); ++i) CHECK(s.bucketize(xs[i - 1]) <= s.bucketize(xs[i]));
}

TEST_CASE("label_for_log10 rounds half away from zero and clamps") {
  const auto s = BucketScheme::decimal();
  CHECK(s.label_for_log10(2.4) == 2);
  CHECK(s.label_for_log10(2.5) == 3);
  CHECK(s.label_for_log10(-1.5) == -2);
  CHECK(s.label_for_log10(-5) == -2);
  CHECK(s.label_for_log10(42) == 9);
  CHECK(BucketScheme::power_of_four().label_for_log10(std::log10(64.0)) == 3);
}

TEST_CASE("build_distribution") {
  const auto s = BucketScheme::decimal();
  auto one = build_distribution({rec(10, 5)}, s);
  CHECK(one.distribution.prob_at_label(1) == 1.0);
  CHECK(one.distribution.total_count() == 5);

  auto sym = build_distribution({rec(1), rec(100)}, s);
  CHECK(sym.distribution.prob_at_label(0) == 0.5);
  CHECK(sym.distribution.prob_at_label(2) == 0.5);

  // Oracle: counts 3 and 1 over a total of 4.
  auto weighted = build_distribution({rec(1, 3), rec(10, 1)}, s);
  CHECK(weighted.distribution.prob_at_label(0) == doctest::Approx(3.0 / 4.0).epsilon(1e-15));
  CHECK(weighted.distribution.prob_at_label(1) == doctest::Approx(1.0 / 4.0).epsilon(1e-15));

  auto skipped = build_distribution({rec(-3), rec(0), rec(1000)}, s);
  CHECK(skipped.skipped_records == 2);
  CHECK(skipped.distribution.prob_at_label(3) == 1.0);

  CHECK_THROWS_AS(build_distribution({}, s), ValidationError);
  CHECK_THROWS_AS(build_distribution({rec(-1)}, s), ValidationError);
  CHECK_THROWS_AS(build_distribution({rec(1), {"other", Attribute::kMass, 1.0, 1}}, s), ValidationError);
}

TEST_CASE("build_distribution always yields a valid distribution") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> e(-6, 14);
  std::uniform_int_distribution<int> c(1, 1000);
  for (int t = 0; t < 200; ++t) {
    std::vector<ScalarRecord> rs;
    for (int i = 0; i < 1 + t % 17; ++i) rs.push_back(rec(std::pow(10.0, e(rng)), c(rng)));
    auto d = build_distribution(rs, BucketScheme::decimal()).distribution;
    double sum = 0;
    for (double p : d.probs()) {
      CHECK(p >= 0.0);
      sum += p;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("filter_min_count is strict") {
  Dataset ds;
  ds.objects.push_back({"a", {{"a", Attribute::kMass, 1, 100}}});
  ds.objects.push_back({"b", {{"b", Attribute::kMass, 1, 60}, {"b", Attribute::kMass, 2, 41}}});
  auto kept = filter_min_count(ds, 100);
  REQUIRE(kept.objects.size() == 1);
  CHECK(kept.objects[0].object == "b");
  CHECK(filter_min_count(Dataset{}, 100).objects.empty());
}

TEST_CASE("log_median") {
  CHECK(log_median({rec(10)}) == doctest::Approx(1.0));
  // Oracle: even count -> mean of the two middle values, log10(50.5).
  CHECK(log_median({rec(1), rec(100)}) == doctest::Approx(1.7032913781186614).epsilon(1e-14));
  CHECK(log_median({rec(1), rec(10), rec(100)}) == doctest::Approx(1.0));
  // Counts expand the sequence: 1 x3, 1000 x1 -> median 1.
  CHECK(log_median({rec(1000, 1), rec(1, 3)}) == doctest::Approx(0.0));
  // 1 x2, 100 x2 -> mean of 1 and 100.
  CHECK(log_median({rec(1, 2), rec(100, 2)}) == doctest::Approx(std::log10(50.5)));
  CHECK_THROWS_AS(log_median({}), ValidationError);
}

TEST_CASE("detect_modality examples") {
  auto point = EmpiricalDistribution::point_mass(BucketScheme::decimal(), 3);
  CHECK(detect_modality(point).n_peaks == 1);
  CHECK(detect_modality(point).label == Modality::kUnimodal);

  auto two = dist_from({{0, 0.5}, {5, 0.5}});
  CHECK(zigzag_peaks(two) == 2);
  CHECK(detect_modality(two).n_peaks == 2);
  CHECK(detect_modality(two).label == Modality::kMultimodal);

  Probs uniform;
  uniform.fill(1.0 / 12);
  EmpiricalDistribution flat(BucketScheme::decimal(), uniform, 12);
  CHECK(zigzag_peaks(flat) == 1);
  CHECK(detect_modality(flat).n_peaks == 1);

  // Two buckets apart separate; adjacent buckets merge.
  CHECK(detect_modality(dist_from({{2, 0.5}, {4, 0.5}})).n_peaks == 2);
  CHECK(detect_modality(dist_from({{2, 0.5}, {3, 0.5}})).n_peaks == 1);
  CHECK(detect_modality(dist_from({{-2, 0.5}, {9, 0.5}})).n_peaks == 2);
}

TEST_CASE("detect_modality agrees with the grid-scan oracle and stays within bounds") {
  std::mt19937_64 rng(17);
  std::gamma_distribution<double> g(0.3, 1.0);
  for (int t = 0; t < 3000; ++t) {
    Probs p{};
    double sum = 0;
    for (double& x : p) {
      x = (rng() % 3 == 0) ? 0.0 : g(rng);
      sum += x;
    }
    if (sum == 0) continue;
    for (double& x : p) x /= sum;
    EmpiricalDistribution d(BucketScheme::decimal(), p, 1);
    int n = detect_modality(d).n_peaks;
    CHECK(n >= 1);
    CHECK(n <= 6);
    CHECK(n == zigzag_peaks(d));
  }
  // Alternating masses give the maximum of six peaks.
  CHECK(detect_modality(dist_from({{-2, 1.0 / 6}, {0, 1.0 / 6}, {2, 1.0 / 6}, {4, 1.0 / 6}, {6, 1.0 / 6}, {8, 1.0 / 6}}))
            .n_peaks == 6);
}

TEST_CASE("detect_modality is translation invariant away from the edges") {
  for (int shift = 0; shift < 5; ++shift) {
    auto base = dist_from({{-1 + shift, 0.3}, {0 + shift, 0.2}, {3 + shift, 0.5}});
    CHECK(detect_modality(base).n_peaks == 2);
  }
}

TEST_CASE("load_records") {
  std::istringstream in(
      "dog\tmass\t20000\t3\n"
      "dog\tMASS\t30000\t1\n"
      "dog\tlength\t1\t2\n"
      "cat\tmass\t-4\t1\n"
      "cat\tmass\t4000\t7\n");
  LoadStats stats;
  auto ds = load_records(in, Attribute::kMass, &stats);
  REQUIRE(ds.objects.size() == 2);
  CHECK(ds.objects[0].object == "cat");
  CHECK(ds.objects[0].total_count() == 7);
  CHECK(ds.objects[1].total_count() == 4);
  CHECK(stats.lines == 5);
  CHECK(stats.other_attribute == 1);
  CHECK(stats.non_positive == 1);

  std::istringstream bad("dog\tmass\tabc\t1\n");
  try {
    load_records(bad, Attribute::kMass);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 1);
  }
  std::istringstream short_line("ok\tmass\t1\t1\ndog\tmass\t1\n");
  CHECK_THROWS_AS(load_records(short_line, Attribute::kMass), ParseError);
  std::istringstream bad_attr("dog\tweight\t1\t1\n");
  CHECK_THROWS_AS(load_records(bad_attr, Attribute::kMass), ParseError);
}
