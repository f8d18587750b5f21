#include <doctest.h>

#include <sstream>

#include "binmr/benchmark.hpp"
#include "binmr/errors.hpp"
#include "binmr/io.hpp"

using namespace binmr;

namespace {

std::vector<Scenario> tiny_scenario() {
  std::istringstream in("N\tp\ts\tb\ttest_n\n120\t100\t40\t0.1\t200\n");
  return read_scenarios(in);
}

BenchmarkOptions quick(std::vector<Method> methods, std::size_t replicates) {
  BenchmarkOptions o;
  o.methods = std::move(methods);
  o.replicates = replicates;
  o.fit.n_lambda = 4;
  o.fit.lambda_min_ratio = 0.1;
  o.fit.rhos = {1.0};
  return o;
}

}  // namespace

TEST_SUITE("benchmark") {

TEST_CASE("scenario table parsing") {
  const auto s = tiny_scenario();
  REQUIRE(s.size() == 1);
  CHECK(s[0].config.N == 120);
  CHECK(s[0].config.b == 0.1);
  CHECK(s[0].config.test_n == 200);
  std::istringstream missing("N\tp\ts\n120\t100\t40\n");
  CHECK_THROWS_AS(read_scenarios(missing), LookupError);
  std::istringstream invalid("N\tp\ts\tb\n121\t100\t40\t0.1\n");
  CHECK_THROWS_WITH_AS(read_scenarios(invalid, "sc"), doctest::Contains("sc:2"), ParseError);
}

TEST_CASE("one replicate, one method gives one row each") {
  const auto scenarios = tiny_scenario();
  const auto rows = run_benchmark(scenarios, quick({Method::ibmr_ng}, 1));
  REQUIRE(rows.size() == 1);
  CHECK_FALSE(rows[0].failed);
  CHECK(rows[0].kl > 0.0);
  CHECK(rows[0].hellinger > 0.0);
  CHECK(rows[0].hellinger < 1.0);
  std::stringstream rep, sum;
  write_replicates(rep, scenarios, rows);
  write_summary(sum, scenarios, rows);
  CHECK(read_table(rep).rows.size() == 1);
  const Table s = read_table(sum);
  REQUIRE(s.rows.size() == 1);
  CHECK(parse_double(s.rows[0][s.column("kl_mean")], "s", 2) == rows[0].kl);
}

TEST_CASE("summary mean and standard error recompute from replicates") {
  const auto scenarios = tiny_scenario();
  const auto rows = run_benchmark(scenarios, quick({Method::ibmr_int, Method::gl_orc}, 3));
  REQUIRE(rows.size() == 6);
  std::stringstream rep, sum;
  write_replicates(rep, scenarios, rows);
  write_summary(sum, scenarios, rows);
  const Table r = read_table(rep);
  const Table s = read_table(sum);
  REQUIRE(s.rows.size() == 2);
  for (const auto& srow : s.rows) {
    std::vector<double> kl;
    for (const auto& rrow : r.rows) {
      if (rrow[r.column("method")] == srow[s.column("method")]) {
        kl.push_back(parse_double(rrow[r.column("kl")], "r", 0));
      }
    }
    REQUIRE(kl.size() == 3);
    const double mean = (kl[0] + kl[1] + kl[2]) / 3.0;
    double ss = 0.0;
    for (double v : kl) {
      ss += (v - mean) * (v - mean);
    }
    CHECK(parse_double(srow[s.column("kl_mean")], "s", 0) == doctest::Approx(mean).epsilon(1e-14));
    CHECK(parse_double(srow[s.column("kl_se")], "s", 0) == doctest::Approx(std::sqrt(ss / 2.0 / 3.0)).epsilon(1e-12));
    CHECK(srow[s.column("failures")] == "0");
  }
}

TEST_CASE("failures are counted and excluded") {
  const auto scenarios = tiny_scenario();
  std::vector<ReplicateMetrics> rows(3);
  for (std::size_t i = 0; i < 3; ++i) {
    rows[i].replicate = i;
    rows[i].kl = 1.0 + static_cast<double>(i);
  }
  rows[1].failed = true;
  rows[1].error = "boom";
  std::stringstream sum, rep;
  write_summary(sum, scenarios, rows);
  write_replicates(rep, scenarios, rows);
  const Table s = read_table(sum);
  CHECK(s.rows[0][s.column("failures")] == "1");
  CHECK(s.rows[0][s.column("n_ok")] == "2");
  CHECK(parse_double(s.rows[0][s.column("kl_mean")], "s", 0) == 2.0);
  const Table r = read_table(rep);
  CHECK(r.rows[1][r.column("status")] == "failed: boom");
}

TEST_CASE("benchmark is deterministic") {
  const auto scenarios = tiny_scenario();
  const auto a = run_benchmark(scenarios, quick({Method::subset}, 1));
  const auto b = run_benchmark(scenarios, quick({Method::subset}, 1));
  CHECK(a[0].kl == b[0].kl);
  CHECK(a[0].error_rate == b[0].error_rate);
}

}
