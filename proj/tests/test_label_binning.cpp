#include <doctest.h>

#include <stdexcept>

#include "binmr/errors.hpp"
#include "binmr/label_binning.hpp"

using namespace binmr;

namespace {

CategorySet abcd() { return CategorySet({"A1", "A2", "B", "C"}); }

AnnotatedDataset rows(std::vector<std::string> y) {
  AnnotatedDataset d;
  const auto n = static_cast<Eigen::Index>(y.size());
  d.X = Matrix::Ones(n, 2);
  d.Z = Matrix(n, 0);
  d.y = std::move(y);
  return d;
}

}  // namespace

TEST_SUITE("label_binning") {

TEST_CASE("category set rejects degenerate input") {
  CHECK_THROWS_AS(CategorySet({"only"}), std::invalid_argument);
  CHECK_THROWS_AS(CategorySet({"a", ""}), std::invalid_argument);
  CHECK_THROWS_AS(CategorySet({"a", "b", "a"}), std::invalid_argument);
  const CategorySet c = abcd();
  CHECK(c.size() == 4);
  CHECK(c.index_of("B") == 2);
  CHECK_FALSE(c.find("Z").has_value());
  CHECK_THROWS_AS(c.index_of("Z"), LookupError);
}

TEST_CASE("binning numbers labels by first appearance and sorts bins") {
  const DatasetBinning b("d1", {"A", "A", "B", "C"});
  REQUIRE(b.num_labels() == 3);
  CHECK(b.label_name(0) == "A");
  CHECK(b.bin(0) == Bin{0, 1});
  CHECK(b.bin(1) == Bin{2});
  CHECK_FALSE(b.is_fine_label(0));
  CHECK(b.is_fine_label(2));
  CHECK(b.label_of_fine(1) == 0);
  CHECK(*b.find_label("C") == 2);
  CHECK_THROWS_AS(DatasetBinning("d1", {"A", ""}), std::invalid_argument);
}

TEST_CASE("bins partition the fine categories") {
  const DatasetBinning b("d", {"x", "y", "x", "z", "y"});
  std::vector<int> seen(5, 0);
  for (std::size_t j = 0; j < b.num_labels(); ++j) {
    for (std::size_t l : b.bin(j)) {
      ++seen[l];
      CHECK(b.label_of_fine(l) == j);
    }
  }
  for (int s : seen) {
    CHECK(s == 1);
  }
}

TEST_CASE("unbin names dataset and label on failure") {
  const BinningSpec spec(abcd(), {DatasetBinning("lab7", {"A", "A", "B", "C"})});
  CHECK(spec.unbin(0, "A") == Bin{0, 1});
  try {
    spec.unbin(0, "A1");
    FAIL("expected LookupError");
  } catch (const LookupError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("lab7") != std::string::npos);
    CHECK(msg.find("A1") != std::string::npos);
  }
}

TEST_CASE("spec rejects binnings of the wrong width") {
  CHECK_THROWS_AS(BinningSpec(abcd(), {DatasetBinning("d", {"A", "B", "C"})}), std::invalid_argument);
}

TEST_CASE("all_fine gives singleton bins") {
  const BinningSpec spec = BinningSpec::all_fine(abcd(), {"u", "v"});
  REQUIRE(spec.num_datasets() == 2);
  for (const auto& d : spec.datasets()) {
    CHECK(d.num_labels() == 4);
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(d.is_fine_label(j));
    }
  }
  CHECK(*spec.find_dataset("v") == 1);
}

TEST_CASE("collection checks shapes") {
  const BinningSpec spec = BinningSpec::all_fine(abcd(), {"u"});
  AnnotatedDataset d = rows({"A1", "B"});
  d.X = Matrix::Ones(3, 2);
  CHECK_THROWS_AS(DatasetCollection({d}, spec), DataError);
  d = rows({"A1", "B"});
  d.X(0, 0) = std::nan("");
  CHECK_THROWS_AS(DatasetCollection({d}, spec), DataError);
  CHECK_THROWS_AS(DatasetCollection({rows({"A1"}), rows({"B"})}, spec), DataError);
}

TEST_CASE("empty Z becomes an n x 0 matrix") {
  AnnotatedDataset d = rows({"A1", "B", "C"});
  d.Z = Matrix();
  const DatasetCollection c({d}, BinningSpec::all_fine(abcd(), {"u"}));
  CHECK(c.dataset(0).Z.rows() == 3);
  CHECK(c.num_covariates() == 0);
}

TEST_CASE("validation reports unknown labels") {
  const BinningSpec spec(abcd(), {DatasetBinning("u", {"A1", "A2", "B", "C"}),
                                  DatasetBinning("v", {"A", "A", "B", "C"})});
  const DatasetCollection c({rows({"A1", "A2", "B", "C"}), rows({"A", "A1"})}, spec);
  CHECK_FALSE(c.labels_resolved());
  const auto report = validate_binning(c);
  REQUIRE(report.size() == 1);
  CHECK(report[0].kind == ViolationKind::unknown_label);
  CHECK(report[0].dataset == 1);
  CHECK(report[0].name == "A1");
  CHECK_THROWS_AS(require_valid(c), DataError);
  CHECK_THROWS_AS(c.row_bin(1, 1), LookupError);
}

TEST_CASE("validation reports categories never seen at finest resolution") {
  const BinningSpec spec(abcd(), {DatasetBinning("u", {"A", "A", "B", "C"})});
  const DatasetCollection c({rows({"A", "B", "C"})}, spec);
  const auto report = validate_binning(c);
  REQUIRE(report.size() == 2);
  for (const auto& v : report) {
    CHECK(v.kind == ViolationKind::not_observed_fine);
  }
  CHECK(report[0].name == "A1");
  CHECK(report[1].name == "A2");
}

TEST_CASE("a valid mixed collection passes") {
  const BinningSpec spec(abcd(), {DatasetBinning("u", {"A1", "A2", "B", "C"}),
                                  DatasetBinning("v", {"A", "A", "B", "C"})});
  const DatasetCollection c({rows({"A1", "A2", "C"}), rows({"A", "B", "A"})}, spec);
  CHECK(validate_binning(c).empty());
  CHECK_NOTHROW(require_valid(c));
  CHECK(c.total_rows() == 6);
  CHECK(c.row_bin(1, 0) == Bin{0, 1});
  CHECK(c.label_indices(1)[1] == 1);
}

}
