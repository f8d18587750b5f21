#ifndef BINMR_TESTS_SUPPORT_HPP
#define BINMR_TESTS_SUPPORT_HPP

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "binmr/label_binning.hpp"
#include "binmr/likelihood.hpp"

namespace binmr::testing {

struct InstanceShape {
  std::size_t K = 3;
  std::size_t n = 40;  // rows per dataset
  std::size_t p = 6;
  std::size_t C = 4;
  std::size_t r = 1;
  bool coarse = true;  // datasets after the first merge random groups of categories
};

inline Matrix gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double sd = 1.0) {
  std::normal_distribution<double> z(0.0, sd);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      m(i, j) = z(rng);
    }
  }
  return m;
}

inline CategorySet numbered_categories(std::size_t C) {
  std::vector<std::string> names;
  for (std::size_t l = 0; l < C; ++l) {
    names.push_back("c" + std::to_string(l));
  }
  return CategorySet(names);
}

// Dataset 0 is always all-fine so every category is observed at finest resolution.
inline BinningSpec random_binning(std::mt19937_64& rng, const InstanceShape& s) {
  const CategorySet fine = numbered_categories(s.C);
  std::vector<DatasetBinning> datasets;
  for (std::size_t k = 0; k < s.K; ++k) {
    std::vector<std::string> labels = fine.names();
    if (s.coarse && k > 0) {
      std::uniform_int_distribution<std::size_t> pick(0, s.C - 1);
      const std::size_t groups = 1 + pick(rng) % std::max<std::size_t>(1, s.C - 1);
      for (std::size_t l = 0; l < s.C; ++l) {
        const std::size_t g = pick(rng) % (groups + 1);
        if (g > 0) {
          labels[l] = "bin" + std::to_string(g);
        }
      }
    }
    datasets.emplace_back("d" + std::to_string(k), labels);
  }
  return BinningSpec(fine, datasets);
}

inline DatasetCollection random_collection(std::mt19937_64& rng, const InstanceShape& s) {
  BinningSpec spec = random_binning(rng, s);
  std::uniform_int_distribution<std::size_t> cat(0, s.C - 1);
  std::vector<AnnotatedDataset> datasets;
  for (std::size_t k = 0; k < s.K; ++k) {
    AnnotatedDataset d;
    d.X = gaussian(rng, static_cast<Eigen::Index>(s.n), static_cast<Eigen::Index>(s.p));
    d.Z = gaussian(rng, static_cast<Eigen::Index>(s.n), static_cast<Eigen::Index>(s.r));
    const DatasetBinning& b = spec.dataset(k);
    for (std::size_t i = 0; i < s.n; ++i) {
      d.y.push_back(b.label_name(b.label_of_fine(cat(rng))));
    }
    datasets.push_back(std::move(d));
  }
  return DatasetCollection(std::move(datasets), std::move(spec));
}

inline Coefficients random_coefficients(std::mt19937_64& rng, const DatasetCollection& c, double sd = 0.5) {
  Coefficients coeffs = Coefficients::zeros_for(c);
  coeffs.alpha = gaussian(rng, coeffs.alpha.size(), 1, sd);
  coeffs.beta = gaussian(rng, coeffs.beta.rows(), coeffs.beta.cols(), sd);
  for (auto& g : coeffs.gamma) {
    g = gaussian(rng, g.rows(), g.cols(), sd);
  }
  return coeffs;
}

}  // namespace binmr::testing

#endif  // BINMR_TESTS_SUPPORT_HPP
