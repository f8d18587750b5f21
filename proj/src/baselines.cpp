#include "binmr/baselines.hpp"

#include <stdexcept>

#include "binmr/errors.hpp"
#include "binmr/inference.hpp"

namespace binmr {

const char* method_name(Method method) {
  switch (method) {
    case Method::ibmr_int:
      return "IBMR-int";
    case Method::ibmr_ng:
      return "IBMR-NG";
    case Method::subset:
      return "subset";
    case Method::relabel:
      return "relabel";
    case Method::ibmr_int_orc:
      return "IBMR-int-ORC";
    case Method::gl_orc:
      return "GL-ORC";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::ibmr_int, Method::ibmr_ng, Method::subset, Method::relabel, Method::ibmr_int_orc,
                   Method::gl_orc}) {
    if (name == method_name(m)) {
      return m;
    }
  }
  throw std::invalid_argument("unknown method '" + std::string(name) +
                              "' (expected IBMR-int, IBMR-NG, subset, relabel, IBMR-int-ORC or GL-ORC)");
}

bool is_oracle(Method method) { return method == Method::ibmr_int_orc || method == Method::gl_orc; }

namespace {

std::vector<std::string> dataset_ids(const BinningSpec& spec) {
  std::vector<std::string> ids;
  for (const auto& d : spec.datasets()) {
    ids.push_back(d.id());
  }
  return ids;
}

DatasetCollection with_covariates(const DatasetCollection& collection, bool ones) {
  std::vector<AnnotatedDataset> datasets = collection.datasets();
  for (auto& d : datasets) {
    const auto n = static_cast<Eigen::Index>(d.rows());
    d.Z = ones ? Matrix::Ones(n, 1) : Matrix(n, 0);
  }
  return DatasetCollection(std::move(datasets), collection.binning());
}

}  // namespace

DatasetCollection make_ibmr_int(const DatasetCollection& collection) { return with_covariates(collection, true); }

DatasetCollection make_ibmr_ng(const DatasetCollection& collection) { return with_covariates(collection, false); }

std::vector<std::size_t> fine_row_counts(const DatasetCollection& collection) {
  std::vector<std::size_t> counts(collection.num_datasets(), 0);
  for (std::size_t k = 0; k < collection.num_datasets(); ++k) {
    for (std::size_t i = 0; i < collection.dataset(k).rows(); ++i) {
      if (collection.row_bin(k, i).size() == 1) {
        ++counts[k];
      }
    }
  }
  return counts;
}

DatasetCollection make_subset(const DatasetCollection& collection) {
  const CategorySet& fine = collection.binning().fine();
  std::vector<bool> retained(fine.size(), false);
  std::vector<AnnotatedDataset> datasets;
  datasets.reserve(collection.num_datasets());
  for (std::size_t k = 0; k < collection.num_datasets(); ++k) {
    const auto& src = collection.dataset(k);
    std::vector<Eigen::Index> rows;
    AnnotatedDataset d;
    for (std::size_t i = 0; i < src.rows(); ++i) {
      const Bin& bin = collection.row_bin(k, i);
      if (bin.size() == 1) {
        rows.push_back(static_cast<Eigen::Index>(i));
        d.y.push_back(fine.name(bin.front()));
        retained[bin.front()] = true;
      }
    }
    d.X = src.X(rows, Eigen::all);
    d.Z = Matrix(static_cast<Eigen::Index>(rows.size()), 0);
    datasets.push_back(std::move(d));
  }
  for (std::size_t l = 0; l < fine.size(); ++l) {
    if (!retained[l]) {
      throw CoverageError("subset: category '" + fine.name(l) +
                          "' has no fine-resolution observations, so its coefficients cannot be estimated");
    }
  }
  return DatasetCollection(std::move(datasets), BinningSpec::all_fine(fine, dataset_ids(collection.binning())));
}

DatasetCollection make_relabel(const DatasetCollection& collection, const Coefficients& subset_fit) {
  const BinningSpec& spec = collection.binning();
  std::vector<AnnotatedDataset> datasets;
  datasets.reserve(collection.num_datasets());
  for (std::size_t k = 0; k < collection.num_datasets(); ++k) {
    const auto& src = collection.dataset(k);
    AnnotatedDataset d;
    d.X = src.X;
    d.Z = Matrix(static_cast<Eigen::Index>(src.rows()), 0);
    d.y = predict_conditional(subset_fit, src.X, src.y, spec, k).labels;
    datasets.push_back(std::move(d));
  }
  return DatasetCollection(std::move(datasets), BinningSpec::all_fine(spec.fine(), dataset_ids(spec)));
}

DatasetCollection make_oracle(const DatasetCollection& collection,
                              const std::vector<std::vector<std::string>>& fine_labels, Method variant) {
  if (!is_oracle(variant)) {
    throw std::invalid_argument(std::string("make_oracle: ") + method_name(variant) + " is not an oracle method");
  }
  if (fine_labels.size() != collection.num_datasets()) {
    throw DataError("oracle: " + std::to_string(fine_labels.size()) + " label lists for " +
                    std::to_string(collection.num_datasets()) + " datasets");
  }
  const BinningSpec& spec = collection.binning();
  std::vector<AnnotatedDataset> datasets = collection.datasets();
  for (std::size_t k = 0; k < datasets.size(); ++k) {
    if (fine_labels[k].size() != datasets[k].rows()) {
      throw DataError("oracle: dataset '" + spec.dataset(k).id() + "' has " + std::to_string(datasets[k].rows()) +
                      " rows but " + std::to_string(fine_labels[k].size()) + " true labels");
    }
    datasets[k].y = fine_labels[k];
    const auto n = static_cast<Eigen::Index>(datasets[k].rows());
    datasets[k].Z = variant == Method::ibmr_int_orc ? Matrix::Ones(n, 1) : Matrix(n, 0);
  }
  return DatasetCollection(std::move(datasets), BinningSpec::all_fine(spec.fine(), dataset_ids(spec)));
}

namespace {

struct Stage {
  PathResult path;
  double lambda_max = 0.0;
};

Stage run_stage(const DatasetCollection& train, const DatasetCollection& validation, const MethodFitOptions& options) {
  Stage stage;
  const TuningGrid grid =
      build_grid(train, options.n_lambda, options.lambda_min_ratio, options.rhos, options.path.solver);
  stage.lambda_max = grid.lambdas.front();
  stage.path = fit_path(train, validation, grid, options.path);
  return stage;
}

}  // namespace

MethodFit fit_method(Method method, const DatasetCollection& train, const DatasetCollection& validation,
                     const MethodFitOptions& options, const OracleLabels* oracle) {
  MethodFit result;
  result.method = method;
  Stage stage;
  switch (method) {
    case Method::ibmr_int:
      stage = run_stage(make_ibmr_int(train), validation, options);
      break;
    case Method::ibmr_ng:
      stage = run_stage(make_ibmr_ng(train), validation, options);
      break;
    case Method::subset:
      stage = run_stage(make_subset(train), validation, options);
      break;
    case Method::relabel: {
      Stage first = run_stage(make_subset(train), validation, options);
      const Coefficients subset_fit = first.path.best().fit->coeffs;
      result.first_stage = std::move(first.path);
      stage = run_stage(make_relabel(train, subset_fit), validation, options);
      break;
    }
    case Method::ibmr_int_orc:
    case Method::gl_orc: {
      if (oracle == nullptr) {
        throw DataError(std::string(method_name(method)) + " needs the true fine labels (simulation only)");
      }
      const DatasetCollection oracle_validation = make_oracle(validation, oracle->validation, Method::gl_orc);
      stage = run_stage(make_oracle(train, oracle->train, method), oracle_validation, options);
      break;
    }
  }
  result.coeffs = stage.path.best().fit->coeffs;
  result.path = std::move(stage.path);
  result.lambda_max = stage.lambda_max;
  return result;
}

}  // namespace binmr
