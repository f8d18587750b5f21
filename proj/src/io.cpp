#include "binmr/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "binmr/errors.hpp"

namespace binmr {

std::string format_double(double value) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, end);
}

double parse_double(std::string_view cell, const std::string& source, std::size_t line) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (first != last && *first == '+') {
    ++first;
  }
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (cell.empty() || ec != std::errc() || ptr != last) {
    throw ParseError(source, line, "non-numeric cell '" + std::string(cell) + "'");
  }
  return value;
}

std::vector<std::string> split_tabs(std::string_view line) {
  if (!line.empty() && line.back() == '\r') {
    line.remove_suffix(1);
  }
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      cells.emplace_back(line.substr(start));
      break;
    }
    cells.emplace_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return cells;
}

std::size_t Table::column(std::string_view name) const {
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == name) {
      return c;
    }
  }
  throw LookupError("table has no column '" + std::string(name) + "'");
}

Table read_table(std::istream& in, const std::string& source) {
  Table t;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) {
    throw ParseError(source, 1, "missing header line");
  }
  ++line_no;
  t.header = split_tabs(line);
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") {
      continue;
    }
    auto cells = split_tabs(line);
    if (cells.size() != t.header.size()) {
      throw ParseError(source, line_no,
                       "expected " + std::to_string(t.header.size()) + " cells, found " + std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

void write_table(std::ostream& out, const Table& table) {
  auto write_row = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      out << (c ? "\t" : "") << cells[c];
    }
    out << '\n';
  };
  write_row(table.header);
  for (const auto& r : table.rows) {
    write_row(r);
  }
}

std::vector<std::string> default_names(const std::string& prefix, std::size_t count) {
  std::vector<std::string> names;
  names.reserve(count);
  for (std::size_t j = 0; j < count; ++j) {
    names.push_back(prefix + std::to_string(j + 1));
  }
  return names;
}

namespace {

std::ifstream open_in(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) {
    throw DataError("cannot open '" + file.string() + "'");
  }
  return in;
}

std::ofstream open_out(const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) {
    throw DataError("cannot write '" + file.string() + "'");
  }
  return out;
}

// Numeric matrix with a header row of column names.
Matrix read_numeric(const std::filesystem::path& file, std::vector<std::string>& names) {
  auto in = open_in(file);
  const std::string source = file.string();
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError(source, 1, "missing header line");
  }
  names = split_tabs(line);
  if (names.size() == 1 && names.front().empty()) {
    names.clear();
  }
  const std::size_t cols = names.size();
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") {
      if (cols == 0) {
        ++rows;
      }
      continue;
    }
    const auto cells = split_tabs(line);
    if (cells.size() != cols) {
      throw ParseError(source, line_no,
                       "ragged row: expected " + std::to_string(cols) + " cells, found " + std::to_string(cells.size()));
    }
    for (const auto& c : cells) {
      values.push_back(parse_double(c, source, line_no));
    }
    ++rows;
  }
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows && cols > 0; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i * cols + j];
    }
  }
  return m;
}

void write_numeric(const std::filesystem::path& file, const Matrix& m, const std::vector<std::string>& names) {
  auto out = open_out(file);
  for (std::size_t j = 0; j < names.size(); ++j) {
    out << (j ? "\t" : "") << names[j];
  }
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      out << (j ? "\t" : "") << format_double(m(i, j));
    }
    out << '\n';
  }
}

}  // namespace

LoadedDataset load_dataset(const std::filesystem::path& dir) {
  LoadedDataset out;
  out.data.X = read_numeric(dir / "X.tsv", out.feature_names);
  const auto n = static_cast<std::size_t>(out.data.X.rows());

  const auto y_file = dir / "y.tsv";
  auto in = open_in(y_file);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      if (line_no <= n) {
        throw ParseError(y_file.string(), line_no, "empty label");
      }
      continue;
    }
    if (line_no > n) {
      throw ParseError(y_file.string(), line_no, "more labels than the " + std::to_string(n) + " rows of X.tsv");
    }
    out.data.y.push_back(line);
  }
  if (out.data.y.size() < n) {
    throw ParseError(y_file.string(), out.data.y.size() + 1,
                     "missing label for row " + std::to_string(out.data.y.size() + 1) + " of X.tsv");
  }

  const auto z_file = dir / "Z.tsv";
  if (std::filesystem::exists(z_file)) {
    out.data.Z = read_numeric(z_file, out.covariate_names);
    out.has_covariates = true;
    if (static_cast<std::size_t>(out.data.Z.rows()) != n) {
      throw ParseError(z_file.string(), static_cast<std::size_t>(out.data.Z.rows()) + 1,
                       "Z.tsv has " + std::to_string(out.data.Z.rows()) + " rows, X.tsv has " + std::to_string(n));
    }
  } else {
    out.data.Z = Matrix(static_cast<Eigen::Index>(n), 0);
  }
  return out;
}

void save_dataset(const std::filesystem::path& dir, const AnnotatedDataset& data,
                  const std::vector<std::string>& feature_names, const std::vector<std::string>& covariate_names) {
  std::filesystem::create_directories(dir);
  const auto p = static_cast<std::size_t>(data.X.cols());
  const auto r = static_cast<std::size_t>(data.Z.cols());
  write_numeric(dir / "X.tsv", data.X, feature_names.empty() ? default_names("f", p) : feature_names);
  {
    auto out = open_out(dir / "y.tsv");
    for (const auto& label : data.y) {
      out << label << '\n';
    }
  }
  if (r > 0) {
    write_numeric(dir / "Z.tsv", data.Z, covariate_names.empty() ? default_names("z", r) : covariate_names);
  } else {
    std::filesystem::remove(dir / "Z.tsv");
  }
}

AnnotatedDataset subsample(const AnnotatedDataset& data, std::size_t n, const std::vector<double>& weights,
                           std::uint64_t seed) {
  const std::size_t rows = data.rows();
  if (!weights.empty() && weights.size() != rows) {
    throw DataError("subsample: " + std::to_string(weights.size()) + " weights for " + std::to_string(rows) + " rows");
  }
  if (n >= rows) {
    return data;
  }
  // Weighted sampling without replacement: keep the n largest keys u^(1/w).
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::pair<double, std::size_t>> keys(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw DataError("subsample: weights must be finite and nonnegative");
    }
    const double u = unif(rng);
    keys[i] = {w > 0.0 ? std::log(u) / w : -std::numeric_limits<double>::infinity(), i};
  }
  std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(n), keys.end(),
                    [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < n; ++i) {
    keep.push_back(static_cast<Eigen::Index>(keys[i].second));
  }
  std::sort(keep.begin(), keep.end());
  AnnotatedDataset out;
  out.X = data.X(keep, Eigen::all);
  out.Z = data.Z(keep, Eigen::all);
  for (auto i : keep) {
    out.y.push_back(data.y[static_cast<std::size_t>(i)]);
  }
  return out;
}

std::vector<double> read_weights(const std::filesystem::path& file) {
  auto in = open_in(file);
  std::vector<double> weights;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      continue;
    }
    weights.push_back(parse_double(line, file.string(), line_no));
  }
  return weights;
}

BinningSpec read_binning(std::istream& in, const std::string& source) {
  const Table t = read_table(in, source);
  if (t.header.size() < 3) {
    throw ParseError(source, 1, "header needs a dataset column and at least two fine categories");
  }
  std::vector<std::string> fine_names(t.header.begin() + 1, t.header.end());
  CategorySet fine;
  try {
    fine = CategorySet(fine_names);
  } catch (const std::invalid_argument& e) {
    throw ParseError(source, 1, e.what());
  }
  std::vector<DatasetBinning> datasets;
  std::size_t line_no = 1;
  for (const auto& row : t.rows) {
    ++line_no;
    if (row.front().empty()) {
      throw ParseError(source, line_no, "empty dataset id");
    }
    try {
      datasets.emplace_back(row.front(), std::vector<std::string>(row.begin() + 1, row.end()));
    } catch (const std::invalid_argument& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  if (datasets.empty()) {
    throw ParseError(source, 2, "no dataset rows");
  }
  return BinningSpec(std::move(fine), std::move(datasets));
}

BinningSpec read_binning(const std::filesystem::path& file) {
  auto in = open_in(file);
  return read_binning(in, file.string());
}

void write_binning(std::ostream& out, const BinningSpec& spec) {
  out << "dataset";
  for (const auto& name : spec.fine().names()) {
    out << '\t' << name;
  }
  out << '\n';
  for (const auto& d : spec.datasets()) {
    out << d.id();
    for (std::size_t l = 0; l < d.num_fine(); ++l) {
      out << '\t' << d.label_name(d.label_of_fine(l));
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------

void check_artifact(const ModelArtifact& a) {
  const auto c = static_cast<Eigen::Index>(a.categories.size());
  if (a.coeffs.alpha.size() != c || a.coeffs.beta.cols() != c) {
    throw DataError("model: coefficient category axis does not match " + std::to_string(c) + " categories");
  }
  if (a.feature_names.size() != static_cast<std::size_t>(a.coeffs.beta.rows())) {
    throw DataError("model: " + std::to_string(a.feature_names.size()) + " feature names for " +
                    std::to_string(a.coeffs.beta.rows()) + " beta rows");
  }
  if (a.feature_sds.size() != 0 && a.feature_sds.size() != a.coeffs.beta.rows()) {
    throw DataError("model: feature_sds length does not match beta rows");
  }
  for (const auto& g : a.coeffs.gamma) {
    if (g.cols() != c || g.rows() != a.coeffs.gamma.front().rows()) {
      throw DataError("model: inconsistent gamma dimensions");
    }
  }
}

namespace {

void write_row(std::ostream& out, const char* key, const Eigen::Ref<const Eigen::RowVectorXd>& v) {
  out << key;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out << '\t' << format_double(v(i));
  }
  out << '\n';
}

}  // namespace

void save_model(std::ostream& out, const ModelArtifact& a) {
  check_artifact(a);
  const auto& c = a.coeffs;
  out << "binmr-model\t" << a.version << '\n';
  out << "method\t" << a.method << '\n';
  out << "lambda\t" << format_double(a.lambda) << '\n';
  out << "rho\t" << format_double(a.rho) << '\n';
  out << "categories\t" << a.categories.size();
  for (const auto& n : a.categories.names()) {
    out << '\t' << n;
  }
  out << '\n';
  out << "features\t" << a.feature_names.size();
  for (const auto& n : a.feature_names) {
    out << '\t' << n;
  }
  out << '\n';
  write_row(out, "feature_sds", a.feature_sds.transpose());
  write_row(out, "alpha", c.alpha.transpose());
  out << "beta\t" << c.beta.rows() << '\t' << c.beta.cols() << '\n';
  for (Eigen::Index j = 0; j < c.beta.rows(); ++j) {
    write_row(out, "row", c.beta.row(j));
  }
  const Eigen::Index r = c.gamma.empty() ? 0 : c.gamma.front().rows();
  out << "gamma\t" << c.gamma.size() << '\t' << r << '\t' << c.alpha.size() << '\n';
  for (const auto& g : c.gamma) {
    for (Eigen::Index j = 0; j < g.rows(); ++j) {
      write_row(out, "row", g.row(j));
    }
  }
  out << "end\n";
}

void save_model(const std::filesystem::path& file, const ModelArtifact& artifact) {
  auto out = open_out(file);
  save_model(out, artifact);
  if (!out) {
    throw DataError("failed writing '" + file.string() + "'");
  }
}

namespace {

class LineReader {
 public:
  LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  std::vector<std::string> next(std::string_view expected_key) {
    std::string line;
    if (!std::getline(in_, line)) {
      throw ParseError(source_, line_ + 1, "unexpected end of file, expected '" + std::string(expected_key) + "'");
    }
    ++line_;
    auto cells = split_tabs(line);
    if (cells.front() != expected_key) {
      throw ParseError(source_, line_, "expected '" + std::string(expected_key) + "', found '" + cells.front() + "'");
    }
    return cells;
  }

  std::size_t count(const std::string& cell) const {
    std::size_t value = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
      throw ParseError(source_, line_, "invalid count '" + cell + "'");
    }
    return value;
  }

  double number(const std::string& cell) const { return parse_double(cell, source_, line_); }

  void expect_cells(const std::vector<std::string>& cells, std::size_t n) const {
    if (cells.size() != n) {
      throw ParseError(source_, line_, "expected " + std::to_string(n) + " cells, found " + std::to_string(cells.size()));
    }
  }

  Eigen::RowVectorXd numbers(std::string_view key, std::size_t n) {
    const auto cells = next(key);
    expect_cells(cells, n + 1);
    Eigen::RowVectorXd v(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      v(static_cast<Eigen::Index>(i)) = number(cells[i + 1]);
    }
    return v;
  }

  std::size_t line() const noexcept { return line_; }
  const std::string& source() const noexcept { return source_; }

 private:
  std::istream& in_;
  std::string source_;
  std::size_t line_ = 0;
};

}  // namespace

ModelArtifact load_model(std::istream& in, const std::string& source) {
  LineReader reader(in, source);
  ModelArtifact a;

  auto head = reader.next("binmr-model");
  reader.expect_cells(head, 2);
  a.version = static_cast<int>(reader.count(head[1]));
  if (a.version != kModelFormatVersion) {
    throw DataError(source + ": unsupported model format version " + head[1] + " (expected " +
                    std::to_string(kModelFormatVersion) + ")");
  }
  auto method = reader.next("method");
  reader.expect_cells(method, 2);
  a.method = method[1];
  auto lambda = reader.next("lambda");
  reader.expect_cells(lambda, 2);
  a.lambda = reader.number(lambda[1]);
  auto rho = reader.next("rho");
  reader.expect_cells(rho, 2);
  a.rho = reader.number(rho[1]);

  auto cats = reader.next("categories");
  if (cats.size() < 2) {
    throw ParseError(source, reader.line(), "missing category count");
  }
  const std::size_t c = reader.count(cats[1]);
  reader.expect_cells(cats, c + 2);
  try {
    a.categories = CategorySet(std::vector<std::string>(cats.begin() + 2, cats.end()));
  } catch (const std::invalid_argument& e) {
    throw ParseError(source, reader.line(), e.what());
  }

  auto feats = reader.next("features");
  if (feats.size() < 2) {
    throw ParseError(source, reader.line(), "missing feature count");
  }
  const std::size_t p = reader.count(feats[1]);
  reader.expect_cells(feats, p + 2);
  a.feature_names.assign(feats.begin() + 2, feats.end());

  {
    auto sds = reader.next("feature_sds");
    a.feature_sds.resize(static_cast<Eigen::Index>(sds.size() - 1));
    for (std::size_t j = 1; j < sds.size(); ++j) {
      a.feature_sds(static_cast<Eigen::Index>(j - 1)) = reader.number(sds[j]);
    }
  }
  a.coeffs.alpha = reader.numbers("alpha", c).transpose();

  auto beta_head = reader.next("beta");
  reader.expect_cells(beta_head, 3);
  if (reader.count(beta_head[1]) != p || reader.count(beta_head[2]) != c) {
    throw ParseError(source, reader.line(), "beta dimensions disagree with feature and category counts");
  }
  a.coeffs.beta.resize(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(c));
  for (std::size_t j = 0; j < p; ++j) {
    a.coeffs.beta.row(static_cast<Eigen::Index>(j)) = reader.numbers("row", c);
  }

  auto gamma_head = reader.next("gamma");
  reader.expect_cells(gamma_head, 4);
  const std::size_t K = reader.count(gamma_head[1]);
  const std::size_t r = reader.count(gamma_head[2]);
  if (reader.count(gamma_head[3]) != c) {
    throw ParseError(source, reader.line(), "gamma category count disagrees with categories");
  }
  for (std::size_t k = 0; k < K; ++k) {
    Matrix g(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (std::size_t j = 0; j < r; ++j) {
      g.row(static_cast<Eigen::Index>(j)) = reader.numbers("row", c);
    }
    a.coeffs.gamma.push_back(std::move(g));
  }
  reader.next("end");
  check_artifact(a);
  return a;
}

ModelArtifact load_model(const std::filesystem::path& file) {
  auto in = open_in(file);
  return load_model(in, file.string());
}

Vector pooled_feature_sds(const std::vector<AnnotatedDataset>& datasets) {
  if (datasets.empty()) {
    return Vector();
  }
  const Eigen::Index p = datasets.front().X.cols();
  Vector sum = Vector::Zero(p);
  Vector sq = Vector::Zero(p);
  double n = 0.0;
  for (const auto& d : datasets) {
    sum += d.X.colwise().sum().transpose();
    n += static_cast<double>(d.X.rows());
  }
  const Vector mean = n > 0.0 ? Vector(sum / n) : sum;
  for (const auto& d : datasets) {
    sq += (d.X.rowwise() - mean.transpose()).colwise().squaredNorm().transpose();
  }
  return n > 1.0 ? Vector((sq / (n - 1.0)).cwiseSqrt()) : Vector(Vector::Zero(p));
}

}  // namespace binmr
