#include "binmr/benchmark.hpp"

#include <charconv>
#include <cmath>
#include <exception>
#include <istream>
#include <map>
#include <optional>
#include <stdexcept>
#include <ostream>

#include "binmr/errors.hpp"
#include "binmr/inference.hpp"
#include "binmr/io.hpp"

namespace binmr {

std::vector<Scenario> read_scenarios(std::istream& in, const std::string& source) {
  const Table t = read_table(in, source);
  const std::size_t cN = t.column("N");
  const std::size_t cp = t.column("p");
  const std::size_t cs = t.column("s");
  const std::size_t cb = t.column("b");
  std::optional<std::size_t> ct;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (t.header[c] == "test_n") {
      ct = c;
    }
  }
  auto count = [&](const std::string& cell, std::size_t line) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
      throw ParseError(source, line, "invalid count '" + cell + "'");
    }
    return v;
  };
  std::vector<Scenario> out;
  std::size_t line = 1;
  for (const auto& row : t.rows) {
    ++line;
    Scenario s;
    s.config.N = count(row[cN], line);
    s.config.p = count(row[cp], line);
    s.config.s = count(row[cs], line);
    s.config.b = parse_double(row[cb], source, line);
    if (ct) {
      s.config.test_n = count(row[*ct], line);
    }
    try {
      s.config.validate();
    } catch (const std::invalid_argument& e) {
      throw ParseError(source, line, e.what());
    }
    out.push_back(s);
  }
  return out;
}

ReplicateMetrics evaluate_on_test(const Coefficients& coeffs, const SimData& data) {
  ReplicateMetrics m;
  const PredictionSet pred = predict_fine(coeffs, data.test.X, sim_categories());
  m.kl = kl_divergence(data.truth.test_probs, pred.probs);
  m.hellinger = hellinger_distance(data.truth.test_probs, pred.probs);
  m.error_rate = error_rate(pred, data.test.y);
  m.active_rows = coeffs.active_rows().size();
  return m;
}

std::vector<ReplicateMetrics> run_benchmark(const std::vector<Scenario>& scenarios, const BenchmarkOptions& options) {
  std::vector<ReplicateMetrics> rows;
  for (std::size_t sc = 0; sc < scenarios.size(); ++sc) {
    for (std::size_t r = 0; r < options.replicates; ++r) {
      SimConfig config = scenarios[sc].config;
      config.seed = options.first_seed + r;
      const SimData data = simulate(config);
      const OracleLabels oracle{data.truth.train_fine_labels, data.truth.validation_fine_labels};
      for (Method method : options.methods) {
        ReplicateMetrics m;
        try {
          const MethodFit fit = fit_method(method, data.train, data.validation, options.fit, &oracle);
          m = evaluate_on_test(fit.coeffs, data);
          m.lambda = fit.path.best().lambda;
          m.rho = fit.path.best().rho;
        } catch (const std::exception& e) {
          m.failed = true;
          m.error = e.what();
        }
        m.scenario = sc;
        m.method = method;
        m.replicate = r;
        m.seed = config.seed;
        if (options.log) {
          *options.log << "scenario " << sc + 1 << " replicate " << r + 1 << " " << method_name(method);
          if (m.failed) {
            *options.log << " FAILED: " << m.error << '\n';
          } else {
            *options.log << " kl=" << m.kl << " hellinger=" << m.hellinger << " error=" << m.error_rate << '\n';
          }
        }
        rows.push_back(std::move(m));
      }
    }
  }
  return rows;
}

namespace {

void scenario_cells(std::ostream& out, const SimConfig& c) {
  out << c.N << '\t' << c.p << '\t' << c.s << '\t' << format_double(c.b);
}

}  // namespace

void write_replicates(std::ostream& out, const std::vector<Scenario>& scenarios,
                      const std::vector<ReplicateMetrics>& rows) {
  out << "N\tp\ts\tb\tmethod\treplicate\tseed\tkl\thellinger\terror_rate\tlambda\trho\tactive_rows\tstatus\n";
  for (const auto& m : rows) {
    scenario_cells(out, scenarios.at(m.scenario).config);
    out << '\t' << method_name(m.method) << '\t' << m.replicate + 1 << '\t' << m.seed << '\t';
    if (m.failed) {
      out << "NA\tNA\tNA\tNA\tNA\tNA\tfailed: " << m.error << '\n';
    } else {
      out << format_double(m.kl) << '\t' << format_double(m.hellinger) << '\t' << format_double(m.error_rate) << '\t'
          << format_double(m.lambda) << '\t' << format_double(m.rho) << '\t' << m.active_rows << "\tok\n";
    }
  }
}

void write_summary(std::ostream& out, const std::vector<Scenario>& scenarios, const std::vector<ReplicateMetrics>& rows) {
  struct Acc {
    std::vector<double> kl, hellinger, error;
    std::size_t failures = 0;
  };
  std::map<std::pair<std::size_t, int>, Acc> groups;
  for (const auto& m : rows) {
    Acc& a = groups[{m.scenario, static_cast<int>(m.method)}];
    if (m.failed) {
      ++a.failures;
      continue;
    }
    a.kl.push_back(m.kl);
    a.hellinger.push_back(m.hellinger);
    a.error.push_back(m.error_rate);
  }
  auto mean_se = [](const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    if (v.empty()) {
      return std::pair{std::nan(""), std::nan("")};
    }
    double mean = 0.0;
    for (double x : v) {
      mean += x;
    }
    mean /= n;
    double ss = 0.0;
    for (double x : v) {
      ss += (x - mean) * (x - mean);
    }
    const double se = v.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : std::nan("");
    return std::pair{mean, se};
  };
  out << "N\tp\ts\tb\tmethod\tn_ok\tkl_mean\tkl_se\thellinger_mean\thellinger_se\terror_rate_mean\terror_rate_se\t"
         "failures\n";
  for (const auto& [key, a] : groups) {
    scenario_cells(out, scenarios.at(key.first).config);
    out << '\t' << method_name(static_cast<Method>(key.second)) << '\t' << a.kl.size();
    for (const auto* v : {&a.kl, &a.hellinger, &a.error}) {
      const auto [mean, se] = mean_se(*v);
      out << '\t' << format_double(mean) << '\t' << format_double(se);
    }
    out << '\t' << a.failures << '\n';
  }
}

}  // namespace binmr
