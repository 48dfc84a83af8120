#include "eegrf/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "eegrf/errors.hpp"
#include "eegrf/random.hpp"

namespace eegrf {

namespace {

// Eight independent partial sums in a fixed order: vectorizes without
// -ffast-math and stays bitwise reproducible.
double dot(const double* a, const double* b, std::size_t n) {
  double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t k = 0;
  for (; k + 8 <= n; k += 8) {
    for (std::size_t j = 0; j < 8; ++j) acc[j] += a[k + j] * b[k + j];
  }
  double tail = 0.0;
  for (; k < n; ++k) tail += a[k] * b[k];
  return ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail;
}

void check_labels(std::span<const int> labels, std::size_t rows) {
  if (labels.size() != rows) {
    throw PreconditionError("svm: " + std::to_string(labels.size()) + " labels for " + std::to_string(rows) + " rows");
  }
  bool pos = false;
  bool neg = false;
  for (int y : labels) {
    if (y == 1) {
      pos = true;
    } else if (y == -1) {
      neg = true;
    } else {
      throw PreconditionError("svm: labels must be +1 or -1, got " + std::to_string(y));
    }
  }
  if (!pos || !neg) throw TrainingError("svm: training data needs at least one example of each class");
}

// Row-major standardized copy with a trailing constant-1 column.
std::vector<double> standardize(const Matrix& x, const std::vector<double>& mean, const std::vector<double>& sd) {
  const std::size_t d = x.cols;
  std::vector<double> z(x.rows * (d + 1));
  for (std::size_t i = 0; i < x.rows; ++i) {
    const auto row = x.row(i);
    double* out = z.data() + i * (d + 1);
    for (std::size_t k = 0; k < d; ++k) out[k] = (row[k] - mean[k]) / sd[k];
    out[d] = 1.0;
  }
  return z;
}

double primal_from_margins(const std::vector<double>& w, const std::vector<double>& z, std::span<const int> labels,
                           double c) {
  const std::size_t dd = w.size();
  double loss = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double m = labels[i] * dot(w.data(), z.data() + i * dd, dd);
    loss += std::max(0.0, 1.0 - m);
  }
  return 0.5 * dot(w.data(), w.data(), dd) + c * loss;
}

}  // namespace

SvmModel fit_svm(const Matrix& x, std::span<const int> labels, const SvmOptions& options, SvmFitTrace* trace) {
  check_labels(labels, x.rows);
  if (!(options.c > 0.0)) throw PreconditionError("svm: C must be positive");
  for (float v : x.data) {
    if (!std::isfinite(v)) throw DataError("svm: non-finite value in training data");
  }
  const std::size_t n = x.rows;
  const std::size_t d = x.cols;
  const std::size_t dd = d + 1;
  const double c = options.c;

  SvmModel model;
  model.c_param = c;
  model.scaler_mean.assign(d, 0.0);
  model.scaler_sd.assign(d, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = x.row(i);
    for (std::size_t k = 0; k < d; ++k) model.scaler_mean[k] += row[k];
  }
  for (double& m : model.scaler_mean) m /= static_cast<double>(n);
  std::vector<double> var(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = x.row(i);
    for (std::size_t k = 0; k < d; ++k) {
      const double dv = row[k] - model.scaler_mean[k];
      var[k] += dv * dv;
    }
  }
  for (std::size_t k = 0; k < d; ++k) {
    const double sd = std::sqrt(var[k] / static_cast<double>(n));
    model.scaler_sd[k] = sd > 1e-12 ? sd : 1.0;
  }

  const std::vector<double> z = standardize(x, model.scaler_mean, model.scaler_sd);
  std::vector<double> qd(n);
  for (std::size_t i = 0; i < n; ++i) qd[i] = dot(z.data() + i * dd, z.data() + i * dd, dd);

  std::vector<double> alpha(n, 0.0);
  std::vector<double> w(dd, 0.0);
  std::vector<std::size_t> index(n);
  std::iota(index.begin(), index.end(), 0);
  std::size_t active = n;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  double pg_max_old = kInf;
  double pg_min_old = -kInf;
  Xoshiro256 rng(options.seed);

  // With shrinking, the tolerance is tightened in stages (0.1, 0.01, ...).
  // Un-shrinking after a loose stage exposes only small violations, which
  // avoids the shrink / un-shrink cycling seen with a tight target.
  double stage_tol = options.shrinking ? std::max(options.tolerance, 0.1) : options.tolerance;
  int epoch = 0;
  while (epoch < options.max_epochs) {
    double pg_max = -kInf;
    double pg_min = kInf;
    fisher_yates_shuffle(std::span<std::size_t>(index.data(), active), rng);

    for (std::size_t s = 0; s < active; ++s) {
      const std::size_t i = index[s];
      const double* zi = z.data() + i * dd;
      const double yi = labels[i];
      const double g = yi * dot(w.data(), zi, dd) - 1.0;
      double pg = 0.0;
      if (alpha[i] == 0.0) {
        if (options.shrinking && g > pg_max_old) {
          --active;
          std::swap(index[s], index[active]);
          --s;
          continue;
        }
        if (g < 0.0) pg = g;
      } else if (alpha[i] == c) {
        if (options.shrinking && g < pg_min_old) {
          --active;
          std::swap(index[s], index[active]);
          --s;
          continue;
        }
        if (g > 0.0) pg = g;
      } else {
        pg = g;
      }
      pg_max = std::max(pg_max, pg);
      pg_min = std::min(pg_min, pg);
      if (std::abs(pg) > 1e-12) {
        const double old = alpha[i];
        alpha[i] = std::min(std::max(old - g / qd[i], 0.0), c);
        const double step = (alpha[i] - old) * yi;
        for (std::size_t k = 0; k < dd; ++k) w[k] += step * zi[k];
      }
    }
    ++epoch;

    if (trace) {
      const double half_norm = 0.5 * dot(w.data(), w.data(), dd);
      trace->primal.push_back(primal_from_margins(w, z, labels, c));
      trace->dual.push_back(half_norm - std::accumulate(alpha.begin(), alpha.end(), 0.0));
    }

    if (pg_max <= stage_tol && pg_min >= -stage_tol) {
      if (active == n) {
        if (stage_tol <= options.tolerance) {
          model.converged = true;
          break;
        }
        stage_tol = std::max(options.tolerance, stage_tol * 0.1);
        continue;
      }
      // Converged on the shrunk problem; verify on all variables.
      active = n;
      pg_max_old = kInf;
      pg_min_old = -kInf;
      continue;
    }
    pg_max_old = pg_max > 0.0 ? pg_max : kInf;
    pg_min_old = pg_min < 0.0 ? pg_min : -kInf;
  }

  model.weights = w;
  model.n_iterations_run = epoch;
  const double primal = primal_from_margins(w, z, labels, c);
  const double dual = std::accumulate(alpha.begin(), alpha.end(), 0.0) - 0.5 * dot(w.data(), w.data(), dd);
  model.dual_gap = primal - dual;
  if (trace) trace->alphas = alpha;
  return model;
}

double decision_score(const SvmModel& model, std::span<const float> row) {
  const std::size_t d = model.n_dims();
  if (row.size() != d) {
    throw PreconditionError("svm: input has " + std::to_string(row.size()) + " dims, model expects " +
                            std::to_string(d));
  }
  double acc = model.weights[d];
  for (std::size_t k = 0; k < d; ++k) acc += model.weights[k] * ((row[k] - model.scaler_mean[k]) / model.scaler_sd[k]);
  return acc;
}

std::vector<double> decision_scores(const SvmModel& model, const Matrix& x) {
  if (x.cols != model.n_dims()) {
    throw PreconditionError("svm: input has " + std::to_string(x.cols) + " dims, model expects " +
                            std::to_string(model.n_dims()));
  }
  std::vector<double> scores(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) scores[i] = decision_score(model, x.row(i));
  return scores;
}

double primal_objective(const SvmModel& model, const Matrix& x, std::span<const int> labels) {
  if (labels.size() != x.rows) throw PreconditionError("svm: label count does not match rows");
  const std::vector<double> scores = decision_scores(model, x);
  double loss = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) loss += std::max(0.0, 1.0 - labels[i] * scores[i]);
  return 0.5 * dot(model.weights.data(), model.weights.data(), model.weights.size()) + model.c_param * loss;
}

nlohmann::json to_json(const SvmModel& model) {
  return nlohmann::json{{"weights", model.weights},
                        {"c_param", model.c_param},
                        {"scaler_mean", model.scaler_mean},
                        {"scaler_sd", model.scaler_sd},
                        {"n_iterations_run", model.n_iterations_run},
                        {"dual_gap", model.dual_gap},
                        {"converged", model.converged}};
}

SvmModel svm_model_from_json(const nlohmann::json& j) {
  SvmModel m;
  try {
    m.weights = j.at("weights").get<std::vector<double>>();
    m.c_param = j.at("c_param").get<double>();
    m.scaler_mean = j.at("scaler_mean").get<std::vector<double>>();
    m.scaler_sd = j.at("scaler_sd").get<std::vector<double>>();
    m.n_iterations_run = j.value("n_iterations_run", 0);
    m.dual_gap = j.value("dual_gap", 0.0);
    m.converged = j.value("converged", false);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("svm model: ") + e.what());
  }
  if (m.scaler_sd.size() != m.scaler_mean.size() || m.weights.size() != m.scaler_mean.size() + 1) {
    throw FormatError("svm model: inconsistent vector lengths");
  }
  for (double sd : m.scaler_sd) {
    if (!(sd > 0.0)) throw FormatError("svm model: scaler_sd entries must be positive");
  }
  return m;
}

std::vector<std::vector<double>> cross_query_scores(std::span<const LabeledFeatures> sessions,
                                                    const SvmOptions& options) {
  if (sessions.size() != 3) {
    throw PreconditionError("cross_query_scores: expected 3 query sessions, got " + std::to_string(sessions.size()));
  }
  const std::size_t d = sessions.front().matrix.n_dims();
  for (const auto& s : sessions) {
    if (s.matrix.n_dims() != d) throw PreconditionError("cross_query_scores: sessions differ in feature dimension");
    if (s.is_target.size() != s.matrix.n_rows()) {
      throw PreconditionError("cross_query_scores: label count does not match rows");
    }
  }
  std::vector<std::vector<double>> scores;
  for (std::size_t held_out = 0; held_out < sessions.size(); ++held_out) {
    std::size_t rows = 0;
    for (std::size_t s = 0; s < sessions.size(); ++s) {
      if (s != held_out) rows += sessions[s].matrix.n_rows();
    }
    Matrix train(rows, d);
    std::vector<int> labels;
    labels.reserve(rows);
    std::size_t r = 0;
    for (std::size_t s = 0; s < sessions.size(); ++s) {
      if (s == held_out) continue;
      const auto& m = sessions[s].matrix.values;
      std::copy(m.data.begin(), m.data.end(), train.data.begin() + static_cast<std::ptrdiff_t>(r * d));
      r += m.rows;
      for (bool t : sessions[s].is_target) labels.push_back(t ? 1 : -1);
    }
    // Same options for every fold: identical training sets give identical models.
    const SvmModel model = fit_svm(train, labels, options);
    scores.push_back(decision_scores(model, sessions[held_out].matrix.values));
  }
  return scores;
}

}  // namespace eegrf
