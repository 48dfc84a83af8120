#pragma once

// Linear SVM, L2-regularized hinge loss, trained by dual coordinate descent.
//
// Features are standardized with the training mean / population sd, then a
// constant 1 is appended so the bias is learned (and regularized) like any
// other weight. The solver minimizes
//   1/2 |w|^2 + C sum_i max(0, 1 - y_i w.z_i)
// through its dual  min 1/2 a'Qa - sum a,  0 <= a_i <= C,  Q_ij = y_i y_j z_i.z_j,
// updating one coordinate at a time in a seeded random order, with
// shrinking of variables stuck at a bound.

#include <cstdint>
#include <span>
#include <vector>

#include "eegrf/dataio.hpp"

namespace eegrf {

struct SvmOptions {
  double c = 1.0;
  double tolerance = 1e-4;  // on the maximal projected-gradient violation
  int max_epochs = 10000;
  std::uint64_t seed = 0;   // coordinate order
  bool shrinking = true;
};

struct SvmModel {
  std::vector<double> weights;  // n_dims + 1, the last entry is the bias
  double c_param = 1.0;
  std::vector<double> scaler_mean;
  std::vector<double> scaler_sd;
  int n_iterations_run = 0;
  double dual_gap = 0.0;        // primal - dual objective at exit
  bool converged = false;

  std::size_t n_dims() const { return scaler_mean.size(); }
  double bias() const { return weights.back(); }
};

// Optional per-epoch diagnostics of a fit.
struct SvmFitTrace {
  std::vector<double> primal;  // primal objective after each epoch
  std::vector<double> dual;    // dual objective (1/2 a'Qa - sum a) after each epoch
  std::vector<double> alphas;  // final dual coefficients
};

// labels are +1 / -1, one per row. Throws TrainingError when only one class
// is present, DataError on non-finite input, PreconditionError on shape
// mismatch. Reaching max_epochs is not an error: converged is false.
SvmModel fit_svm(const Matrix& x, std::span<const int> labels, const SvmOptions& options = {},
                 SvmFitTrace* trace = nullptr);

// w . standardize(x_i) + b for every row.
std::vector<double> decision_scores(const SvmModel& model, const Matrix& x);
double decision_score(const SvmModel& model, std::span<const float> row);

// 1/2 |w|^2 + C sum hinge, evaluated in the model's standardized space.
double primal_objective(const SvmModel& model, const Matrix& x, std::span<const int> labels);

nlohmann::json to_json(const SvmModel& model);
SvmModel svm_model_from_json(const nlohmann::json& j);

// Leave-one-query-out scoring: for each session, train on all the others and
// score its rows. Requires exactly three labeled sessions.
std::vector<std::vector<double>> cross_query_scores(std::span<const LabeledFeatures> sessions,
                                                    const SvmOptions& options = {});

}  // namespace eegrf
