#pragma once

#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "motorid/greybox.hpp"
#include "motorid/linear_model.hpp"
#include "motorid/sindy.hpp"

namespace motorid {

// Goodness of fit in percent: 100 * (1 - ||y - yhat|| / ||y - ybar||).
// 100 means exact, 0 means no better than the mean, negative means worse.
// Throws IllPosedFitError when the reference is constant.
double fit_percentage(const std::vector<double>& y, const std::vector<double>& y_hat);
double fit_percentage(const TimeSeries& y, const TimeSeries& y_hat);

double rmse(const std::vector<double>& y, const std::vector<double>& y_hat);

// Pearson correlation over the samples the mask admits (all of them when the
// mask is empty). Needs at least 3 masked samples, both sides non-constant.
using SampleMask = std::function<bool(std::size_t)>;
double pearson(const TimeSeries& a, const TimeSeries& b, const SampleMask& mask = {});

struct FitReport {
    // Per-state fit percentages; -inf marks a diverged free run, NaN a state
    // whose reference series is constant on this dataset.
    double fit_x = 0.0;
    double fit_xdot = 0.0;
    double fit_z = 0.0;
    double fit_i = 0.0;
    double rmse_x = 0.0;
    double rmse_xdot = 0.0;
    double rmse_z = 0.0;
    double rmse_i = 0.0;
    std::string model_id;
    std::string dataset_id;
};

using ModelChoice = std::variant<LinearModel, LuGreModel, SindycModel>;

// Free-run evaluation: simulate the chosen model from x0 under the recorded
// input and score each state against the dataset, with no re-synchronization
// along the way. substeps = 0 picks a stability-safe count per model.
FitReport evaluate_model(const ModelChoice& model, const Dataset& ds,
                         const MotorState& x0, int substeps = 0);

// CSV export of a report grid: one row per report,
// "model,dataset,fit_x,fit_xdot,fit_z,fit_i,rmse_x,rmse_xdot,rmse_z,rmse_i".
void write_fit_reports_csv(const std::vector<FitReport>& reports, const std::string& path);

} // namespace motorid
