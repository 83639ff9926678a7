#pragma once

#include <string>

#include "fewshot/evaluation.hpp"

namespace fewshot::cli {

/// Long-form CSV: one row per (true, predicted) cell with count and row percent.
std::string confusion_csv(const EvaluationReport& report);

/// Static heatmap of the row-percent matrix.
std::string confusion_svg(const EvaluationReport& report);

}  // namespace fewshot::cli
