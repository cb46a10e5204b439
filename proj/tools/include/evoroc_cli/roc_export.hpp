#pragma once

#include <filesystem>

#include "evoroc/data.hpp"
#include "evoroc/metrics.hpp"
#include "evoroc/model.hpp"

namespace evoroc::cli {

// Scores `split` with `model` in eval mode and writes its ROC curve as CSV.
RocCurve export_roc(const CnnModel& model, const Dataset& split, const std::filesystem::path& path);

}  // namespace evoroc::cli
