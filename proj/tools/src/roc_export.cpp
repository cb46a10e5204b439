#include "evoroc_cli/roc_export.hpp"

#include "evoroc/binary_io.hpp"
#include "evoroc/trainer.hpp"

namespace evoroc::cli {

RocCurve export_roc(const CnnModel& model, const Dataset& split, const std::filesystem::path& path) {
  const std::vector<double> scores = score_slices(model, split);
  RocCurve curve = roc_curve(scores, split.labels());
  write_file(path, roc_csv(curve));
  return curve;
}

}  // namespace evoroc::cli
