#include <gtest/gtest.h>

#include <filesystem>

#include "evoroc/binary_io.hpp"
#include "evoroc/checkpoint.hpp"
#include "evoroc/report.hpp"

namespace evoroc {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const char* name) {
  const fs::path d = fs::temp_directory_path() / (std::string("evoroc_fmt_") + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

TEST(Checkpoint, ModelRoundTripIsBitExact) {
  const fs::path dir = scratch_dir("model");
  const CnnModel m = make_model(31);
  save_model(m, dir / "m.evom");
  const CnnModel back = load_model(dir / "m.evom");
  EXPECT_EQ(back.params(), m.params());
  EXPECT_EQ(serialize_model(back), read_file(dir / "m.evom"));
  fs::remove_all(dir);
}

TEST(Checkpoint, LayoutAndNames) {
  const std::string bytes = serialize_model(make_model(2));
  ByteReader r(bytes);
  EXPECT_EQ(r.bytes(4), "EVOM");
  EXPECT_EQ(r.u32(), 1u);
  EXPECT_EQ(r.u32(), 12u);
  EXPECT_EQ(r.u16(), 7);
  EXPECT_EQ(r.bytes(7), "conv1.w");
  EXPECT_EQ(r.u8(), 4);
  EXPECT_EQ(r.u32(), 16u);
  EXPECT_EQ(r.u32(), 6u);
  EXPECT_EQ(r.u32(), 7u);
  EXPECT_EQ(r.u32(), 7u);
  const std::vector<NamedTensor> t = deserialize_tensors(bytes);
  const char* names[] = {"conv1.w", "conv1.b", "conv2.w", "conv2.b", "conv3.w", "conv3.b",
                         "fc1.w",   "fc1.b",   "fc2.w",   "fc2.b",   "fc3.w",   "fc3.b"};
  ASSERT_EQ(t.size(), 12u);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(t[i].first, names[i]);
  EXPECT_EQ(t[10].second.shape(), (Shape{2, 64}));
}

TEST(Checkpoint, CorruptionErrors) {
  const std::string good = serialize_model(make_model(3));
  const auto code_of = [](const std::string& b) {
    try {
      deserialize_model(b);
    } catch (const Error& e) {
      return e.code();
    }
    ADD_FAILURE() << "corrupted checkpoint loaded";
    return ErrorCode::kIo;
  };
  std::string bad = good;
  bad[1] = 'X';
  EXPECT_EQ(code_of(bad), ErrorCode::kBadMagic);
  bad = good;
  bad[4] = 7;
  EXPECT_EQ(code_of(bad), ErrorCode::kVersionMismatch);
  EXPECT_EQ(code_of(good.substr(0, good.size() - 3)), ErrorCode::kTruncated);
  std::vector<NamedTensor> t = deserialize_tensors(good);
  t[3].second = Tensor({15});
  EXPECT_EQ(code_of(serialize_tensors(t)), ErrorCode::kShapeMismatch);
  t.pop_back();
  EXPECT_THROW(deserialize_model(serialize_tensors(t)), Error);
}

ComparisonReport reference_report() {
  ComparisonReport r;
  r.sgd = {0.867, 0.794, 0.707};
  r.ga = {0.877, 0.815, 0.773};
  return r;
}

TEST(Report, ImprovementLineExamples) {
  const ComparisonReport r = reference_report();
  EXPECT_NEAR(r.improvement_percent(), (0.773 - 0.707) / 0.707 * 100, 1e-12);
  EXPECT_EQ(format_percent(r.improvement_percent()), "9.3%");
  ComparisonReport same = r;
  same.ga = same.sgd;
  EXPECT_EQ(format_percent(same.improvement_percent()), "0.0%");
  ComparisonReport worse = r;
  worse.ga.test = 0.680;
  EXPECT_LT(worse.improvement_percent(), 0);
  EXPECT_EQ(format_percent(worse.improvement_percent()), "-3.8%");
  EXPECT_EQ(format_percent(-0.04), "0.0%");
  EXPECT_EQ(format_percent(0.05), "0.1%");
}

TEST(Report, TableAndCsv) {
  const ComparisonReport r = reference_report();
  const std::string table = report_table(r);
  EXPECT_NE(table.find("AUC on train set           0.867   0.877"), std::string::npos) << table;
  EXPECT_NE(table.find("AUC on validation set      0.794   0.815"), std::string::npos) << table;
  EXPECT_NE(table.find("AUC on test set            0.707   0.773"), std::string::npos) << table;
  EXPECT_NE(table.find("Relative test AUC improvement: 9.3%\n"), std::string::npos);
  EXPECT_EQ(report_csv(r),
            "metric,sgd,ga\n"
            "train_auc,0.867000,0.877000\n"
            "val_auc,0.794000,0.815000\n"
            "test_auc,0.707000,0.773000\n"
            "test_improvement_pct,9.3,\n");
}

TEST(Report, WriteBothFilesAndRejectMissingValues) {
  const fs::path dir = scratch_dir("report");
  write_report(reference_report(), dir / "report.txt");
  EXPECT_EQ(read_file(dir / "report.txt"), report_table(reference_report()));
  EXPECT_EQ(read_file(dir / "report.csv"), report_csv(reference_report()));
  EXPECT_THROW(write_report(reference_report(), dir / "report.csv"), Error);
  ComparisonReport missing = reference_report();
  missing.ga.val.reset();
  EXPECT_THROW(write_report(missing, dir / "m.txt"), Error);
  EXPECT_FALSE(fs::exists(dir / "m.txt"));
  missing = reference_report();
  missing.sgd.test.reset();
  EXPECT_THROW(missing.improvement_percent(), Error);
  fs::remove_all(dir);
}

TEST(Io, MissingFileIsAnIoError) {
  try {
    read_file("/nonexistent/evoroc/file");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
  }
}

}  // namespace
}  // namespace evoroc
