#include <doctest.h>

#include <random>

#include "deteval/errors.hpp"
#include "deteval/stats.hpp"
#include "support/oracles.hpp"

using namespace deteval;
using namespace deteval::stats;

namespace {

FileSample file(std::string id, Label label, FileType type = FileType::PE, bool zd = false) {
  FileSample f;
  f.file_id = std::move(id);
  f.label = label;
  f.file_type = type;
  f.zero_day = zd;
  return f;
}

DetectionOutcome hit(std::string file, double ttd, std::string tool = "t") {
  return {std::move(tool), std::move(file), Phase::PreExecution, ttd};
}

DetectionOutcome miss(std::string file, std::string tool = "t") {
  return {std::move(tool), std::move(file), Phase::Never, std::nullopt};
}

}  // namespace

TEST_CASE("confusion example tp=3 fp=1 fn=1 tn=5") {
  std::vector<FileSample> files;
  std::vector<DetectionOutcome> out;
  for (int i = 0; i < 4; ++i) files.push_back(file("m" + std::to_string(i), Label::Malicious));
  for (int i = 0; i < 6; ++i) files.push_back(file("b" + std::to_string(i), Label::Benign));
  for (int i = 0; i < 3; ++i) out.push_back(hit("m" + std::to_string(i), 1));
  out.push_back(miss("m3"));
  out.push_back(hit("b0", 1));
  for (int i = 1; i < 6; ++i) out.push_back(miss("b" + std::to_string(i)));
  const auto st = confusion_stats(out, index_files(files));
  CHECK(st.counts.tp == 3);
  CHECK(st.counts.fp == 1);
  CHECK(st.counts.fn == 1);
  CHECK(st.counts.tn == 5);
  CHECK(st.counts.total() == out.size());
  CHECK(*st.recall == doctest::Approx(0.75));
  CHECK(*st.precision == doctest::Approx(0.75));
  CHECK(*st.f1 == doctest::Approx(0.75));
}

TEST_CASE("published precision and recall give the printed F1") {
  CHECK(std::fabs(f1_score(0.99922, 0.64852) - 0.7866) <= 5e-4);
  CHECK(f1_score(0.0, 0.0) == 0.0);
}

TEST_CASE("precision is exactly one without false positives") {
  const auto files = index_files(std::vector{file("m", Label::Malicious), file("b", Label::Benign)});
  const auto st = confusion_stats(std::vector{hit("m", 2), miss("b")}, files);
  CHECK(st.precision == 1.0);
}

TEST_CASE("absent statistics") {
  const auto files = index_files(std::vector{file("b", Label::Benign)});
  const auto st = confusion_stats(std::vector{miss("b")}, files);
  CHECK_FALSE(st.recall);
  CHECK_FALSE(st.precision);
  CHECK_FALSE(st.f1);
  CHECK_THROWS_AS(confusion_stats(std::vector{miss("zz")}, files), ValidationError);
}

TEST_CASE("post-close alerts count as detections") {
  const auto files = index_files(std::vector{file("m", Label::Malicious)});
  const std::vector<DetectionOutcome> out = {{"t", "m", Phase::PostClose, 400.0}};
  CHECK(confusion_stats(out, files).counts.tp == 1);
}

TEST_CASE("lower median") {
  std::vector<FileSample> fs;
  for (int i = 0; i < 4; ++i) fs.push_back(file("m" + std::to_string(i), Label::Malicious));
  const auto files = index_files(fs);
  CHECK(median_ttd(std::vector{hit("m0", 4)}, files) == 4.0);
  CHECK_FALSE(median_ttd(std::vector{miss("m0")}, files));
  CHECK(median_ttd(std::vector{hit("m0", 7), hit("m1", 1), hit("m2", 5), hit("m3", 3)}, files) ==
        3.0);
  CHECK(median_ttd(std::vector{hit("m0", 7), hit("m1", 1), hit("m2", 5)}, files) == 5.0);
}

TEST_CASE("per-filetype rows") {
  std::vector<FileSample> fs;
  std::vector<DetectionOutcome> out;
  for (int i = 0; i < 10; ++i) {
    const auto id = "pe" + std::to_string(i);
    fs.push_back(file(id, Label::Malicious));
    out.push_back(i < 8 ? hit(id, 0) : miss(id));
  }
  fs.push_back(file("txt", Label::Benign, FileType::Text));
  out.push_back(hit("txt", 0));
  fs.push_back(file("oth", Label::Malicious, FileType::Other));
  out.push_back(hit("oth", 0));
  const std::vector<ToolOutcomes> tools = {{"t", out}};
  const auto t = per_filetype_recall(tools, index_files(fs));
  REQUIRE(t.rows.size() == 1);  // no Text malware, Other excluded
  CHECK(t.rows[0].type == FileType::PE);
  CHECK(t.rows[0].label() == "PE (10)");
  CHECK(*t.rows[0].recall[0] == doctest::Approx(0.8));

  FiletypeRow big;
  big.type = FileType::MSOffice;
  big.malware = 26930;
  CHECK(big.label() == "MS-Office (26,930)");
  big.malware = 1234567;
  CHECK(big.label() == "MS-Office (1,234,567)");
}

TEST_CASE("unique detections") {
  const auto files = index_files(std::vector{file("x", Label::Malicious), file("y", Label::Malicious),
                                             file("b", Label::Benign)});
  const std::vector<ToolOutcomes> tools = {
      {"a", {hit("x", 1, "a"), hit("y", 1, "a"), hit("b", 1, "a")}},
      {"b", {miss("x", "b"), hit("y", 1, "b"), miss("b", "b")}},
      {"c", {miss("x", "c"), miss("y", "c"), miss("b", "c")}},
  };
  const auto u = unique_detections(tools, files, malware_only());
  CHECK(u == std::vector<std::size_t>{1, 0, 0});  // benign alerts never count
}

TEST_CASE("unique detections agree with a brute-force scan") {
  std::mt19937_64 rng(17);
  for (int round = 0; round < 50; ++round) {
    const std::size_t n_tools = 5, n_files = 50;
    std::vector<FileSample> fs;
    std::vector<bool> cohort;
    for (std::size_t f = 0; f < n_files; ++f) {
      const bool mal = rng() % 4 != 0;
      const bool zd = mal && rng() % 3 == 0;
      fs.push_back(file("f" + std::to_string(f), mal ? Label::Malicious : Label::Benign,
                        FileType::PE, zd));
      cohort.push_back(mal && zd);
    }
    std::vector<std::vector<bool>> matrix(n_tools, std::vector<bool>(n_files));
    std::vector<ToolOutcomes> tools(n_tools);
    for (std::size_t t = 0; t < n_tools; ++t) {
      tools[t].tool_id = "t" + std::to_string(t);
      for (std::size_t f = 0; f < n_files; ++f) {
        matrix[t][f] = rng() % 5 == 0;
        tools[t].outcomes.push_back(matrix[t][f] ? hit(fs[f].file_id, 1, tools[t].tool_id)
                                                 : miss(fs[f].file_id, tools[t].tool_id));
      }
    }
    const auto files = index_files(fs);
    CHECK(unique_detections(tools, files, zero_day_pe()) == oracle::unique_by_scan(matrix, cohort));
    const auto zdt = zero_day_comparison(tools, files);
    std::vector<bool> pub;
    for (const auto& f : fs) pub.push_back(f.malicious() && !f.zero_day);
    const auto want = oracle::unique_by_scan(matrix, pub);
    for (std::size_t t = 0; t < n_tools; ++t) CHECK(zdt.public_pe[t].unique == want[t]);
  }
}

TEST_CASE("cohort additivity over file types") {
  std::mt19937_64 rng(5);
  std::vector<FileSample> fs;
  std::vector<DetectionOutcome> out;
  for (int i = 0; i < 2000; ++i) {
    const auto type = kAllFileTypes[rng() % kAllFileTypes.size()];
    const auto id = "f" + std::to_string(i);
    fs.push_back(file(id, rng() % 2 ? Label::Malicious : Label::Benign, type));
    out.push_back(rng() % 3 ? hit(id, static_cast<double>(rng() % 100)) : miss(id));
  }
  const auto files = index_files(fs);
  const auto all = confusion_stats(out, files);
  ConfusionCounts sum;
  for (auto t : kAllFileTypes) {
    const auto c = confusion_stats(out, files, of_type(t)).counts;
    sum.tp += c.tp;
    sum.fp += c.fp;
    sum.tn += c.tn;
    sum.fn += c.fn;
  }
  CHECK(sum.tp == all.counts.tp);
  CHECK(sum.fp == all.counts.fp);
  CHECK(sum.tn == all.counts.tn);
  CHECK(sum.fn == all.counts.fn);
  CHECK(*all.recall >= 0.0);
  CHECK(*all.recall <= 1.0);
  CHECK(*all.f1 > 0.0);
}

TEST_CASE("compute_stats over scores") {
  std::vector<FileSample> fs = {file("m", Label::Malicious), file("z", Label::Malicious, FileType::PE, true),
                                file("b", Label::Benign)};
  cost::ToolScore s;
  s.tool_id = "t";
  s.aborted = 2;
  for (const auto& [id, o] : {std::pair{"m", hit("m", 9)}, {"z", miss("z")}, {"b", hit("b", 1)}}) {
    cost::FileScore fsc;
    fsc.file_id = id;
    fsc.outcome = o;
    s.files.push_back(fsc);
  }
  const std::vector<cost::ToolScore> scores = {s};
  const auto b = compute_stats(scores, index_files(fs));
  REQUIRE(b.tools.size() == 1);
  CHECK(b.tools[0].aborted == 2);
  CHECK(b.tools[0].median_ttd == 9.0);  // the benign alert is not a detection time
  CHECK(*b.tools[0].overall.recall == doctest::Approx(0.5));
  CHECK(b.zero_day.zero_day[0].recall == 0.0);
  CHECK(b.zero_day.public_pe[0].recall == 1.0);
  CHECK(b.zero_day.public_pe[0].unique == 1);
  CHECK(b.filetypes.rows.size() == 1);
  CHECK(b.filetypes.rows[0].malware == 2);
}
