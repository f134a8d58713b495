#include "deteval/tables.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "deteval/csv.hpp"
#include "deteval/errors.hpp"
#include "deteval/report.hpp"

namespace deteval::io {

namespace {

using Row = std::vector<std::string>;

// Column positions of a CSV table after header validation.
class Header {
 public:
  Header(const Row& row, std::span<const std::string_view> expected, const std::string& source) {
    std::set<std::string_view> want(expected.begin(), expected.end());
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (!want.contains(row[i])) {
        throw SchemaError(fmt::format("{}: unknown column '{}'", source, row[i]));
      }
      if (!index_.emplace(row[i], i).second) {
        throw SchemaError(fmt::format("{}: column '{}' repeated", source, row[i]));
      }
    }
    for (auto name : expected) {
      if (!index_.contains(std::string(name))) {
        throw SchemaError(fmt::format("{}: missing column '{}'", source, name));
      }
    }
    width_ = row.size();
  }

  std::size_t operator[](std::string_view name) const { return index_.find(std::string(name))->second; }
  std::size_t width() const { return width_; }

 private:
  std::map<std::string, std::size_t> index_;
  std::size_t width_ = 0;
};

struct Cell {
  const std::string& text;
  const std::string& source;
  std::size_t line;
  std::size_t column;  // 1-based field number

  [[noreturn]] void fail(std::string_view what) const {
    throw ParseError(source, line, column, fmt::format("{}: '{}'", what, text));
  }

  double number() const {
    double v = 0.0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc() || p != text.data() + text.size()) fail("not a number");
    return v;
  }

  std::uint64_t unsigned_integer() const {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc() || p != text.data() + text.size()) {
      fail("not a nonnegative integer");
    }
    return v;
  }

  bool boolean() const {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    fail("not a boolean");
  }

  const std::string& nonempty() const {
    if (text.empty()) fail("empty identifier");
    return text;
  }
};

std::ifstream open_input(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoFailure(fmt::format("cannot open {}", p.string()));
  return in;
}

// Reads a CSV table, calling `on_row` with a cell accessor for each data row.
template <typename F>
std::size_t read_csv(const std::filesystem::path& path,
                     std::span<const std::string_view> columns, F&& on_row) {
  auto in = open_input(path);
  const std::string source = path.string();
  csv::Reader reader(in, source);
  Row row;
  if (!reader.next(row)) throw SchemaError(fmt::format("{}: missing header row", source));
  // tolerate a UTF-8 byte order mark
  if (!row.empty() && row[0].starts_with("\xEF\xBB\xBF")) row[0].erase(0, 3);
  const Header header(row, columns, source);
  std::size_t n = 0;
  while (reader.next(row)) {
    if (row.size() != header.width()) {
      throw ParseError(source, reader.line(), std::min(row.size(), header.width()) + 1,
                       fmt::format("expected {} fields, found {}", header.width(), row.size()));
    }
    auto cell = [&](std::string_view name) {
      const auto i = header[name];
      return Cell{row[i], source, reader.line(), i + 1};
    };
    on_row(cell);
    ++n;
  }
  return n;
}

constexpr std::string_view kFileCols[] = {"file_id", "display_name", "file_type",
                                          "label",   "zero_day",     "size_bytes"};
constexpr std::string_view kTrialCols[] = {"tool_id", "file_id", "t_download",
                                           "t_execute", "t_close", "aborted"};
constexpr std::string_view kAlertCols[] = {"tool_id", "file_id", "t_alert"};
constexpr std::string_view kAmbientCols[] = {
    "tool_id",        "duration_s",
    "mean_cpu_fraction", "mean_ram_bytes",
    "mean_hdd_read_bytes_per_s", "mean_hdd_write_bytes_per_s"};
constexpr std::string_view kResourceKeys[] = {"tool_id",   "file_id",        "t",
                                              "cpu_fraction", "ram_bytes",
                                              "hdd_read_bytes", "hdd_write_bytes"};

std::string num(double v) { return fmt::format("{}", v); }

}  // namespace

TablePaths TablePaths::in(const std::filesystem::path& dir) {
  return {dir / "files.csv", dir / "trials.csv", dir / "resources.jsonl", dir / "alerts.csv",
          dir / "ambient.csv"};
}

Dataset load_tables(const TablePaths& paths, RowCounts* counts) {
  Dataset ds;
  RowCounts rc;

  rc.files = read_csv(paths.files, kFileCols, [&](auto&& cell) {
    FileSample f;
    f.file_id = cell("file_id").nonempty();
    f.display_name = cell("display_name").text;
    const auto type_cell = cell("file_type");
    auto type = parse_file_type(type_cell.text);
    if (!type) type_cell.fail("unknown file type");
    f.file_type = *type;
    const auto label_cell = cell("label");
    auto label = parse_label(label_cell.text);
    if (!label) label_cell.fail("unknown label");
    f.label = *label;
    f.zero_day = cell("zero_day").boolean();
    f.size_bytes = cell("size_bytes").unsigned_integer();
    ds.files.push_back(std::move(f));
  });

  rc.trials = read_csv(paths.trials, kTrialCols, [&](auto&& cell) {
    TrialRecord t;
    t.tool_id = cell("tool_id").nonempty();
    t.file_id = cell("file_id").nonempty();
    t.t_download = cell("t_download").number();
    t.t_execute = cell("t_execute").number();
    t.t_close = cell("t_close").number();
    t.aborted = cell("aborted").boolean();
    ds.trials.push_back(std::move(t));
  });

  rc.alerts = read_csv(paths.alerts, kAlertCols, [&](auto&& cell) {
    AlertEvent a;
    a.tool_id = cell("tool_id").nonempty();
    a.file_id = cell("file_id").nonempty();
    a.t_alert = cell("t_alert").number();
    ds.alerts.push_back(std::move(a));
  });

  rc.ambients = read_csv(paths.ambient, kAmbientCols, [&](auto&& cell) {
    AmbientProfile a;
    a.tool_id = cell("tool_id").nonempty();
    a.duration_s = cell("duration_s").number();
    a.mean_cpu_fraction = cell("mean_cpu_fraction").number();
    a.mean_ram_bytes = cell("mean_ram_bytes").number();
    a.mean_hdd_read_bytes_per_s = cell("mean_hdd_read_bytes_per_s").number();
    a.mean_hdd_write_bytes_per_s = cell("mean_hdd_write_bytes_per_s").number();
    ds.ambients.push_back(std::move(a));
  });

  if (std::filesystem::exists(paths.resources)) {
    std::map<std::pair<std::string, std::string>, std::size_t> slot;
    for (std::size_t i = 0; i < ds.trials.size(); ++i) {
      slot.emplace(std::pair{ds.trials[i].tool_id, ds.trials[i].file_id}, i);
    }
    auto in = open_input(paths.resources);
    const std::string source = paths.resources.string();
    std::string line;
    std::size_t lineno = 0;
    ValidationReport dangling;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(source, lineno, e.byte, "malformed JSON");
      }
      if (!j.is_object()) throw ParseError(source, lineno, 1, "expected a JSON object");
      for (auto key : kResourceKeys) {
        if (!j.contains(key)) {
          throw SchemaError(fmt::format("{}:{}: missing key '{}'", source, lineno, key));
        }
      }
      for (const auto& [key, v] : j.items()) {
        if (std::find(std::begin(kResourceKeys), std::end(kResourceKeys), key) ==
            std::end(kResourceKeys)) {
          throw SchemaError(fmt::format("{}:{}: unknown key '{}'", source, lineno, key));
        }
      }
      ResourceSample s;
      std::string tool, file;
      try {
        tool = j.at("tool_id").get<std::string>();
        file = j.at("file_id").get<std::string>();
        s.t = j.at("t").get<double>();
        s.cpu_fraction = j.at("cpu_fraction").get<double>();
        s.ram_bytes = j.at("ram_bytes").get<std::uint64_t>();
        s.hdd_read_bytes = j.at("hdd_read_bytes").get<std::uint64_t>();
        s.hdd_write_bytes = j.at("hdd_write_bytes").get<std::uint64_t>();
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(source, lineno, 1, fmt::format("bad field type: {}", e.what()));
      }
      auto it = slot.find({tool, file});
      if (it == slot.end()) {
        dangling.issues.push_back(
            {IssueKind::DanglingReference,
             fmt::format("resource sample {}/{} has no trial", tool, file)});
        continue;
      }
      ds.trials[it->second].resource_series.push_back(s);
      ++rc.resource_samples;
    }
    if (!dangling.ok()) throw ValidationError(dangling.summary());
  }

  if (counts) *counts = rc;
  const auto report = validate_dataset(ds);
  if (!report.ok()) throw ValidationError(report.summary());
  return ds;
}

std::string files_csv(std::span<const FileSample> files) {
  std::string out = csv::format_row(std::vector<std::string>(std::begin(kFileCols), std::end(kFileCols)));
  for (const auto& f : files) {
    out += csv::format_row(std::vector<std::string>{
        f.file_id, f.display_name, std::string(to_string(f.file_type)),
        std::string(to_string(f.label)), f.zero_day ? "true" : "false",
        std::to_string(f.size_bytes)});
  }
  return out;
}

std::string trials_csv(std::span<const TrialRecord> trials) {
  std::string out =
      csv::format_row(std::vector<std::string>(std::begin(kTrialCols), std::end(kTrialCols)));
  for (const auto& t : trials) {
    out += csv::format_row(std::vector<std::string>{t.tool_id, t.file_id, num(t.t_download),
                                                    num(t.t_execute), num(t.t_close),
                                                    t.aborted ? "true" : "false"});
  }
  return out;
}

std::string resources_jsonl(std::span<const TrialRecord> trials) {
  std::string out;
  for (const auto& t : trials) {
    for (const auto& s : t.resource_series) {
      nlohmann::ordered_json j;
      j["tool_id"] = t.tool_id;
      j["file_id"] = t.file_id;
      j["t"] = s.t;
      j["cpu_fraction"] = s.cpu_fraction;
      j["ram_bytes"] = s.ram_bytes;
      j["hdd_read_bytes"] = s.hdd_read_bytes;
      j["hdd_write_bytes"] = s.hdd_write_bytes;
      out += j.dump();
      out += '\n';
    }
  }
  return out;
}

std::string alerts_csv(std::span<const AlertEvent> alerts) {
  std::string out =
      csv::format_row(std::vector<std::string>(std::begin(kAlertCols), std::end(kAlertCols)));
  for (const auto& a : alerts) {
    out += csv::format_row(std::vector<std::string>{a.tool_id, a.file_id, num(a.t_alert)});
  }
  return out;
}

std::string ambient_csv(std::span<const AmbientProfile> ambients) {
  std::string out = csv::format_row(
      std::vector<std::string>(std::begin(kAmbientCols), std::end(kAmbientCols)));
  for (const auto& a : ambients) {
    out += csv::format_row(std::vector<std::string>{
        a.tool_id, num(a.duration_s), num(a.mean_cpu_fraction), num(a.mean_ram_bytes),
        num(a.mean_hdd_read_bytes_per_s), num(a.mean_hdd_write_bytes_per_s)});
  }
  return out;
}

void write_tables(const Dataset& ds, const TablePaths& paths) {
  report::write_text_file(paths.files, files_csv(ds.files));
  report::write_text_file(paths.trials, trials_csv(ds.trials));
  report::write_text_file(paths.resources, resources_jsonl(ds.trials));
  report::write_text_file(paths.alerts, alerts_csv(ds.alerts));
  report::write_text_file(paths.ambient, ambient_csv(ds.ambients));
}

}  // namespace deteval::io
