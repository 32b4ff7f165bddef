#include "rci/table.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "rci/errors.hpp"
#include "rci/random.hpp"

namespace rci {

using nlohmann::json;

Table::Table(std::string id, std::vector<std::string> header,
             std::vector<std::vector<std::string>> rows)
    : id_(std::move(id)), header_(std::move(header)), rows_(std::move(rows)) {
  if (header_.empty()) {
    throw ValidationError("table '" + id_ + "': header must have at least one column", "header");
  }
  if (rows_.empty()) {
    throw ValidationError("table '" + id_ + "': table must have at least one row", "rows");
  }
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (rows_[i].size() != header_.size()) {
      throw ValidationError("table '" + id_ + "': row " + std::to_string(i + 1) +
                                " has " + std::to_string(rows_[i].size()) +
                                " cells, expected " + std::to_string(header_.size()),
                            "rows");
    }
  }
}

const std::string& Table::header_at(int col) const {
  if (col < 1 || col > num_cols()) {
    throw std::out_of_range("column index " + std::to_string(col) + " out of [1, " +
                            std::to_string(num_cols()) + "]");
  }
  return header_[col - 1];
}

const std::string& Table::cell(int row, int col) const {
  if (!contains({row, col})) {
    throw std::out_of_range("cell (" + std::to_string(row) + "," + std::to_string(col) +
                            ") outside " + std::to_string(num_rows()) + "x" +
                            std::to_string(num_cols()) + " table");
  }
  return rows_[row - 1][col - 1];
}

namespace {

constexpr std::string_view kAggNames[kNumAggTypes] = {"lookup", "max", "min",
                                                      "count", "sum", "average"};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Calls fn(line_number, line) for every non-blank line.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") != std::string_view::npos) fn(line_no, line);
    pos = end + 1;
  }
}

std::vector<std::string> string_array(const json& j, const char* field,
                                      std::size_t line) {
  if (!j.is_array()) throw ParseError(line, std::string("'") + field + "' must be an array");
  std::vector<std::string> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_string()) {
      throw ParseError(line, std::string("'") + field + "' must contain only strings");
    }
    out.push_back(v.get<std::string>());
  }
  return out;
}

const json& require(const json& rec, const char* field, std::size_t line) {
  auto it = rec.find(field);
  if (it == rec.end()) throw ParseError(line, std::string("missing field '") + field + "'");
  return *it;
}

json parse_record(std::string_view line, std::size_t line_no) {
  json rec;
  try {
    rec = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(line_no, std::string("malformed record: ") + e.what());
  }
  if (!rec.is_object()) throw ParseError(line_no, "record must be an object");
  return rec;
}

// RFC 4180 records; quoted fields may contain separators, quotes and newlines.
std::vector<std::vector<std::string>> parse_csv_records(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started || !field.empty()) {
          throw ParseError(line, "unexpected quote inside unquoted field");
        }
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        ++line;
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) throw ParseError(line, "unterminated quoted field");
  if (field_started || !record.empty()) end_record();
  return records;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n\f\v");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n\f\v");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::string_view agg_name(AggType t) { return kAggNames[static_cast<int>(t)]; }

AggType parse_agg(std::string_view name) {
  for (int i = 0; i < kNumAggTypes; ++i) {
    if (kAggNames[i] == name) return static_cast<AggType>(i);
  }
  throw ValidationError("unknown aggregation label '" + std::string(name) + "'", "agg");
}

std::vector<Table> parse_tables_jsonl(std::string_view text) {
  std::vector<Table> tables;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    const json rec = parse_record(line, line_no);
    const json& id = require(rec, "id", line_no);
    if (!id.is_string()) throw ParseError(line_no, "'id' must be a string");
    auto header = string_array(require(rec, "header", line_no), "header", line_no);
    const json& rows_json = require(rec, "rows", line_no);
    if (!rows_json.is_array()) throw ParseError(line_no, "'rows' must be an array");
    std::vector<std::vector<std::string>> rows;
    rows.reserve(rows_json.size());
    for (const auto& r : rows_json) rows.push_back(string_array(r, "rows", line_no));
    tables.emplace_back(id.get<std::string>(), std::move(header), std::move(rows));
  });
  return tables;
}

Table parse_table_csv(std::string_view text, std::string id) {
  auto records = parse_csv_records(text);
  if (records.empty()) throw ValidationError("table '" + id + "': csv has no header", "header");
  std::vector<std::string> header = std::move(records.front());
  records.erase(records.begin());
  return Table(std::move(id), std::move(header), std::move(records));
}

std::vector<Table> parse_table_file(const std::filesystem::path& path, TableFormat format) {
  const std::string text = read_file(path);
  if (format == TableFormat::kJsonl) return parse_tables_jsonl(text);
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return {};
  std::vector<Table> out;
  out.push_back(parse_table_csv(text, path.stem().string()));
  return out;
}

std::vector<QAInstance> parse_questions_jsonl(std::string_view text) {
  std::vector<QAInstance> out;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    const json rec = parse_record(line, line_no);
    QAInstance q;
    auto str_field = [&](const char* name) {
      const json& v = require(rec, name, line_no);
      if (!v.is_string()) throw ParseError(line_no, std::string("'") + name + "' must be a string");
      return v.get<std::string>();
    };
    q.qid = str_field("qid");
    q.table_id = str_field("table_id");
    q.question = str_field("question");
    q.answers = string_array(require(rec, "answers", line_no), "answers", line_no);
    if (q.answers.empty()) throw ParseError(line_no, "'answers' must be non-empty");
    if (auto it = rec.find("agg"); it != rec.end() && !it->is_null()) {
      if (!it->is_string()) throw ParseError(line_no, "'agg' must be a string");
      try {
        q.agg = parse_agg(it->get<std::string>());
      } catch (const ValidationError& e) {
        throw ParseError(line_no, e.what());
      }
    }
    if (auto it = rec.find("targets"); it != rec.end() && !it->is_null()) {
      if (!it->is_array()) throw ParseError(line_no, "'targets' must be an array");
      std::set<CellCoord> targets;
      for (const auto& p : *it) {
        if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() ||
            !p[1].is_number_integer()) {
          throw ParseError(line_no, "'targets' entries must be [row, col] integer pairs");
        }
        targets.insert({p[0].get<int>(), p[1].get<int>()});
      }
      q.targets = std::move(targets);
    }
    out.push_back(std::move(q));
  });
  return out;
}

std::vector<QAInstance> parse_questions_file(const std::filesystem::path& path) {
  return parse_questions_jsonl(read_file(path));
}

std::string table_to_jsonl(const Table& t) {
  json j = {{"id", t.id()}, {"header", t.header()}, {"rows", t.rows()}};
  return j.dump();
}

std::string question_to_jsonl(const QAInstance& q) {
  json j = {{"qid", q.qid},
            {"table_id", q.table_id},
            {"question", q.question},
            {"answers", q.answers}};
  if (q.agg) j["agg"] = std::string(agg_name(*q.agg));
  if (q.targets) {
    json t = json::array();
    for (const auto& c : *q.targets) t.push_back({c.row, c.col});
    j["targets"] = std::move(t);
  }
  return j.dump();
}

void validate_instance(const QAInstance& q, const Table& t) {
  if (q.table_id != t.id()) {
    throw ValidationError("question " + q.qid + " references table '" + q.table_id +
                              "', got '" + t.id() + "'",
                          "table_id");
  }
  if (!q.targets) return;
  for (const auto& c : *q.targets) {
    if (!t.contains(c)) {
      throw ValidationError("question " + q.qid + ": target (" + std::to_string(c.row) + "," +
                                std::to_string(c.col) + ") outside table '" + t.id() + "'",
                            "targets");
    }
  }
}

std::string normalize_answer(std::string_view text, const MatchOptions& opts) {
  std::string s = opts.trim ? trim(text) : std::string(text);
  if (opts.case_fold) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  }
  return s;
}

std::set<CellCoord> weak_supervise(const std::vector<std::string>& answers,
                                   const Table& table, const MatchOptions& opts) {
  if (answers.empty()) throw ValidationError("answers must be non-empty", "answers");
  std::set<std::string> wanted;
  for (const auto& a : answers) wanted.insert(normalize_answer(a, opts));
  std::set<CellCoord> out;
  for (int i = 1; i <= table.num_rows(); ++i) {
    for (int j = 1; j <= table.num_cols(); ++j) {
      if (wanted.count(normalize_answer(table.cell(i, j), opts))) out.insert({i, j});
    }
  }
  return out;
}

RowColTargets derive_targets(const std::set<CellCoord>& targets) {
  if (targets.empty()) {
    throw ValidationError("target set is empty; filter unanswerable instances first", "targets");
  }
  RowColTargets out;
  for (const auto& c : targets) {
    out.rows.insert(c.row);
    out.cols.insert(c.col);
  }
  return out;
}

Table downsample_rows(const Table& table, const std::set<int>& keep, int max_rows,
                      std::uint64_t seed, std::vector<int>* kept_rows) {
  if (max_rows < 1) throw ValidationError("max_rows must be positive", "max_rows");
  if (static_cast<int>(keep.size()) > max_rows) {
    throw ValidationError(std::to_string(keep.size()) + " rows to keep exceed max_rows " +
                              std::to_string(max_rows),
                          "keep");
  }
  const int m = table.num_rows();
  for (int r : keep) {
    if (r < 1 || r > m) {
      throw ValidationError("keep row " + std::to_string(r) + " outside [1, " +
                                std::to_string(m) + "]",
                            "keep");
    }
  }
  std::vector<int> chosen;
  if (m <= max_rows) {
    for (int i = 1; i <= m; ++i) chosen.push_back(i);
  } else {
    std::vector<int> others;
    for (int i = 1; i <= m; ++i) {
      if (!keep.count(i)) others.push_back(i);
    }
    Rng rng(seed);
    // Partial Fisher-Yates: the first `need` slots are a uniform sample.
    const std::size_t need = static_cast<std::size_t>(max_rows) - keep.size();
    for (std::size_t i = 0; i < need; ++i) {
      std::swap(others[i], others[i + uniform_index(rng, others.size() - i)]);
    }
    chosen.assign(keep.begin(), keep.end());
    chosen.insert(chosen.end(), others.begin(), others.begin() + need);
    std::sort(chosen.begin(), chosen.end());
  }
  std::vector<std::vector<std::string>> rows;
  rows.reserve(chosen.size());
  for (int i : chosen) rows.push_back(table.rows()[i - 1]);
  if (kept_rows) *kept_rows = chosen;
  return Table(table.id(), table.header(), std::move(rows));
}

}  // namespace rci
