#include "rci/dataset.hpp"

#include <fstream>

#include "rci/errors.hpp"

namespace rci {

Dataset::Dataset(std::vector<Table> tables, std::vector<QAInstance> questions)
    : tables_(std::move(tables)), questions_(std::move(questions)) {
  for (std::size_t i = 0; i < tables_.size(); ++i) {
    if (!by_id_.emplace(tables_[i].id(), i).second) {
      throw ValidationError("duplicate table id '" + tables_[i].id() + "'", "id");
    }
  }
  for (const auto& q : questions_) {
    auto it = by_id_.find(q.table_id);
    if (it == by_id_.end()) {
      throw ValidationError("question " + q.qid + " references unknown table '" + q.table_id + "'",
                            "table_id");
    }
    validate_instance(q, tables_[it->second]);
  }
}

Dataset Dataset::load(const std::filesystem::path& tables_jsonl,
                      const std::filesystem::path& questions_jsonl) {
  return Dataset(parse_table_file(tables_jsonl, TableFormat::kJsonl),
                 parse_questions_file(questions_jsonl));
}

void Dataset::save(const std::filesystem::path& tables_jsonl,
                   const std::filesystem::path& questions_jsonl) const {
  std::ofstream t(tables_jsonl, std::ios::binary | std::ios::trunc);
  if (!t) throw Error("cannot write " + tables_jsonl.string());
  for (const auto& table : tables_) t << table_to_jsonl(table) << '\n';
  std::ofstream q(questions_jsonl, std::ios::binary | std::ios::trunc);
  if (!q) throw Error("cannot write " + questions_jsonl.string());
  for (const auto& question : questions_) q << question_to_jsonl(question) << '\n';
}

const Table& Dataset::table(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw NotFoundError("unknown table '" + id + "'");
  return tables_[it->second];
}

}  // namespace rci
