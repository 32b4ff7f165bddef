#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "rci/table.hpp"

namespace rci {

// Tables plus the questions asked over them.
class Dataset {
 public:
  Dataset() = default;
  // Throws ValidationError on duplicate table ids, questions referencing
  // unknown tables, or out-of-bounds targets.
  Dataset(std::vector<Table> tables, std::vector<QAInstance> questions);

  static Dataset load(const std::filesystem::path& tables_jsonl,
                      const std::filesystem::path& questions_jsonl);
  void save(const std::filesystem::path& tables_jsonl,
            const std::filesystem::path& questions_jsonl) const;

  const std::vector<Table>& tables() const noexcept { return tables_; }
  const std::vector<QAInstance>& questions() const noexcept { return questions_; }
  // Throws NotFoundError.
  const Table& table(const std::string& id) const;
  bool has_table(const std::string& id) const { return by_id_.count(id) > 0; }

 private:
  std::vector<Table> tables_;
  std::vector<QAInstance> questions_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

}  // namespace rci
