#include "rci/tokenizer.hpp"

#include <cctype>

#include "rci/errors.hpp"

namespace rci {

std::vector<std::string> split_tokens(std::string_view text, bool lowercase) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(lowercase ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  flush();
  return out;
}

std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<int> tokenize(std::string_view text, const TokenizerConfig& config) {
  if (config.bucket_count < 2) throw ValidationError("bucket_count must be >= 2", "bucket_count");
  std::vector<int> ids;
  for (const auto& tok : split_tokens(text, config.lowercase)) {
    ids.push_back(kFirstBucketId +
                  static_cast<int>(fnv1a64(tok) % static_cast<std::uint64_t>(config.bucket_count)));
  }
  return ids;
}

}  // namespace rci
