#pragma once
// Hashed-vocabulary tokenizer. Surface forms are hashed into a fixed bucket
// range; the boundary markers live below that range.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace rci {

inline constexpr int kClsId = 0;
inline constexpr int kSepId = 1;
inline constexpr int kFirstBucketId = 2;

struct TokenizerConfig {
  int bucket_count = 30000;
  bool lowercase = true;

  int vocab_size() const noexcept { return kFirstBucketId + bucket_count; }
  bool operator==(const TokenizerConfig&) const = default;
};

// Whitespace/punctuation split; each ASCII punctuation character is its own
// token. Case folding applied when configured.
std::vector<std::string> split_tokens(std::string_view text, bool lowercase);

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view s) noexcept;

std::vector<int> tokenize(std::string_view text, const TokenizerConfig& config);

}  // namespace rci
