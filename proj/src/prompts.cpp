#include "pardec/prompts.hpp"

#include <algorithm>

#include "pardec/rng.hpp"

namespace pardec {

TokenSequence synthetic_prompt(std::uint64_t seed, std::size_t index, std::size_t length, const CodecConfig& codec) {
  const TokenId lo = std::max(codec.begin_token, codec.end_token) + 1;
  const TokenId hi = codec.action_token_base;
  if (length == 0 || hi <= lo) throw ConfigError("prompts: empty prompt length or no free vocabulary region");
  const std::uint64_t key = rng::stream_key(seed, index, rng::fnv1a("prompt"));
  TokenSequence out(length);
  for (std::size_t t = 0; t < length; ++t)
    out[t] = lo + static_cast<TokenId>(rng::below(rng::draw(key, t), static_cast<std::uint64_t>(hi - lo)));
  return out;
}

std::vector<TokenSequence> synthetic_prompts(std::uint64_t seed, std::size_t count, std::size_t length,
                                             const CodecConfig& codec) {
  std::vector<TokenSequence> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(synthetic_prompt(seed, i, length, codec));
  return out;
}

}  // namespace pardec
