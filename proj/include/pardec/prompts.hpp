#pragma once

#include <cstdint>
#include <vector>

#include "pardec/action_codec.hpp"
#include "pardec/types.hpp"

namespace pardec {

/// Seeded stand-in for an image+instruction prompt: `length` tokens drawn
/// uniformly from the ids above begin/end and below the action block.
/// Token t of prompt `index` is lo + below(draw(stream_key(seed, index,
/// fnv1a("prompt")), t), base - lo).
TokenSequence synthetic_prompt(std::uint64_t seed, std::size_t index, std::size_t length, const CodecConfig& codec);

std::vector<TokenSequence> synthetic_prompts(std::uint64_t seed, std::size_t count, std::size_t length,
                                             const CodecConfig& codec);

}  // namespace pardec
