#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace pardec {

using TokenId = std::int32_t;
using TokenSequence = std::vector<TokenId>;

}  // namespace pardec
