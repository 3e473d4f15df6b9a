#pragma once

#include "spo/verify/problems.hpp"

namespace spo::fixtures {

// Vocab with eos = 0 and `tokens` ordinary ids.
inline Vocab plain_vocab(std::size_t tokens) { return Vocab{tokens + 1, {}, 0}; }

using verify::cache_from;
using verify::random_tabular;
using verify::random_tabular_dataset;
using verify::small_space;
using verify::TabularRound;

}  // namespace spo::fixtures
