#pragma once

#include <string>
#include <vector>

#include "strateval/corpus.hpp"

namespace fixtures {

inline strateval::Dataset dataset(const std::string& text,
                                  strateval::LoopKind loop = strateval::LoopKind::closed) {
  return strateval::parse_interactions(std::string_view(text), {}, ",", loop);
}

}  // namespace fixtures
