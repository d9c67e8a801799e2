#pragma once

#include <map>
#include <string>
#include <vector>

#include "repfactor/signatures.hpp"

namespace testing_support {

// Rank-one signatures whose condensed value is the given number, one per
// layer starting at 0.
inline repfactor::SignatureTable condensed_table(const std::map<std::string, std::vector<double>>& series,
                                                 const std::string& category = "ALL") {
  repfactor::SignatureTable t;
  for (const auto& [group, values] : series)
    for (std::size_t layer = 0; layer < values.size(); ++layer) {
      repfactor::Signature s;
      s.group_id = group;
      s.layer = static_cast<int>(layer);
      s.category = category;
      s.values = repfactor::Vector<double>::Constant(1, values[layer]);
      s.condensed = values[layer];
      t.insert(std::move(s));
    }
  return t;
}

}  // namespace testing_support
