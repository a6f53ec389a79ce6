#pragma once

#include "dacq/numeric.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dacq {

/// Interned constant. Ids are process-global and stable.
using Const = std::uint32_t;

Const intern(std::string_view text);
std::string const_text(Const c);

/// Global constant order: numeric-looking constants first, by value (ties by
/// text), then all other constants lexicographically.
int const_compare(Const a, Const b);
inline bool const_less(Const a, Const b) { return const_compare(a, b) < 0; }

/// Sorts and deduplicates under one lock; use this instead of std::sort with
/// const_less on large inputs.
void sort_unique_constants(std::vector<Const>& values);

bool const_is_numeric(Const c);
std::optional<Rational> const_value(Const c);

}  // namespace dacq
