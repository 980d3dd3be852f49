#pragma once

#include <cstdint>

namespace hypermatch::bench {

/// Global operator new calls since program start. Linking this library
/// replaces the global allocation functions with counting versions.
std::uint64_t allocation_count() noexcept;

}  // namespace hypermatch::bench
