#include "finmeta/parallel.hpp"

#include <charconv>
#include <cstdlib>
#include <string_view>

namespace finmeta {

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("FINMETA_THREADS")) {
    std::string_view text(env);
    unsigned value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec == std::errc() && ptr == text.data() + text.size() && value > 0) return value;
  }
  return 1;
}

}  // namespace finmeta
