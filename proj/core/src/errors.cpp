#include "forcecast/errors.hpp"

namespace forcecast {

void require(bool condition, const std::string& message) {
  if (!condition) throw ConfigError(message);
}

}  // namespace forcecast
