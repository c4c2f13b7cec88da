#include "crnpost/parallel.hpp"

#include <cstdlib>
#include <string>

namespace crnpost {

std::size_t default_workers() {
    if (const char* env = std::getenv("CRNPOST_WORKERS")) {
        try {
            const long v = std::stol(env);
            if (v >= 1) return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

}  // namespace crnpost
