#include "mapprior/parallel.h"

#include <cstdlib>
#include <string>

namespace mapprior {

int WorkerCount() {
  int count = static_cast<int>(std::thread::hardware_concurrency());
  if (count <= 0) count = 1;
  if (const char* env = std::getenv("MAPPRIOR_THREADS")) {
    try {
      const int cap = std::stoi(env);
      if (cap > 0) count = std::min(count, cap);
    } catch (const std::exception&) {
      // Unparseable values leave the default in place.
    }
  }
  return count;
}

}  // namespace mapprior
