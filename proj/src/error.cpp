#include "mcct/error.hpp"

#include <atomic>
#include <iostream>

namespace mcct {
namespace {
std::atomic<WarningSink> g_sink{nullptr};
}

void warn(const std::string& message) {
  if (WarningSink sink = g_sink.load()) {
    sink(message);
    return;
  }
  std::cerr << "warning: " << message << '\n';
}

void set_warning_sink(WarningSink sink) { g_sink.store(sink); }

}  // namespace mcct
