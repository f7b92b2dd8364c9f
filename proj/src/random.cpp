#include "priornet/random.hpp"

#include <sstream>

#include "priornet/errors.hpp"

namespace priornet::rng {

std::string save_state(const Engine& e) {
  std::ostringstream os;
  os << e;
  return os.str();
}

void load_state(Engine& e, const std::string& state) {
  std::istringstream is(state);
  is >> e;
  if (!is) throw FormatError("corrupt random engine state");
}

}  // namespace priornet::rng
