// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#include "petcond/rng.hpp"

#include <sstream>

#include "petcond/errors.hpp"

namespace petcond {

std::string save_rng(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

Rng load_rng(const std::string& state) {
  std::istringstream is(state);
  Rng rng;
  is >> rng;
  if (!is) throw IoError("malformed rng state");
  return rng;
}

}  // namespace petcond
