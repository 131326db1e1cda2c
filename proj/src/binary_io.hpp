// Copyright 2026 The Pctx Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Little-endian primitives for the binary artifact formats.

#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>

#include "pctx/common.hpp"

namespace pctx::detail {

template <typename U>
inline void write_le(std::ostream& out, U value) {
  char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    buf[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  }
  out.write(buf, sizeof(U));
}

template <typename U>
inline U read_le(std::istream& in) {
  unsigned char buf[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(U))) {
    throw ParseError("unexpected end of binary stream");
  }
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    value |= static_cast<U>(buf[i]) << (8 * i);
  }
  return value;
}

inline void write_f64(std::ostream& out, double v) {
  write_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
}

inline double read_f64(std::istream& in) {
  return std::bit_cast<double>(read_le<std::uint64_t>(in));
}

}  // namespace pctx::detail
