// ctcadapt/binary_io.hpp

// Copyright 2026 The ctcadapt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "ctcadapt/numerics.hpp"

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

// Little-endian scalar read/write shared by the binary file formats.

namespace ctcadapt {

namespace io {


inline void PutU64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}
inline void PutU32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}
inline void PutU8(std::ostream& os, std::uint8_t v) { os.put(static_cast<char>(v)); }
inline void PutF64(std::ostream& os, double v) { PutU64(os, std::bit_cast<std::uint64_t>(v)); }
inline void PutStr(std::ostream& os, std::string_view s) {
  PutU32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void ReadExact(std::istream& is, char* dst, std::size_t n) {
  is.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) throw Error("unexpected end of file");
}
inline std::uint64_t GetU64(std::istream& is) {
  unsigned char b[8];
  ReadExact(is, reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}
inline std::uint32_t GetU32(std::istream& is) {
  unsigned char b[4];
  ReadExact(is, reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}
inline std::uint8_t GetU8(std::istream& is) {
  char c;
  ReadExact(is, &c, 1);
  return static_cast<std::uint8_t>(c);
}
inline double GetF64(std::istream& is) { return std::bit_cast<double>(GetU64(is)); }
inline std::string GetStr(std::istream& is, std::size_t limit = 1u << 20) {
  std::uint32_t n = GetU32(is);
  if (n > limit) throw Error("string field too long");
  std::string s(n, '\0');
  if (n) ReadExact(is, s.data(), n);
  return s;
}

}  // namespace io

}  // namespace ctcadapt
