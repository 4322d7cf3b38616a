// Little-endian binary primitives shared by the file formats.
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "mxlink/error.hpp"

namespace mxlink::detail {

inline void write_u32(std::ostream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline uint32_t read_u32(std::istream& in) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw DataError("unexpected end of binary file");
  return v;
}

inline void write_str(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_str(std::istream& in) {
  const uint32_t n = read_u32(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw DataError("unexpected end of binary file");
  return s;
}

inline void write_f32(std::ostream& out, double v) {
  const float f = static_cast<float>(v);
  out.write(reinterpret_cast<const char*>(&f), sizeof(f));
}

inline double read_f32(std::istream& in) {
  float f = 0;
  in.read(reinterpret_cast<char*>(&f), sizeof(f));
  if (!in) throw DataError("unexpected end of binary file");
  return static_cast<double>(f);
}

inline std::ifstream open_input(const std::filesystem::path& path,
                                bool binary = true) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw DataError("cannot open file: " + path.string());
  return in;
}

inline std::ofstream open_output(const std::filesystem::path& path,
                                 bool binary = true) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw DataError("cannot write file: " + path.string());
  return out;
}

}  // namespace mxlink::detail
