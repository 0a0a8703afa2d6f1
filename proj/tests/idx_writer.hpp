// Minimal IDX pair writer used by the tests to produce round-trip fixtures.
#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace testfix {

inline void put_u32_be(std::ofstream& f, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>((v >> 24) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>(v & 0xff)};
  f.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_idx_images(const std::string& path, std::uint32_t count,
                             std::uint32_t rows, std::uint32_t cols,
                             const std::vector<unsigned char>& pixels,
                             std::uint32_t magic = 0x00000803u) {
  std::ofstream f(path, std::ios::binary);
  put_u32_be(f, magic);
  put_u32_be(f, count);
  put_u32_be(f, rows);
  put_u32_be(f, cols);
  f.write(reinterpret_cast<const char*>(pixels.data()), pixels.size());
}

inline void write_idx_labels(const std::string& path,
                             const std::vector<unsigned char>& labels,
                             std::uint32_t magic = 0x00000801u) {
  std::ofstream f(path, std::ios::binary);
  put_u32_be(f, magic);
  put_u32_be(f, static_cast<std::uint32_t>(labels.size()));
  f.write(reinterpret_cast<const char*>(labels.data()), labels.size());
}

}  // namespace testfix
