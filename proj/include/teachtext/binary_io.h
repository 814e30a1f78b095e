// include/teachtext/binary_io.h

// Copyright 2026  The teachtext authors

// See the top-level COPYING file for clarification regarding multiple authors
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

#ifndef TEACHTEXT_BINARY_IO_H_
#define TEACHTEXT_BINARY_IO_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace teachtext {

// Little-endian byte sink for the TTFS/TTMD formats.
class ByteWriter {
 public:
  void put_magic(std::string_view magic);
  void put_u16(std::uint16_t v);
  void put_u32(std::uint32_t v);
  void put_f32(float v);
  // u32 byte length followed by the UTF-8 bytes.
  void put_string(std::string_view s);

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

// Bounds-checked little-endian reader; throws FormatError on truncation.
class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, std::string source)
      : bytes_(bytes), source_(std::move(source)) {}

  void expect_magic(std::string_view magic);
  std::uint16_t get_u16();
  std::uint32_t get_u32();
  float get_f32();
  std::string get_string();

  bool at_end() const { return pos_ == bytes_.size(); }
  const std::string& source() const { return source_; }

 private:
  void need(std::size_t n);

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::string source_;
};

// Throws MissingFileError when the file cannot be opened.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path,
                      std::span<const std::uint8_t> bytes);

// FNV-1a 64-bit.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

}  // namespace teachtext

#endif  // TEACHTEXT_BINARY_IO_H_
