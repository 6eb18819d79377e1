#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "crl/errors.hpp"

namespace crl {

// Little-endian binary file helpers. Readers track their byte offset so
// errors can name where a file went bad.

class BinWriter {
 public:
  explicit BinWriter(const std::string& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot open '" + path + "' for writing");
  }

  void bytes(const void* p, size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  void u16(uint16_t v) { put_le(v); }
  void u32(uint32_t v) { put_le(v); }
  void u64(uint64_t v) { put_le(v); }
  void f64(double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_le(bits);
  }
  void f64_array(const double* p, size_t n) {
    for (size_t i = 0; i < n; ++i) f64(p[i]);
  }

  void close() {
    out_.close();
    if (!out_) throw IoError("write to '" + path_ + "' failed");
  }

 private:
  template <class T>
  void put_le(T v) {
    unsigned char buf[sizeof(T)];
    for (size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(buf, sizeof(T));
  }

  std::string path_;
  std::ofstream out_;
};

class BinReader {
 public:
  explicit BinReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open '" + path + "' for reading");
  }

  void bytes(void* p, size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in_.gcount()) != n)
      throw IoError("'" + path_ + "' truncated at offset " + std::to_string(offset_ + static_cast<uint64_t>(in_.gcount())));
    offset_ += n;
  }
  uint16_t u16() { return get_le<uint16_t>(); }
  uint32_t u32() { return get_le<uint32_t>(); }
  uint64_t u64() { return get_le<uint64_t>(); }
  double f64() {
    uint64_t bits = get_le<uint64_t>();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  void f64_array(double* p, size_t n) {
    for (size_t i = 0; i < n; ++i) p[i] = f64();
  }

  uint64_t offset() const { return offset_; }
  const std::string& path() const { return path_; }

  bool at_eof() {
    in_.peek();
    return in_.eof();
  }

  [[noreturn]] void fail(const std::string& what, uint64_t at) const {
    throw IoError("'" + path_ + "': " + what + " at offset " + std::to_string(at));
  }

 private:
  template <class T>
  T get_le() {
    unsigned char buf[sizeof(T)];
    bytes(buf, sizeof(T));
    T v = 0;
    for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
    return v;
  }

  std::string path_;
  std::ifstream in_;
  uint64_t offset_ = 0;
};

}  // namespace crl
