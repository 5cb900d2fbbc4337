#pragma once

#include <openssl/evp.h>

#include <cstdint>
#include <string>
#include <vector>

#include "sttc/errors.hpp"
#include "sttc/io.hpp"

namespace sttc {

/// SHA-256 of a byte buffer as lowercase hex.
inline std::string sha256_hex(const void* data, std::size_t size) {
  unsigned char out[EVP_MAX_MD_SIZE];
  unsigned int out_len = 0;
  if (EVP_Digest(data, size, out, &out_len, EVP_sha256(), nullptr) != 1)
    throw FormatError("sha256: digest failed");
  static const char* hex = "0123456789abcdef";
  std::string s;
  s.reserve(out_len * 2);
  for (unsigned int i = 0; i < out_len; ++i) {
    s.push_back(hex[out[i] >> 4]);
    s.push_back(hex[out[i] & 0xf]);
  }
  return s;
}

inline std::string sha256_hex(const std::string& text) {
  return sha256_hex(text.data(), text.size());
}

inline std::string sha256_hex(const std::vector<std::uint8_t>& bytes) {
  return sha256_hex(bytes.data(), bytes.size());
}

inline std::string sha256_file(const std::string& path) {
  return sha256_hex(read_file_bytes(path));
}

}  // namespace sttc
