#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace atnl {

// FIPS 180-4 SHA-256, used for the output digests in run manifests.
std::string sha256_hex(std::span<const unsigned char> data);
std::string sha256_hex(const std::string& data);
std::string sha256_file_hex(const std::string& path);

} // namespace atnl
