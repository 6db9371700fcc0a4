#ifndef OLAB_SHA256_HPP
#define OLAB_SHA256_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace olab {

// FIPS 180-4 SHA-256, returned as lowercase hex. Used for config hashes and
// output-file digests in the run manifest.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace olab

#endif  // OLAB_SHA256_HPP
