#ifndef SCALWEIGHT_IO_HPP
#define SCALWEIGHT_IO_HPP

#include <string>

namespace scalweight {

// Writes bytes to a sibling temp file, then renames over the target so
// readers never observe a partial file. Throws IoError.
void atomic_write_file(const std::string& path, const std::string& bytes);

std::string read_file(const std::string& path);  // throws IoError

void ensure_directory(const std::string& path);  // mkdir -p, throws IoError

}  // namespace scalweight

#endif
