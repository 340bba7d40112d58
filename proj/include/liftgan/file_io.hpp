#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

namespace liftgan {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::filesystem::path& path);

// Writes to a temporary sibling and renames it over `path`, so readers never
// see a partial file. The temporary is removed on failure.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace liftgan
