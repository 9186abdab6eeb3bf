#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "cfdetect/io.hpp"

namespace cfd::test {

// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("cfdetect-" + tag + "-" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path file(const std::string& name, const std::string& content) const {
    auto p = path_ / name;
    io::write_file_atomic(p, content);
    return p;
  }

 private:
  std::filesystem::path path_;
};

inline std::filesystem::path data_dir() { return CFD_TEST_DATA_DIR; }

}  // namespace cfd::test
