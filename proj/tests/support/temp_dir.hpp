#ifndef SLDML_TESTS_TEMP_DIR_HPP_
#define SLDML_TESTS_TEMP_DIR_HPP_

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

namespace sldml::testing {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("sldml_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  std::filesystem::path write(const std::string& name, const std::string& contents) const {
    const auto p = path_ / name;
    std::ofstream(p) << contents;
    return p;
  }

 private:
  std::filesystem::path path_;
};

}  // namespace sldml::testing

#endif  // SLDML_TESTS_TEMP_DIR_HPP_
