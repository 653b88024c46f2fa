#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "condet/corpus.hpp"
#include "condet/log.hpp"

namespace testutil {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name) {
    path_ = std::filesystem::temp_directory_path() /
            (name + "_" + std::to_string(std::random_device{}()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline condet::Corpus make_corpus(std::size_t n, const std::string& domain = "d", bool labeled = true) {
  condet::Corpus c;
  c.domain = domain;
  for (std::size_t i = 0; i < n; ++i) {
    condet::Document d{domain + "-" + std::to_string(i), "text number " + std::to_string(i) + ".", {}, domain};
    if (labeled) d.label = static_cast<int>(i % 2);
    c.documents.push_back(d);
  }
  return c;
}

// Captures log output for the lifetime of the object.
class LogCapture {
 public:
  LogCapture() { condet::log::set_sink(&buffer_); }
  ~LogCapture() { condet::log::set_sink(nullptr); }
  std::string text() const { return buffer_.str(); }

 private:
  std::ostringstream buffer_;
};

}  // namespace testutil
