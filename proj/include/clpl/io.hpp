#pragma once

// File helpers shared by every module that touches disk. All reads funnel
// through open_input_text/read_* so the audit trail (used to show the
// training loop never touches sealed reference files) is complete.

#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "clpl/common.hpp"

namespace clpl {

class FileAudit {
 public:
  static FileAudit& instance() {
    static FileAudit a;
    return a;
  }
  void enable() {
    std::lock_guard<std::mutex> g(mu_);
    enabled_ = true;
    opened_.clear();
  }
  void disable() {
    std::lock_guard<std::mutex> g(mu_);
    enabled_ = false;
  }
  void record(const std::string& path) {
    std::lock_guard<std::mutex> g(mu_);
    if (enabled_) opened_.insert(std::filesystem::absolute(path).string());
  }
  std::vector<std::string> opened() const {
    std::lock_guard<std::mutex> g(mu_);
    return {opened_.begin(), opened_.end()};
  }

 private:
  mutable std::mutex mu_;
  bool enabled_ = false;
  std::set<std::string> opened_;
};

inline std::string read_text_file(const std::string& path) {
  FileAudit::instance().record(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::string text = read_text_file(path);
  std::vector<std::string> lines;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      if (!cur.empty() && cur.back() == '\r') cur.pop_back();
      lines.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) lines.push_back(cur);
  return lines;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write file: " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

inline std::vector<unsigned char> read_binary_file(const std::string& path) {
  FileAudit::instance().record(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_binary_file(const std::string& path, const void* data, size_t n) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write file: " + path);
  out.write(static_cast<const char*>(data), std::streamsize(n));
  if (!out) throw IoError("write failed: " + path);
}

inline void ensure_dir(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw IoError("cannot create directory: " + path + ": " + ec.message());
}

inline bool file_exists(const std::string& path) {
  return std::filesystem::exists(path);
}

inline uint64_t file_hash(const std::string& path) {
  auto bytes = read_binary_file(path);
  return fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

// Little-endian scalar IO for binary formats (checkpoints, feature files).
template <typename T>
void put_le(std::string& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(reinterpret_cast<char*>(buf), sizeof(T));
}

template <typename T>
T get_le(const unsigned char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

}  // namespace clpl
