#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "acpo/error.hpp"
#include "acpo/types.hpp"

namespace acpo {

// Writes `content` to a sibling temp file and renames it over `path`, so a
// reader never observes a half-written stage file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoWriteFailed, "cannot open " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorCode::IoWriteFailed, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoWriteFailed, "rename " + tmp.string() + ": " + ec.message());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoReadFailed, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename T>
std::string to_jsonl(const std::vector<T>& records) {
  std::string out;
  for (const auto& r : records) {
    out += json(r).dump();
    out += '\n';
  }
  return out;
}

template <typename T>
void write_jsonl(const std::filesystem::path& path, const std::vector<T>& records) {
  write_file_atomic(path, to_jsonl(records));
}

inline std::vector<json> read_jsonl_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoReadFailed, "cannot open " + path.string());
  std::vector<json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError,
                  path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

template <typename T>
std::vector<T> read_jsonl(const std::filesystem::path& path) {
  std::vector<T> out;
  std::size_t lineno = 0;
  for (const auto& v : read_jsonl_values(path)) {
    ++lineno;
    try {
      out.push_back(v.get<T>());
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError,
                  path.string() + ": record " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace acpo
