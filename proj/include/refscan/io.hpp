#pragma once

#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <unistd.h>

#include "json.hpp"
#include "refscan/error.hpp"

namespace refscan {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kToolVersion = "0.3.0";

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingFile, path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

/// Writes `content` next to `path` and renames it into place, so readers
/// never observe a partially written file.
inline void write_file_atomic(const std::filesystem::path& path,
                              std::string_view content) {
  const auto dir = path.has_parent_path() ? path.parent_path()
                                          : std::filesystem::path(".");
  std::filesystem::create_directories(dir);
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::kIoFailure, "short write " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error(ErrorCode::kIoFailure, "rename to " + path.string() + ": " + ec.message());
  }
}

inline void write_json_atomic(const std::filesystem::path& path, const Json& doc) {
  write_file_atomic(path, doc.dump(2) + "\n");
}

inline Json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
}

/// Calls `on_row` for each non-blank line of a JSONL file.
inline void for_each_jsonl(const std::filesystem::path& path,
                           const std::function<void(const Json&, std::size_t)>& on_row) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingFile, path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json row;
    try {
      row = Json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParseError,
                  path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      on_row(row, line_no);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParseError,
                  path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline std::string to_jsonl(const std::vector<Json>& rows) {
  std::string out;
  for (const auto& row : rows) {
    out += row.dump();
    out += '\n';
  }
  return out;
}

// FNV-1a, 64 bit. Used for schema and config fingerprints.
inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

inline std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Provenance header attached to every JSON artifact. `created_at` is the only
/// field that varies between otherwise identical runs.
inline Json provenance(std::string_view command, std::string_view config_hash) {
  Json p;
  p["tool"] = "refscan";
  p["version"] = kToolVersion;
  p["command"] = command;
  p["config_hash"] = config_hash;
  p["created_at"] = utc_timestamp();
  return p;
}

}  // namespace refscan
