#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "refscan/error.hpp"
#include "refscan/io.hpp"
#include "refscan/subprocess.hpp"

namespace refscan {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct RepoEntry {
  std::string project_id;
  std::filesystem::path path;
  std::string default_branch;
};

struct RepoManifest {
  std::vector<RepoEntry> entries;

  const RepoEntry* find(std::string_view project_id) const {
    for (const auto& e : entries) {
      if (e.project_id == project_id) return &e;
    }
    return nullptr;
  }
};

struct FileChange {
  std::string path;
  std::int64_t lines_added = 0;
  std::int64_t lines_deleted = 0;
  bool is_executable = false;
  bool is_rename = false;
  bool is_binary = false;

  std::int64_t churn() const { return lines_added + lines_deleted; }
  friend bool operator==(const FileChange&, const FileChange&) = default;
};

struct CommitRecord {
  std::string sha;
  std::string project_id;
  std::string author_id;
  std::int64_t timestamp = 0;
  std::string message;
  std::optional<std::string> parent_sha;
  std::vector<FileChange> files;

  bool has_executable() const {
    return std::any_of(files.begin(), files.end(),
                       [](const FileChange& f) { return f.is_executable; });
  }
  friend bool operator==(const CommitRecord&, const CommitRecord&) = default;
};

struct MineOptions {
  std::set<std::string> exec_extensions = {"py", "pyx", "pyi", "c",  "cc", "cpp", "h",
                                           "hpp", "java", "js", "ts", "go", "rs", "sh"};
  std::string git_binary = "git";
};

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Parses a run of `key = "value"` pairs separated by whitespace.
inline void parse_manifest_pairs(std::string_view text, std::size_t line_no,
                                 std::map<std::string, std::string>& out) {
  auto fail = [&](const std::string& why) {
    throw Error(ErrorCode::kParseError, "line " + std::to_string(line_no) + ": " + why);
  };
  std::size_t i = 0;
  while (true) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i >= text.size() || text[i] == '#') return;
    const std::size_t key_start = i;
    while (i < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '_')) {
      ++i;
    }
    if (i == key_start) fail("expected key");
    const std::string key(text.substr(key_start, i - key_start));
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
    if (i >= text.size() || text[i] != '=') fail("expected '=' after " + key);
    ++i;
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
    if (i >= text.size() || text[i] != '"') fail("expected quoted value for " + key);
    ++i;
    std::string value;
    bool closed = false;
    while (i < text.size()) {
      const char c = text[i++];
      if (c == '\\' && i < text.size()) {
        value += text[i++];
      } else if (c == '"') {
        closed = true;
        break;
      } else {
        value += c;
      }
    }
    if (!closed) fail("unterminated string for " + key);
    if (out.contains(key)) fail("duplicate key " + key);
    out[key] = value;
  }
}

}  // namespace detail

/// Parses the manifest grammar:
///   [[repo]] id="..." path="..." branch="..."
/// Keys may also follow on subsequent lines. `#` starts a comment. Relative
/// paths resolve against the manifest's directory.
inline RepoManifest parse_manifest(std::string_view text,
                                   const std::filesystem::path& base_dir = {}) {
  RepoManifest manifest;
  std::vector<std::pair<std::size_t, std::map<std::string, std::string>>> blocks;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos
                                                                   : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line.starts_with("[[")) {
      if (!line.starts_with("[[repo]]")) {
        throw Error(ErrorCode::kParseError,
                    "line " + std::to_string(line_no) + ": unknown table " + std::string(line));
      }
      blocks.emplace_back(line_no, std::map<std::string, std::string>{});
      detail::parse_manifest_pairs(line.substr(8), line_no, blocks.back().second);
      continue;
    }
    if (blocks.empty()) {
      throw Error(ErrorCode::kParseError,
                  "line " + std::to_string(line_no) + ": key outside [[repo]] block");
    }
    detail::parse_manifest_pairs(line, line_no, blocks.back().second);
  }
  if (blocks.empty()) throw Error(ErrorCode::kParseError, "line 1: no [[repo]] entries");

  std::unordered_set<std::string> seen;
  for (auto& [start_line, kv] : blocks) {
    for (const char* required : {"id", "path"}) {
      if (!kv.contains(required)) {
        throw Error(ErrorCode::kParseError, "line " + std::to_string(start_line) +
                                                ": missing key " + required);
      }
    }
    for (const auto& [k, v] : kv) {
      if (k != "id" && k != "path" && k != "branch") {
        throw Error(ErrorCode::kParseError,
                    "line " + std::to_string(start_line) + ": unknown key " + k);
      }
    }
    RepoEntry entry;
    entry.project_id = kv["id"];
    if (entry.project_id.empty()) {
      throw Error(ErrorCode::kParseError, "line " + std::to_string(start_line) + ": empty id");
    }
    entry.path = kv["path"];
    if (entry.path.is_relative() && !base_dir.empty()) entry.path = base_dir / entry.path;
    entry.default_branch = kv.contains("branch") ? kv["branch"] : "main";
    if (!seen.insert(entry.project_id).second) {
      throw Error(ErrorCode::kDuplicateProject, entry.project_id);
    }
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

inline RepoManifest load_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw Error(ErrorCode::kMissingFile, path.string());
  }
  return parse_manifest(read_text_file(path), path.parent_path());
}

// ---------------------------------------------------------------------------
// File classification
// ---------------------------------------------------------------------------

inline std::string file_extension(std::string_view path) {
  const auto slash = path.find_last_of('/');
  const auto name = slash == std::string_view::npos ? path : path.substr(slash + 1);
  const auto dot = name.find_last_of('.');
  if (dot == std::string_view::npos || dot == 0) return {};
  std::string ext(name.substr(dot + 1));
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

/// True iff the file's extension (case-insensitive) is an executable-code
/// extension.
inline bool classify_file(std::string_view path, const std::set<std::string>& exec_extensions) {
  const auto ext = file_extension(path);
  return !ext.empty() && exec_extensions.contains(ext);
}

inline bool classify_file(std::string_view path) {
  static const MineOptions defaults;
  return classify_file(path, defaults.exec_extensions);
}

// ---------------------------------------------------------------------------
// Git access
// ---------------------------------------------------------------------------

namespace detail {

inline ProcessResult git(const std::string& binary, const std::filesystem::path& repo,
                         std::vector<std::string> args) {
  std::vector<std::string> argv = {binary, "-C", repo.string(), "-c", "core.quotepath=off",
                                   "-c", "log.showSignature=false"};
  argv.insert(argv.end(), std::make_move_iterator(args.begin()),
              std::make_move_iterator(args.end()));
  return run_process(std::move(argv), {{"LC_ALL", "C"}, {"GIT_PAGER", "cat"}});
}

inline std::string first_line(std::string_view s) {
  const auto nl = s.find('\n');
  return std::string(trim(s.substr(0, nl)));
}

inline std::string lowercase(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

class LogCursor {
 public:
  explicit LogCursor(std::string_view data) : data_(data) {}
  bool done() const { return pos_ >= data_.size(); }
  char peek() const { return data_[pos_]; }
  void skip(char c) {
    if (!done() && data_[pos_] == c) ++pos_;
  }
  std::string_view field() {
    const auto end = data_.find('\0', pos_);
    if (end == std::string_view::npos) {
      throw Error(ErrorCode::kGitInvocationFailure, "truncated git log output");
    }
    const auto out = data_.substr(pos_, end - pos_);
    pos_ = end + 1;
    return out;
  }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

inline std::int64_t parse_count(std::string_view s) {
  std::int64_t v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') {
      throw Error(ErrorCode::kGitInvocationFailure, "bad numstat count '" + std::string(s) + "'");
    }
    v = v * 10 + (c - '0');
  }
  return v;
}

}  // namespace detail

inline std::string normalize_author(std::string_view name, std::string_view email) {
  return detail::lowercase(detail::trim(name)) + "<" + detail::lowercase(detail::trim(email)) +
         ">";
}

/// Parses `git log -z --numstat` output produced with the record format used
/// by mine_commits. Exposed for tests.
inline std::vector<CommitRecord> parse_git_log(std::string_view data,
                                               std::string_view project_id,
                                               const MineOptions& opts) {
  std::vector<CommitRecord> commits;
  detail::LogCursor cur(data);
  while (!cur.done()) {
    if (cur.peek() != '\x01') {
      throw Error(ErrorCode::kGitInvocationFailure, "unexpected byte in git log output");
    }
    cur.skip('\x01');
    CommitRecord rec;
    rec.project_id = project_id;
    rec.sha = cur.field();
    const auto parents = cur.field();
    if (!parents.empty()) rec.parent_sha = std::string(parents.substr(0, parents.find(' ')));
    const auto name = cur.field();
    const auto email = cur.field();
    rec.author_id = normalize_author(name, email);
    rec.timestamp = detail::parse_count(cur.field());
    std::string message(cur.field());
    while (!message.empty() && message.back() == '\n') message.pop_back();
    rec.message = std::move(message);
    cur.skip('\0');
    cur.skip('\n');
    while (!cur.done() && cur.peek() != '\x01') {
      const auto entry = cur.field();
      const auto t1 = entry.find('\t');
      const auto t2 = entry.find('\t', t1 + 1);
      if (t1 == std::string_view::npos || t2 == std::string_view::npos) {
        throw Error(ErrorCode::kGitInvocationFailure, "bad numstat entry");
      }
      const auto added = entry.substr(0, t1);
      const auto deleted = entry.substr(t1 + 1, t2 - t1 - 1);
      FileChange fc;
      std::string_view path = entry.substr(t2 + 1);
      if (path.empty()) {
        cur.field();  // rename source
        path = cur.field();
        fc.is_rename = true;
      }
      fc.path = path;
      if (added == "-" || deleted == "-") {
        fc.is_binary = true;
      } else {
        fc.lines_added = detail::parse_count(added);
        fc.lines_deleted = detail::parse_count(deleted);
        fc.is_executable = classify_file(fc.path, opts.exec_extensions);
      }
      // Mode-only changes and empty-file additions carry no churn.
      if (fc.churn() == 0 && !fc.is_rename && !fc.is_binary) continue;
      rec.files.push_back(std::move(fc));
    }
    commits.push_back(std::move(rec));
  }
  return commits;
}

inline void sort_commits(std::vector<CommitRecord>& commits) {
  std::stable_sort(commits.begin(), commits.end(),
                   [](const CommitRecord& a, const CommitRecord& b) {
                     if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
                     return a.sha < b.sha;
                   });
}

/// Mines one record per first-parent commit of the entry's branch. Churn is
/// git's numeric diff-stat against the first parent. Records are ordered by
/// (committer timestamp, sha).
inline std::vector<CommitRecord> mine_commits(const RepoEntry& repo,
                                              const MineOptions& opts = {}) {
  if (!std::filesystem::is_directory(repo.path)) {
    throw Error(ErrorCode::kNotARepository, repo.path.string());
  }
  auto top = detail::git(opts.git_binary, repo.path, {"rev-parse", "--git-dir"});
  if (top.exit_status != 0) throw Error(ErrorCode::kNotARepository, repo.path.string());

  auto shallow =
      detail::git(opts.git_binary, repo.path, {"rev-parse", "--is-shallow-repository"});
  if (shallow.exit_status != 0) {
    throw Error(ErrorCode::kGitInvocationFailure, detail::first_line(shallow.err));
  }
  if (detail::first_line(shallow.out) == "true") {
    throw Error(ErrorCode::kGitInvocationFailure,
                repo.path.string() + " is a shallow clone; full history required");
  }

  const std::string ref = "refs/heads/" + repo.default_branch;
  auto verify = detail::git(opts.git_binary, repo.path,
                            {"rev-parse", "--verify", "--quiet", ref + "^{commit}"});
  if (verify.exit_status != 0) {
    throw Error(ErrorCode::kBranchNotFound, repo.project_id + ":" + repo.default_branch);
  }

  auto log = detail::git(opts.git_binary, repo.path,
                         {"log", "--first-parent", "--reverse", "--diff-merges=first-parent",
                          "-M", "--numstat", "-z", "--no-color", "--no-ext-diff",
                          "--format=%x01%H%x00%P%x00%an%x00%ae%x00%ct%x00%B%x00", ref, "--"});
  if (log.exit_status != 0) {
    throw Error(ErrorCode::kGitInvocationFailure, detail::first_line(log.err));
  }
  auto commits = parse_git_log(log.out, repo.project_id, opts);
  sort_commits(commits);
  return commits;
}

// ---------------------------------------------------------------------------
// Blob access for before/after file contents
// ---------------------------------------------------------------------------

struct TouchedFile {
  std::string old_path;  // empty when the file was added
  std::string new_path;  // empty when the file was deleted
  std::string old_blob;
  std::string new_blob;
};

/// Reads blobs through one long-lived `git cat-file --batch` process.
class BlobReader {
 public:
  explicit BlobReader(const std::filesystem::path& repo, std::string git_binary = "git")
      : repo_(repo),
        git_binary_(git_binary),
        child_({git_binary, "-C", repo.string(), "cat-file", "--batch"}, {{"LC_ALL", "C"}},
               true) {}

  ~BlobReader() {
    try {
      child_.finish();
    } catch (...) {
    }
  }

  BlobReader(const BlobReader&) = delete;
  BlobReader& operator=(const BlobReader&) = delete;

  std::optional<std::string> read(const std::string& object) {
    child_.write_all(object + "\n");
    const std::string header = child_.read_line();
    if (header.ends_with(" missing")) return std::nullopt;
    const auto sp = header.find_last_of(' ');
    if (sp == std::string::npos) {
      throw Error(ErrorCode::kGitInvocationFailure, "cat-file header: " + header);
    }
    const auto size = static_cast<std::size_t>(std::stoull(header.substr(sp + 1)));
    std::string body = child_.read_exact(size);
    child_.read_exact(1);
    return body;
  }

  /// Files touched by `sha` relative to its first parent (or the empty tree).
  std::vector<TouchedFile> touched(const std::string& sha,
                                   const std::optional<std::string>& parent) {
    std::vector<std::string> args = {"diff-tree", "-r", "-M", "--no-commit-id", "--raw", "-z"};
    if (parent) {
      args.push_back(*parent);
      args.push_back(sha);
    } else {
      args.push_back("--root");
      args.push_back(sha);
    }
    auto res = detail::git(git_binary_, repo_, args);
    if (res.exit_status != 0) {
      throw Error(ErrorCode::kGitInvocationFailure, detail::first_line(res.err));
    }
    std::vector<TouchedFile> out;
    detail::LogCursor cur(res.out);
    static const std::string kNullBlob(40, '0');
    while (!cur.done()) {
      const auto meta = cur.field();  // ":<mode> <mode> <blob> <blob> <status>"
      if (meta.empty() || meta.front() != ':') break;
      std::vector<std::string_view> parts;
      std::size_t p = 1;
      while (p <= meta.size()) {
        const auto sp = meta.find(' ', p);
        parts.push_back(meta.substr(p, sp == std::string_view::npos ? std::string_view::npos
                                                                    : sp - p));
        if (sp == std::string_view::npos) break;
        p = sp + 1;
      }
      if (parts.size() < 5) throw Error(ErrorCode::kGitInvocationFailure, "bad raw diff line");
      TouchedFile tf;
      const char status = parts[4].empty() ? 'M' : parts[4].front();
      const auto first = std::string(cur.field());
      if (status == 'R' || status == 'C') {
        tf.old_path = first;
        tf.new_path = cur.field();
      } else {
        tf.old_path = first;
        tf.new_path = first;
      }
      tf.old_blob = parts[2];
      tf.new_blob = parts[3];
      if (tf.old_blob == kNullBlob) tf.old_path.clear();
      if (tf.new_blob == kNullBlob) tf.new_path.clear();
      if (status == 'C') tf.old_path.clear();  // copies add a file
      out.push_back(std::move(tf));
    }
    return out;
  }

 private:
  std::filesystem::path repo_;
  std::string git_binary_;
  detail::Child child_;
};

// ---------------------------------------------------------------------------
// JSONL serialization
// ---------------------------------------------------------------------------

inline Json to_json(const CommitRecord& c) {
  Json j;
  j["sha"] = c.sha;
  j["project"] = c.project_id;
  j["author"] = c.author_id;
  j["ts"] = c.timestamp;
  j["parent"] = c.parent_sha ? Json(*c.parent_sha) : Json(nullptr);
  j["message"] = c.message;
  Json files = Json::array();
  for (const auto& f : c.files) {
    files.push_back({{"path", f.path},
                     {"add", f.lines_added},
                     {"del", f.lines_deleted},
                     {"exec", f.is_executable},
                     {"rename", f.is_rename},
                     {"binary", f.is_binary}});
  }
  j["files"] = std::move(files);
  return j;
}

inline CommitRecord commit_from_json(const Json& j) {
  CommitRecord c;
  c.sha = j.at("sha").get<std::string>();
  c.project_id = j.at("project").get<std::string>();
  c.author_id = j.at("author").get<std::string>();
  c.timestamp = j.at("ts").get<std::int64_t>();
  if (!j.at("parent").is_null()) c.parent_sha = j.at("parent").get<std::string>();
  c.message = j.at("message").get<std::string>();
  for (const auto& f : j.at("files")) {
    FileChange fc;
    fc.path = f.at("path").get<std::string>();
    fc.lines_added = f.at("add").get<std::int64_t>();
    fc.lines_deleted = f.at("del").get<std::int64_t>();
    fc.is_executable = f.at("exec").get<bool>();
    fc.is_rename = f.at("rename").get<bool>();
    fc.is_binary = f.at("binary").get<bool>();
    c.files.push_back(std::move(fc));
  }
  return c;
}

inline std::string commits_to_jsonl(const std::vector<CommitRecord>& commits) {
  std::string out;
  for (const auto& c : commits) {
    out += to_json(c).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<CommitRecord> read_commits_jsonl(const std::filesystem::path& path) {
  std::vector<CommitRecord> commits;
  std::unordered_set<std::string> seen;
  for_each_jsonl(path, [&](const Json& row, std::size_t line) {
    auto c = commit_from_json(row);
    if (!seen.insert(c.sha).second) {
      throw Error(ErrorCode::kParseError,
                  path.string() + " line " + std::to_string(line) + ": duplicate sha " + c.sha);
    }
    commits.push_back(std::move(c));
  });
  return commits;
}

}  // namespace refscan
