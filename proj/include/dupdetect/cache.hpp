#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

namespace dupdetect {

// Content-addressed store: <root>/<namespace>/<aa>/<sha256>. Reads may run
// concurrently; writes are serialized and land atomically (temp + rename).
class DiskCache {
 public:
  DiskCache(std::filesystem::path root, std::string ns);

  std::optional<std::string> get(std::string_view key) const;
  void put(std::string_view key, std::string_view value);

  std::filesystem::path path_for(std::string_view key) const;
  const std::filesystem::path& root() const noexcept { return root_; }

 private:
  std::filesystem::path root_;
  std::string ns_;
  std::mutex write_mutex_;
};

// Cache directory from DUPDETECT_CACHE_DIR, else `fallback`.
std::filesystem::path default_cache_dir(const std::filesystem::path& fallback);

}  // namespace dupdetect
