#include "dupdetect/cache.hpp"

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

#include "dupdetect/error.hpp"
#include "dupdetect/hash.hpp"

namespace dupdetect {

namespace {

std::string to_hex(const unsigned char* digest, unsigned int len) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) throw InvariantError("sha256 init failed");
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(std::string_view data) { EVP_DigestUpdate(ctx_, data.data(), data.size()); }

  std::string hex() {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, digest, &len);
    return to_hex(digest, len);
  }

 private:
  EVP_MD_CTX* ctx_;
};

}  // namespace

std::string sha256_hex(std::string_view data) {
  Sha256 h;
  h.update(data);
  return h.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Sha256 h;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    h.update(std::string_view(buf, static_cast<std::size_t>(in.gcount())));
  }
  return h.hex();
}

DiskCache::DiskCache(std::filesystem::path root, std::string ns) : root_(std::move(root)), ns_(std::move(ns)) {}

std::filesystem::path DiskCache::path_for(std::string_view key) const {
  const std::string digest = sha256_hex(key);
  return root_ / ns_ / digest.substr(0, 2) / digest;
}

std::optional<std::string> DiskCache::get(std::string_view key) const {
  std::ifstream in(path_for(key), std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void DiskCache::put(std::string_view key, std::string_view value) {
  static std::atomic<unsigned> counter{0};
  const auto target = path_for(key);
  std::lock_guard lock(write_mutex_);
  std::error_code ec;
  std::filesystem::create_directories(target.parent_path(), ec);
  if (ec) throw IoError("cannot create " + target.parent_path().string() + ": " + ec.message());
  auto tmp = target;
  tmp += ".tmp" + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(value.data(), static_cast<std::streamsize>(value.size()));
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, target, ec);
  if (ec) throw IoError("cannot move cache entry into place: " + ec.message());
}

std::filesystem::path default_cache_dir(const std::filesystem::path& fallback) {
  if (const char* dir = std::getenv("DUPDETECT_CACHE_DIR"); dir && *dir) return dir;
  return fallback;
}

}  // namespace dupdetect
