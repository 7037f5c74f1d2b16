#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qss/scheme.hpp"

namespace qss {

struct StoredBundle {
  std::uint32_t n = 0;
  std::uint32_t t = 0;
  unsigned m = 0;
  RegistrationBundle bundle;
};

// Durable bundle storage: an append-only record log with a CRC32 per record
// plus an index file of live record offsets. Deletions append tombstones.
// With an empty directory the store lives in memory only.
class BundleStore {
 public:
  using Key = std::pair<std::string, std::string>;  // (owner id, data id)

  explicit BundleStore(std::filesystem::path dir = {});

  // Durable (fsynced) before returning. Fails with kDuplicateId unless
  // overwrite is set.
  void put(const StoredBundle& entry, bool overwrite = false);
  std::optional<StoredBundle> get(const std::string& owner_id, const std::string& data_id) const;
  bool erase(const std::string& owner_id, const std::string& data_id);
  std::vector<Key> keys() const;
  std::size_t size() const;

  // Records skipped while loading because their checksum failed.
  std::size_t corrupt_records() const { return corrupt_; }

 private:
  void load();
  bool load_from_index();
  void scan_log();
  std::uint64_t append(std::uint8_t kind, const std::vector<std::uint8_t>& payload);
  void write_index() const;

  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::map<Key, StoredBundle> entries_;
  std::map<Key, std::uint64_t> offsets_;
  std::size_t corrupt_ = 0;
};

}  // namespace qss
