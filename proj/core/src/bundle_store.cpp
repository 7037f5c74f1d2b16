#include "qss/bundle_store.hpp"

#include <fcntl.h>
#include <unistd.h>
#include <zlib.h>

#include <fstream>

#include "qss/error.hpp"
#include "qss/messages.hpp"
#include "qss/wire.hpp"

namespace qss {

namespace {

constexpr std::uint32_t kRecordMagic = 0x51534231;  // "QSB1"
constexpr std::uint8_t kPut = 1;
constexpr std::uint8_t kTombstone = 2;
constexpr std::size_t kRecordHead = 9;  // magic, kind, length

std::uint32_t crc_of(std::uint8_t kind, std::span<const std::uint8_t> payload) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, &kind, 1);
  crc = crc32(crc, payload.data(), static_cast<uInt>(payload.size()));
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_durable(const std::filesystem::path& path, std::span<const std::uint8_t> bytes, bool append) {
  const int flags = O_WRONLY | O_CREAT | (append ? O_APPEND : O_TRUNC);
  const int fd = ::open(path.c_str(), flags, 0600);
  if (fd < 0) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t n = ::write(fd, bytes.data() + done, bytes.size() - done);
    if (n < 0) {
      ::close(fd);
      fail(ErrorCode::kIo, "write to " + path.string() + " failed");
    }
    done += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) {
    ::close(fd);
    fail(ErrorCode::kIo, "fsync of " + path.string() + " failed");
  }
  ::close(fd);
}

StoredBundle decode_entry(std::span<const std::uint8_t> payload) {
  StoreShares s = decode_store_shares(payload);
  return {s.n, s.t, s.m, std::move(s.bundle)};
}

struct Record {
  std::uint8_t kind = 0;
  std::span<const std::uint8_t> payload;
  std::size_t size = 0;
};

// Parses the record at `offset`; nullopt when truncated or corrupt.
std::optional<Record> parse_record(std::span<const std::uint8_t> log, std::size_t offset) {
  if (offset + kRecordHead > log.size()) return std::nullopt;
  ByteReader r(log.subspan(offset, kRecordHead));
  if (r.u32() != kRecordMagic) return std::nullopt;
  Record rec;
  rec.kind = r.u8();
  const std::uint32_t len = r.u32();
  if (offset + kRecordHead + len + 4 > log.size()) return std::nullopt;
  rec.payload = log.subspan(offset + kRecordHead, len);
  ByteReader tail(log.subspan(offset + kRecordHead + len, 4));
  if (tail.u32() != crc_of(rec.kind, rec.payload)) return std::nullopt;
  rec.size = kRecordHead + len + 4;
  return rec;
}

}  // namespace

BundleStore::BundleStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (dir_.empty()) return;
  std::filesystem::create_directories(dir_);
  load();
}

void BundleStore::load() {
  if (!load_from_index()) scan_log();
}

bool BundleStore::load_from_index() {
  const auto idx = read_all(dir_ / "bundles.idx");
  if (idx.empty()) return false;
  const auto log = read_all(dir_ / "bundles.log");
  try {
    ByteReader r(idx);
    const std::uint32_t count = r.u32();
    std::map<Key, StoredBundle> entries;
    std::map<Key, std::uint64_t> offsets;
    for (std::uint32_t i = 0; i < count; ++i) {
      Key k;
      k.first = r.str();
      k.second = r.str();
      const std::uint64_t off = r.u64();
      const auto rec = parse_record(log, off);
      if (!rec || rec->kind != kPut) return false;
      StoredBundle b = decode_entry(rec->payload);
      if (b.bundle.owner_id != k.first || b.bundle.data_id != k.second) return false;
      entries.emplace(k, std::move(b));
      offsets.emplace(k, off);
    }
    const std::uint32_t crc = r.u32();
    r.expect_end();
    if (crc != crc_of(0, std::span<const std::uint8_t>(idx).first(idx.size() - 4))) return false;
    entries_ = std::move(entries);
    offsets_ = std::move(offsets);
    return true;
  } catch (const Error&) {
    return false;
  }
}

void BundleStore::scan_log() {
  const auto log = read_all(dir_ / "bundles.log");
  entries_.clear();
  offsets_.clear();
  std::size_t off = 0;
  while (off < log.size()) {
    const auto rec = parse_record(log, off);
    if (!rec) {
      // A torn tail from a crash mid-append; later bytes are unusable.
      ++corrupt_;
      break;
    }
    try {
      if (rec->kind == kPut) {
        StoredBundle b = decode_entry(rec->payload);
        Key k{b.bundle.owner_id, b.bundle.data_id};
        entries_[k] = std::move(b);
        offsets_[k] = off;
      } else if (rec->kind == kTombstone) {
        const DeleteShares d = decode_delete_shares(rec->payload);
        entries_.erase({d.owner_id, d.data_id});
        offsets_.erase({d.owner_id, d.data_id});
      }
    } catch (const Error&) {
      ++corrupt_;
    }
    off += rec->size;
  }
  write_index();
}

std::uint64_t BundleStore::append(std::uint8_t kind, const std::vector<std::uint8_t>& payload) {
  const auto path = dir_ / "bundles.log";
  std::error_code ec;
  const std::uint64_t offset = std::filesystem::exists(path, ec) ? std::filesystem::file_size(path) : 0;
  ByteWriter w;
  w.u32(kRecordMagic);
  w.u8(kind);
  w.u32(static_cast<std::uint32_t>(payload.size()));
  w.bytes(payload);
  w.u32(crc_of(kind, payload));
  write_durable(path, w.data(), true);
  return offset;
}

void BundleStore::write_index() const {
  if (dir_.empty()) return;
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(offsets_.size()));
  for (const auto& [k, off] : offsets_) {
    w.str(k.first);
    w.str(k.second);
    w.u64(off);
  }
  w.u32(crc_of(0, w.data()));
  const auto tmp = dir_ / "bundles.idx.tmp";
  write_durable(tmp, w.data(), false);
  std::filesystem::rename(tmp, dir_ / "bundles.idx");
}

void BundleStore::put(const StoredBundle& entry, bool overwrite) {
  const Key k{entry.bundle.owner_id, entry.bundle.data_id};
  std::lock_guard lock(mu_);
  if (!overwrite && entries_.count(k)) {
    fail(ErrorCode::kDuplicateId, "data id '" + k.second + "' is already registered for owner '" + k.first + "'");
  }
  if (!dir_.empty()) {
    const auto payload = encode(StoreShares{entry.n, entry.t, entry.m, false, entry.bundle});
    offsets_[k] = append(kPut, payload);
    write_index();
  }
  entries_[k] = entry;
}

std::optional<StoredBundle> BundleStore::get(const std::string& owner_id, const std::string& data_id) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find({owner_id, data_id});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

bool BundleStore::erase(const std::string& owner_id, const std::string& data_id) {
  const Key k{owner_id, data_id};
  std::lock_guard lock(mu_);
  if (!entries_.count(k)) return false;
  if (!dir_.empty()) {
    append(kTombstone, encode(DeleteShares{owner_id, data_id}));
    offsets_.erase(k);
    write_index();
  }
  entries_.erase(k);
  return true;
}

std::vector<BundleStore::Key> BundleStore::keys() const {
  std::lock_guard lock(mu_);
  std::vector<Key> out;
  for (const auto& [k, _] : entries_) out.push_back(k);
  return out;
}

std::size_t BundleStore::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

}  // namespace qss
