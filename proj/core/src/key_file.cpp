#include "qss/key_file.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>

#include "qss/error.hpp"
#include "qss/wire.hpp"

namespace qss {

TimeMs SystemClock::now_ms() const {
  using namespace std::chrono;
  return static_cast<TimeMs>(duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count());
}

std::string_view to_string(KeyState state) {
  switch (state) {
    case KeyState::kAvailable: return "available";
    case KeyState::kReserved: return "reserved";
    case KeyState::kConsumed: return "consumed";
    case KeyState::kExpired: return "expired";
  }
  return "unknown";
}

void KeyFile::erase_octets() {
  std::fill(octets.begin(), octets.end(), std::uint8_t{0});
  octets.clear();
  octets.shrink_to_fit();
}

std::vector<std::uint8_t> encode_key_file(const KeyFile& file) {
  ByteWriter w;
  w.bytes(file.id);
  w.u64(file.octets.size());
  w.bytes(file.octets);
  // Metadata trailer.
  w.u64(file.length);
  w.u64(file.created_at);
  w.u64(file.expires_at);
  w.u8(static_cast<std::uint8_t>(file.state));
  w.str(file.app_id);
  w.str(file.purpose);
  w.u16(static_cast<std::uint16_t>(file.route.size()));
  for (NodeId n : file.route) w.u16(n);
  w.u16(static_cast<std::uint16_t>(file.draws.size()));
  for (const auto& d : file.draws) {
    w.str(d.link);
    w.u64(d.offset);
    w.u64(d.length);
  }
  return w.take();
}

KeyFile decode_key_file(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  KeyFile f;
  auto id = r.bytes(16);
  std::copy(id.begin(), id.end(), f.id.begin());
  const std::uint64_t n = r.u64();
  auto octets = r.bytes(n);
  f.octets.assign(octets.begin(), octets.end());
  f.length = r.u64();
  f.created_at = r.u64();
  f.expires_at = r.u64();
  const std::uint8_t state = r.u8();
  if (state > static_cast<std::uint8_t>(KeyState::kExpired)) fail(ErrorCode::kMalformed, "bad key state");
  f.state = static_cast<KeyState>(state);
  f.app_id = r.str();
  f.purpose = r.str();
  const std::uint16_t hops = r.u16();
  for (std::uint16_t i = 0; i < hops; ++i) f.route.push_back(r.u16());
  const std::uint16_t draws = r.u16();
  for (std::uint16_t i = 0; i < draws; ++i) {
    LinkDraw d;
    d.link = r.str();
    d.offset = r.u64();
    d.length = r.u64();
    f.draws.push_back(std::move(d));
  }
  r.expect_end();
  return f;
}

void write_key_file(const std::filesystem::path& path, const KeyFile& file) {
  const auto bytes = encode_key_file(file);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, "cannot write " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::kIo, "short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

KeyFile read_key_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_key_file(bytes);
}

std::string format_audit_line(const AuditRecord& r) {
  std::ostringstream os;
  os << "at=" << r.at << " event=" << r.event << " key=" << to_string(r.key) << " app=" << r.app_id
     << " peer_app=" << (r.peer_app.empty() ? "-" : r.peer_app) << " node=" << r.node << " peer=" << r.peer
     << " octets=" << r.octets << " purpose=" << (r.purpose.empty() ? "-" : r.purpose);
  return os.str();
}

AuditRecord parse_audit_line(std::string_view line) {
  AuditRecord r;
  std::istringstream is{std::string(line)};
  std::string field;
  bool saw_key = false;
  while (is >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) fail(ErrorCode::kMalformed, "audit field without '=': " + field);
    const std::string name = field.substr(0, eq);
    const std::string value = field.substr(eq + 1);
    try {
      if (name == "at") r.at = std::stoull(value);
      else if (name == "event") r.event = value;
      else if (name == "key") {
        const auto bytes = from_hex(value);
        if (bytes.size() != 16) fail(ErrorCode::kMalformed, "audit key id must be 16 octets");
        std::copy(bytes.begin(), bytes.end(), r.key.begin());
        saw_key = true;
      } else if (name == "app") r.app_id = value;
      else if (name == "peer_app") r.peer_app = value == "-" ? "" : value;
      else if (name == "node") r.node = static_cast<NodeId>(std::stoul(value));
      else if (name == "peer") r.peer = static_cast<NodeId>(std::stoul(value));
      else if (name == "octets") r.octets = std::stoull(value);
      else if (name == "purpose") r.purpose = value == "-" ? "" : value;
    } catch (const std::logic_error&) {
      fail(ErrorCode::kMalformed, "bad audit value in " + field);
    }
  }
  if (!saw_key || r.event.empty()) fail(ErrorCode::kMalformed, "audit line lacks key or event");
  return r;
}

std::vector<AuditRecord> read_audit_log(const std::filesystem::path& path) {
  std::vector<AuditRecord> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    out.push_back(parse_audit_line(line));
  }
  return out;
}

}  // namespace qss
