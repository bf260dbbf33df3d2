#include "aan/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace aan {

namespace {

constexpr char kMagic[4] = {'A', 'A', 'N', 'C'};

std::array<std::uint32_t, 256> make_crc_table() {
  std::array<std::uint32_t, 256> t{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint32_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
    t[i] = c;
  }
  return t;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  put_u64(out, bits);
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  std::string path;

  void need(std::size_t n, const char* what) const {
    if (pos + n > buf.size()) {
      throw std::runtime_error(path + ": truncated checkpoint reading " + what + " at byte " + std::to_string(pos));
    }
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  double f64(const char* what) {
    const std::uint64_t bits = u64(what);
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed) {
  static const auto table = make_crc_table();
  std::uint32_t c = seed ^ 0xFFFFFFFFu;
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) c = table[(c ^ p[i]) & 0xFF] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t.value;
  }
  return nullptr;
}

const Tensor& Checkpoint::require(const std::string& name) const {
  const Tensor* t = find(name);
  if (!t) throw std::runtime_error("checkpoint is missing tensor record '" + name + "'");
  return *t;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, ck.version);

  std::string header;
  put_u64(header, ck.step);
  put_u64(header, ck.d_opt_step);
  put_u64(header, ck.g_opt_step);
  put_u32(header, static_cast<std::uint32_t>(ck.config_text.size()));
  header += ck.config_text;
  put_u32(header, static_cast<std::uint32_t>(ck.rng_state.size()));
  header += ck.rng_state;
  put_u32(out, static_cast<std::uint32_t>(header.size()));
  out += header;
  put_u32(out, crc32(header.data(), header.size()));

  put_u32(out, static_cast<std::uint32_t>(ck.tensors.size()));
  for (const auto& rec : ck.tensors) {
    std::string body;
    put_u32(body, static_cast<std::uint32_t>(rec.name.size()));
    body += rec.name;
    put_u32(body, static_cast<std::uint32_t>(rec.value.shape.size()));
    for (int d : rec.value.shape) put_u32(body, static_cast<std::uint32_t>(d));
    for (double v : rec.value.data) put_f64(body, v);
    put_u32(out, static_cast<std::uint32_t>(body.size()));
    out += body;
    put_u32(out, crc32(body.data(), body.size()));
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open checkpoint file " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("checkpoint write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint file " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r{buf, 0, path};

  const std::string magic = r.bytes(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw std::runtime_error(path + ": bad checkpoint magic (expected AANC)");
  }
  Checkpoint ck;
  ck.version = r.u32("version");
  if (ck.version != 1) {
    throw std::runtime_error(path + ": unsupported checkpoint version " + std::to_string(ck.version));
  }

  const std::uint32_t header_len = r.u32("header length");
  const std::string header = r.bytes(header_len, "header");
  const std::uint32_t header_crc = r.u32("header checksum");
  if (crc32(header.data(), header.size()) != header_crc) {
    throw std::runtime_error(path + ": header checksum failure");
  }
  Reader hr{header, 0, path};
  ck.step = hr.u64("step");
  ck.d_opt_step = hr.u64("d_opt_step");
  ck.g_opt_step = hr.u64("g_opt_step");
  ck.config_text = hr.bytes(hr.u32("config length"), "config");
  ck.rng_state = hr.bytes(hr.u32("rng length"), "rng state");

  const std::uint32_t n_records = r.u32("record count");
  ck.tensors.reserve(n_records);
  for (std::uint32_t i = 0; i < n_records; ++i) {
    const std::uint32_t body_len = r.u32("record length");
    const std::string body = r.bytes(body_len, "record body");
    const std::uint32_t rec_crc = r.u32("record checksum");
    Reader br{body, 0, path};
    NamedTensor rec;
    rec.name = br.bytes(br.u32("record name length"), "record name");
    if (crc32(body.data(), body.size()) != rec_crc) {
      throw std::runtime_error(path + ": checksum failure in tensor record '" + rec.name + "'");
    }
    const std::uint32_t ndim = br.u32("record rank");
    std::vector<int> shape(ndim);
    for (std::uint32_t d = 0; d < ndim; ++d) shape[d] = static_cast<int>(br.u32("record dim"));
    const std::int64_t numel = shape_numel(shape);
    std::vector<double> data(static_cast<std::size_t>(numel));
    for (std::int64_t e = 0; e < numel; ++e) data[static_cast<std::size_t>(e)] = br.f64("record payload");
    rec.value = Tensor(shape, std::move(data));
    ck.tensors.push_back(std::move(rec));
  }
  return ck;
}

}  // namespace aan
