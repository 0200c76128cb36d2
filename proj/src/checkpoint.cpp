// SPDX-License-Identifier: Apache-2.0
#include "salatt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "salatt/regions.hpp"

namespace salatt {

namespace {
void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>((bits >> (8 * k)) & 0xff));
}

std::uint32_t narrow(std::size_t v, const char* what) {
  if (v > 0xffffffffULL) throw ArgumentError(std::string(what) + " does not fit in 32 bits");
  return static_cast<std::uint32_t>(v);
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    const auto* p = data();
    pos_ += 4;
    return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
           (std::uint32_t{p[3]} << 24);
  }

  double f64(const char* what) {
    need(8, what);
    const auto* p = data();
    pos_ += 8;
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= std::uint64_t{p[k]} << (8 * k);
    return std::bit_cast<double>(bits);
  }

  std::string text(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const unsigned char* data() const { return reinterpret_cast<const unsigned char*>(bytes_.data()) + pos_; }
  void need(std::size_t n, const char* what) const {
    if (remaining() < n) throw FormatError(std::string("checkpoint truncated in ") + what, pos_);
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};
}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params) {
  std::string out(kCheckpointMagic, 8);
  put_u32(out, narrow(params.size(), "tensor count"));
  for (const auto& [name, entry] : params) {
    put_u32(out, narrow(name.size(), "tensor name length"));
    out += name;
    const Shape& shape = entry.value.shape();
    put_u32(out, narrow(shape.size(), "tensor rank"));
    for (std::size_t d : shape) put_u32(out, narrow(d, "tensor dimension"));
    for (double v : entry.value.data()) put_f64(out, v);
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw std::runtime_error("cannot write checkpoint " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw std::runtime_error("write failed for " + path.string());
}

ParamStore load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  const std::string bytes(std::istreambuf_iterator<char>(in), {});
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
    throw FormatError("bad checkpoint magic", 0);
  }
  Reader r(bytes);
  r.text(8, "magic");
  const std::uint32_t count = r.u32("tensor count");
  ParamStore params;
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::size_t start = r.pos();
    const std::string name = r.text(r.u32("name length"), "tensor name");
    const std::uint32_t rank = r.u32("tensor rank");
    Shape shape;
    std::size_t numel = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      shape.push_back(r.u32("tensor dims"));
      numel *= shape.back();
    }
    if (numel > r.remaining() / 8) throw FormatError("checkpoint truncated in tensor '" + name + "'", r.pos());
    Tensor value(shape);
    for (double& v : value.data()) v = r.f64("tensor values");
    if (params.contains(name)) throw FormatError("duplicate tensor '" + name + "' in checkpoint", start);
    params.add(name, std::move(value));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after last checkpoint tensor", r.pos());
  return params;
}

}  // namespace salatt
