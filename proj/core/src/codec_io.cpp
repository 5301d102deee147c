// SPDX-License-Identifier: Apache-2.0
#include "dynasc/codec_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "dynasc/errors.hpp"

namespace dynasc {
namespace {

constexpr char kMagic[4] = {'D', 'S', 'C', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return std::bit_cast<double>(v);
  }
  std::string str(std::size_t len) {
    need(len);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), len);
    pos_ += len;
    return s;
  }
  bool exhausted() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t count) const {
    if (pos_ + count > bytes_.size()) throw CorruptPayload("parameter container truncated");
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_params(const CodecParams& params) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  const CodecDims& dims = params.dims();
  put_u32(out, static_cast<std::uint32_t>(dims.patch_side));
  put_u32(out, static_cast<std::uint32_t>(dims.token_len));
  put_u32(out, static_cast<std::uint32_t>(dims.stages));
  put_u32(out, static_cast<std::uint32_t>(dims.pred_hidden));
  put_u32(out, static_cast<std::uint32_t>(params.layout().size()));
  for (const CodecParams::TensorView& view : params.layout()) {
    out.push_back(static_cast<std::uint8_t>(view.name.size()));
    out.insert(out.end(), view.name.begin(), view.name.end());
    put_u32(out, static_cast<std::uint32_t>(view.rows));
    put_u32(out, static_cast<std::uint32_t>(view.cols));
    const double* data = params.values().data() + view.offset;
    for (std::size_t i = 0; i < view.size(); ++i) put_f64(out, data[i]);
  }
  return out;
}

CodecParams parse_params(const std::vector<std::uint8_t>& bytes) {
  Reader reader(bytes);
  if (reader.str(4) != std::string(kMagic, 4)) {
    throw CorruptPayload("unsupported parameter container magic");
  }
  CodecDims dims;
  dims.patch_side = static_cast<int>(reader.u32());
  dims.token_len = static_cast<int>(reader.u32());
  dims.stages = static_cast<int>(reader.u32());
  dims.pred_hidden = static_cast<int>(reader.u32());
  if (dims.patch_side <= 0 || dims.patch_side > 1024 || dims.token_len <= 0 ||
      dims.token_len > 65536 || dims.stages <= 0 || dims.stages > 64 || dims.pred_hidden <= 0 ||
      dims.pred_hidden > 65536) {
    throw CorruptPayload("parameter container declares implausible dims");
  }

  CodecParams params(dims);
  const std::uint32_t count = reader.u32();
  if (count != params.layout().size()) {
    throw CorruptPayload("parameter container tensor count mismatch");
  }
  for (const CodecParams::TensorView& view : params.layout()) {
    const std::uint8_t name_len = reader.u8();
    if (reader.str(name_len) != view.name) {
      throw CorruptPayload("unexpected tensor name in parameter container");
    }
    if (static_cast<int>(reader.u32()) != view.rows ||
        static_cast<int>(reader.u32()) != view.cols) {
      throw CorruptPayload("tensor shape mismatch in parameter container");
    }
    double* data = params.values().data() + view.offset;
    for (std::size_t i = 0; i < view.size(); ++i) data[i] = reader.f64();
  }
  if (!reader.exhausted()) throw CorruptPayload("trailing bytes in parameter container");
  return params;
}

void save_params(const CodecParams& params, const std::string& path) {
  const std::vector<std::uint8_t> bytes = serialize_params(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

CodecParams load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_params(bytes);
}

}  // namespace dynasc
