#include "fednlp/transport/wire.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

#include "fednlp/tensor/errors.hpp"

namespace fednlp::transport {

namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { put_le(v, 2); }
  void u32(std::uint32_t v) { put_le(v, 4); }
  void u64(std::uint64_t v) { put_le(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    if (s.size() > std::numeric_limits<std::uint32_t>::max()) throw UsageError("encode: string too long");
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  void put_le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

struct Malformed {
  DecodeErrorCode code;
  std::string detail;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get_le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get_le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get_le(4)); }
  std::uint64_t u64() { return get_le(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::string short_str() {
    std::uint16_t n = u16();
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw Malformed{DecodeErrorCode::malformed_payload, "payload ends mid-field"};
  }
  std::uint64_t get_le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t{in_[pos_ + i]} << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void write_params(Writer& w, const ParameterSet& params) {
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string& name = params.name(i);
    const Tensor& t = params.tensor(i);
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) throw UsageError("encode: parameter name too long");
    if (t.rank() == 0 || t.rank() > 255) throw UsageError("encode: parameter '" + name + "' has unsupported rank");
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes({reinterpret_cast<const std::uint8_t*>(name.data()), name.size()});
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape()) {
      if (d > std::numeric_limits<std::uint32_t>::max()) throw UsageError("encode: dimension too large");
      w.u32(static_cast<std::uint32_t>(d));
    }
    for (double v : t.values()) {
      float f = static_cast<float>(v);
      if (!std::isfinite(f)) throw UsageError("encode: parameter '" + name + "' has a non-finite value");
      w.f32(f);
    }
  }
}

ParameterSet read_params(Reader& r) {
  ParameterSet params;
  std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.short_str();
    std::uint8_t rank = r.u8();
    if (rank == 0) throw Malformed{DecodeErrorCode::invalid_value, "tensor '" + name + "' has rank 0"};
    Shape shape(rank);
    std::uint64_t numel = 1;
    for (auto& d : shape) {
      d = r.u32();
      if (d == 0) throw Malformed{DecodeErrorCode::invalid_value, "tensor '" + name + "' has a zero dimension"};
      numel *= d;
      if (numel * 4 > r.remaining()) throw Malformed{DecodeErrorCode::malformed_payload, "tensor data exceeds payload"};
    }
    std::vector<double> data(numel);
    for (auto& v : data) {
      float f = r.f32();
      if (!std::isfinite(f)) throw Malformed{DecodeErrorCode::invalid_value, "tensor '" + name + "' has a non-finite value"};
      v = f;
    }
    if (params.contains(name)) throw Malformed{DecodeErrorCode::invalid_value, "duplicate tensor '" + name + "'"};
    params.add(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return params;
}

bool read_bool(Reader& r) {
  std::uint8_t b = r.u8();
  if (b > 1) throw Malformed{DecodeErrorCode::invalid_value, "boolean byte is not 0 or 1"};
  return b == 1;
}

void write_local_metrics(Writer& w, const fl::LocalMetrics& m) {
  w.f64(m.train_loss);
  w.f64(m.train_accuracy);
  w.f64(m.val_loss);
  w.f64(m.val_accuracy);
}

fl::LocalMetrics read_local_metrics(Reader& r) {
  fl::LocalMetrics m;
  m.train_loss = r.f64();
  m.train_accuracy = r.f64();
  m.val_loss = r.f64();
  m.val_accuracy = r.f64();
  return m;
}

struct PayloadWriter {
  Writer& w;
  void operator()(const fl::Hello& m) {
    w.str(m.client_name);
    w.str(m.auth_token);
  }
  void operator()(const fl::Provisioned& m) {
    w.u32(m.client_id);
    w.u64(m.session_key);
    w.u32(m.round_plan.total_rounds);
    w.u32(m.round_plan.local_epochs);
  }
  void operator()(const fl::GlobalModel& m) {
    w.u32(m.round);
    w.u32(m.directive.local_epochs);
    w.f64(m.directive.lr);
    w.u8(m.directive.reset_optimizer ? 1 : 0);
    w.u64(m.session_tag);
    write_params(w, m.params);
  }
  void operator()(const fl::LocalUpdate& m) {
    w.u32(m.client_id);
    w.u32(m.round);
    w.u64(m.n_samples);
    write_local_metrics(w, m.local_metrics);
    w.u64(m.session_tag);
    write_params(w, m.params);
  }
  void operator()(const fl::RoundComplete& m) {
    w.u32(m.round);
    w.f64(m.global_metrics.val_loss);
    w.f64(m.global_metrics.val_accuracy);
    w.f64(m.global_metrics.client_loss);
    w.f64(m.global_metrics.client_accuracy);
    w.u64(m.session_tag);
  }
  void operator()(const fl::Shutdown& m) { w.str(m.reason); }
  void operator()(const fl::Error& m) {
    w.u16(static_cast<std::uint16_t>(m.code));
    w.str(m.detail);
  }
};

fl::FlMessage read_payload(fl::MessageType type, Reader& r) {
  switch (type) {
    case fl::MessageType::hello: {
      fl::Hello m;
      m.client_name = r.str();
      m.auth_token = r.str();
      return m;
    }
    case fl::MessageType::provisioned: {
      fl::Provisioned m;
      m.client_id = r.u32();
      m.session_key = r.u64();
      m.round_plan.total_rounds = r.u32();
      m.round_plan.local_epochs = r.u32();
      return m;
    }
    case fl::MessageType::global_model: {
      fl::GlobalModel m;
      m.round = r.u32();
      m.directive.local_epochs = r.u32();
      m.directive.lr = r.f64();
      m.directive.reset_optimizer = read_bool(r);
      m.session_tag = r.u64();
      m.params = read_params(r);
      return m;
    }
    case fl::MessageType::local_update: {
      fl::LocalUpdate m;
      m.client_id = r.u32();
      m.round = r.u32();
      m.n_samples = r.u64();
      m.local_metrics = read_local_metrics(r);
      m.session_tag = r.u64();
      m.params = read_params(r);
      return m;
    }
    case fl::MessageType::round_complete: {
      fl::RoundComplete m;
      m.round = r.u32();
      m.global_metrics.val_loss = r.f64();
      m.global_metrics.val_accuracy = r.f64();
      m.global_metrics.client_loss = r.f64();
      m.global_metrics.client_accuracy = r.f64();
      m.session_tag = r.u64();
      return m;
    }
    case fl::MessageType::shutdown:
      return fl::Shutdown{r.str()};
    case fl::MessageType::error: {
      std::uint16_t code = r.u16();
      if (!fl::is_known_error_code(code)) throw Malformed{DecodeErrorCode::invalid_value, "unknown error code"};
      fl::Error m;
      m.code = static_cast<fl::ErrorCode>(code);
      m.detail = r.str();
      return m;
    }
  }
  throw Malformed{DecodeErrorCode::unknown_type, "unknown message type"};
}

std::uint32_t read_u32_le(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
}

}  // namespace

std::string_view decode_error_name(DecodeErrorCode code) {
  switch (code) {
    case DecodeErrorCode::truncated: return "truncated";
    case DecodeErrorCode::bad_magic: return "bad_magic";
    case DecodeErrorCode::unsupported_version: return "unsupported_version";
    case DecodeErrorCode::unknown_type: return "unknown_type";
    case DecodeErrorCode::checksum_mismatch: return "checksum_mismatch";
    case DecodeErrorCode::oversized: return "oversized";
    case DecodeErrorCode::malformed_payload: return "malformed_payload";
    case DecodeErrorCode::trailing_bytes: return "trailing_bytes";
    case DecodeErrorCode::invalid_value: return "invalid_value";
  }
  return "unknown";
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  const std::uint8_t* p = bytes.data();
  std::size_t left = bytes.size();
  while (left > 0) {
    auto chunk = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
    crc = ::crc32(crc, p, chunk);
    p += chunk;
    left -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> encode_payload(const fl::FlMessage& message) {
  Writer w;
  std::visit(PayloadWriter{w}, message);
  return w.take();
}

std::vector<std::uint8_t> encode_message(const fl::FlMessage& message) {
  std::vector<std::uint8_t> payload = encode_payload(message);
  if (payload.size() > std::numeric_limits<std::uint32_t>::max()) throw UsageError("encode: payload too large");
  Writer w;
  w.bytes(kMagic);
  w.u16(kWireVersion);
  w.u8(static_cast<std::uint8_t>(fl::message_type(message)));
  w.u32(static_cast<std::uint32_t>(payload.size()));
  w.bytes(payload);
  w.u32(crc32(payload));
  return w.take();
}

std::variant<FrameHeader, DecodeError> parse_header(std::span<const std::uint8_t> bytes, std::size_t frame_cap) {
  if (bytes.size() < kHeaderSize) return DecodeError{DecodeErrorCode::truncated, "incomplete header"};
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    return DecodeError{DecodeErrorCode::bad_magic, "frame does not start with FLNP"};
  }
  std::uint16_t version = static_cast<std::uint16_t>(bytes[4] | (bytes[5] << 8));
  if (version != kWireVersion) {
    return DecodeError{DecodeErrorCode::unsupported_version, "version " + std::to_string(version)};
  }
  if (!fl::is_known_message_type(bytes[6])) {
    return DecodeError{DecodeErrorCode::unknown_type, "type " + std::to_string(bytes[6])};
  }
  std::uint32_t len = read_u32_le(bytes.data() + 7);
  if (std::size_t{len} + kHeaderSize + kTrailerSize > frame_cap) {
    return DecodeError{DecodeErrorCode::oversized, "payload of " + std::to_string(len) + " bytes exceeds cap"};
  }
  return FrameHeader{static_cast<fl::MessageType>(bytes[6]), len};
}

DecodeResult decode_payload(fl::MessageType type, std::span<const std::uint8_t> payload) {
  Reader r(payload);
  try {
    fl::FlMessage m = read_payload(type, r);
    if (r.remaining() != 0) {
      return DecodeError{DecodeErrorCode::malformed_payload, std::to_string(r.remaining()) + " unread payload bytes"};
    }
    return m;
  } catch (const Malformed& e) {
    return DecodeError{e.code, e.detail};
  }
}

DecodeResult decode_message(std::span<const std::uint8_t> bytes, std::size_t frame_cap) {
  auto header = parse_header(bytes, frame_cap);
  if (auto* err = std::get_if<DecodeError>(&header)) return *err;
  const auto& h = std::get<FrameHeader>(header);
  if (bytes.size() < h.frame_size()) return DecodeError{DecodeErrorCode::truncated, "frame shorter than declared"};
  if (bytes.size() > h.frame_size()) {
    return DecodeError{DecodeErrorCode::trailing_bytes, std::to_string(bytes.size() - h.frame_size()) + " bytes after frame"};
  }
  auto payload = bytes.subspan(kHeaderSize, h.payload_len);
  std::uint32_t expected = read_u32_le(bytes.data() + kHeaderSize + h.payload_len);
  if (crc32(payload) != expected) return DecodeError{DecodeErrorCode::checksum_mismatch, "payload CRC-32 mismatch"};
  return decode_payload(h.type, payload);
}

void FrameAssembler::feed(std::span<const std::uint8_t> bytes) {
  if (offset_ > 0 && offset_ == buffer_.size()) {
    buffer_.clear();
    offset_ = 0;
  }
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<DecodeResult> FrameAssembler::next() {
  if (poisoned_) return std::nullopt;
  std::span<const std::uint8_t> pending(buffer_.data() + offset_, buffer_.size() - offset_);
  if (pending.size() < kHeaderSize) return std::nullopt;
  auto header = parse_header(pending, frame_cap_);
  if (auto* err = std::get_if<DecodeError>(&header)) {
    poisoned_ = true;
    return DecodeResult{*err};
  }
  std::size_t size = std::get<FrameHeader>(header).frame_size();
  if (pending.size() < size) return std::nullopt;
  DecodeResult result = decode_message(pending.first(size), frame_cap_);
  offset_ += size;
  if (offset_ == buffer_.size()) {
    buffer_.clear();
    offset_ = 0;
  }
  return result;
}

}  // namespace fednlp::transport
