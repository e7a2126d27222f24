#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "fednlp/tensor/errors.hpp"
#include "fednlp/transport/wire.hpp"
#include "message_gen.hpp"

using namespace fednlp;
using namespace fednlp::transport;
using Bytes = std::vector<std::uint8_t>;

namespace {

Bytes read_golden(const std::string& name) {
  std::ifstream in(std::string(FEDNLP_GOLDEN_DIR) + "/" + name + ".hex");
  EXPECT_TRUE(in) << name;
  Bytes out;
  std::string tok;
  while (in >> tok) out.push_back(static_cast<std::uint8_t>(std::stoul(tok, nullptr, 16)));
  return out;
}

fl::FlMessage ok(const DecodeResult& r) {
  if (auto* e = std::get_if<DecodeError>(&r)) {
    ADD_FAILURE() << decode_error_name(e->code) << ": " << e->detail;
    static const fl::FlMessage dummy = fl::Shutdown{};
    return dummy;
  }
  return std::get<fl::FlMessage>(r);
}

DecodeErrorCode err(const DecodeResult& r) {
  if (!std::holds_alternative<DecodeError>(r)) {
    ADD_FAILURE() << "decoded unexpectedly";
    return DecodeErrorCode::truncated;
  }
  return std::get<DecodeError>(r).code;
}

ParameterSet small_params() {
  ParameterSet p;
  p.add("w", Tensor({2, 3}, {0.5, -1.25, 3.0, 0.0, 0.125, -2.0}));
  p.add("b", Tensor({3}, {1.0, 2.0, 3.0}));
  return p;
}

void put_u32(Bytes& b, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

// Rewrites the payload of `frame` and fixes the length and checksum.
Bytes reframe(const Bytes& frame, const Bytes& payload) {
  Bytes out(kHeaderSize + payload.size() + kTrailerSize);
  std::copy_n(frame.begin(), kHeaderSize, out.begin());
  put_u32(out, 7, static_cast<std::uint32_t>(payload.size()));
  for (std::size_t i = 0; i < payload.size(); ++i) out[kHeaderSize + i] = payload[i];
  put_u32(out, out.size() - 4, crc32(payload));
  return out;
}

Bytes payload_of(const Bytes& frame) { return Bytes(frame.begin() + kHeaderSize, frame.end() - kTrailerSize); }

}  // namespace

TEST(WireGolden, MatchesReferenceEncoder) {
  const std::vector<std::pair<std::string, fl::FlMessage>> cases{
      {"hello", fl::Hello{"site-0", "fednlp-demo-token"}},
      {"provisioned", fl::Provisioned{3, 0x0123456789ABCDEFull, {10, 1}}},
      {"global_model", fl::GlobalModel{2, small_params(), {1, 0.01, true}, 0xDEADBEEFCAFEF00Dull}},
      {"local_update", [] {
         fl::LocalUpdate u{1, 2, {}, 290, {0.5, 0.75, 0.625, 0.8125}, 42};
         u.params.add("b", Tensor({2}, {0.25, -0.25}));
         return fl::FlMessage{u};
       }()},
      {"round_complete", fl::RoundComplete{3, {1.5, 0.5, 2.25, 0.25}, 7}},
      {"shutdown", fl::Shutdown{""}},
      {"error", fl::Error{fl::ErrorCode::stale_round, "round 3 expected"}},
  };
  for (const auto& [name, msg] : cases) {
    const Bytes golden = read_golden(name);
    EXPECT_EQ(encode_message(msg), golden) << name;
    EXPECT_EQ(ok(decode_message(golden)), msg) << name;
  }
}

TEST(WireGolden, ShutdownBytesLiteral) {
  const Bytes want{0x46, 0x4C, 0x4E, 0x50, 0x01, 0x00, 0x06, 0x04, 0x00, 0x00,
                   0x00, 0x00, 0x00, 0x00, 0x00, 0x1C, 0xDF, 0x44, 0x21};
  EXPECT_EQ(encode_message(fl::Shutdown{""}), want);
}

TEST(WireCrc, KnownVector) {
  const std::string s = "123456789";
  EXPECT_EQ(crc32({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()}), 0xCBF43926u);
  EXPECT_EQ(crc32({}), 0u);
}

TEST(WireRoundTrip, RandomMessages) {
  Rng rng(1);
  for (int i = 0; i < 2000; ++i) {
    auto msg = fednlp::testing::random_message(rng);
    auto bytes = encode_message(msg);
    const auto& back = ok(decode_message(bytes));
    EXPECT_EQ(back, msg);
    EXPECT_EQ(encode_message(back), bytes);
    EXPECT_EQ(fl::message_type(back), fl::message_type(msg));
    EXPECT_EQ(bytes.size(), kHeaderSize + encode_payload(msg).size() + kTrailerSize);
  }
}

TEST(WireRoundTrip, ParametersTravelAsF32) {
  ParameterSet p;
  p.add("x", Tensor({3}, {0.1, 1.0 / 3.0, 1e-40}));
  auto back = std::get<fl::GlobalModel>(ok(decode_message(encode_message(fl::GlobalModel{1, p, {}, 0})))).params;
  EXPECT_EQ(back, quantize_to_f32(p));
  EXPECT_EQ(back.at("x")[0], static_cast<double>(0.1f));
}

TEST(WireRoundTrip, SpecialDoublesInMetricsAreBitExact) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  fl::RoundComplete m{1, {nan, -0.0, std::numeric_limits<double>::infinity(), 5e-324}, 9};
  auto back = std::get<fl::RoundComplete>(ok(decode_message(encode_message(m))));
  EXPECT_EQ(back, m);
  EXPECT_TRUE(std::isnan(back.global_metrics.val_loss));
  EXPECT_TRUE(std::signbit(back.global_metrics.val_accuracy));
}

TEST(WireEncode, RejectsNonFiniteParameters) {
  ParameterSet p;
  p.add("x", Tensor({2}, {1.0, std::numeric_limits<double>::infinity()}));
  EXPECT_THROW(encode_message(fl::GlobalModel{1, p, {}, 0}), UsageError);
  ParameterSet q;
  q.add("y", Tensor({1}, {1e39}));  // overflows f32
  EXPECT_THROW(encode_message(fl::LocalUpdate{0, 1, q, 1, {}, 0}), UsageError);
}

TEST(WireDecode, HeaderErrors) {
  const Bytes good = encode_message(fl::Shutdown{"bye"});
  EXPECT_EQ(err(decode_message(Bytes(good.begin(), good.begin() + 5))), DecodeErrorCode::truncated);
  EXPECT_EQ(err(decode_message({})), DecodeErrorCode::truncated);

  Bytes b = good;
  b[0] = 'X';
  EXPECT_EQ(err(decode_message(b)), DecodeErrorCode::bad_magic);
  b = good;
  b[4] = 2;
  EXPECT_EQ(err(decode_message(b)), DecodeErrorCode::unsupported_version);
  for (std::uint8_t t : {0, 8, 255}) {
    b = good;
    b[6] = t;
    EXPECT_EQ(err(decode_message(b)), DecodeErrorCode::unknown_type) << int(t);
  }
  b = good;
  put_u32(b, 7, 0xFFFFFFF0u);
  EXPECT_EQ(err(decode_message(b)), DecodeErrorCode::oversized);
  EXPECT_EQ(err(decode_message(good, good.size() - 1)), DecodeErrorCode::oversized);
  EXPECT_FALSE(std::holds_alternative<DecodeError>(decode_message(good, good.size())));
}

TEST(WireDecode, FramingErrors) {
  const Bytes good = encode_message(fl::Shutdown{"bye"});
  EXPECT_EQ(err(decode_message(Bytes(good.begin(), good.end() - 1))), DecodeErrorCode::truncated);
  Bytes extra = good;
  extra.push_back(0);
  EXPECT_EQ(err(decode_message(extra)), DecodeErrorCode::trailing_bytes);
  Bytes bad_crc = good;
  bad_crc.back() ^= 1;
  EXPECT_EQ(err(decode_message(bad_crc)), DecodeErrorCode::checksum_mismatch);
  Bytes bad_payload = good;
  bad_payload[kHeaderSize + 4] ^= 0x20;
  EXPECT_EQ(err(decode_message(bad_payload)), DecodeErrorCode::checksum_mismatch);
}

TEST(WireDecode, MalformedPayloads) {
  const Bytes frame = encode_message(fl::Shutdown{"bye"});
  Bytes p = payload_of(frame);
  // string length runs past the payload
  Bytes longer = p;
  put_u32(longer, 0, 100);
  EXPECT_EQ(err(decode_message(reframe(frame, longer))), DecodeErrorCode::malformed_payload);
  // unread bytes after the last field
  Bytes padded = p;
  padded.push_back(0);
  EXPECT_EQ(err(decode_message(reframe(frame, padded))), DecodeErrorCode::malformed_payload);
  // tensor data shorter than its shape
  const Bytes gm = encode_message(fl::GlobalModel{1, small_params(), {}, 0});
  Bytes gp = payload_of(gm);
  gp.resize(gp.size() - 2);
  EXPECT_EQ(err(decode_message(reframe(gm, gp))), DecodeErrorCode::malformed_payload);
}

TEST(WireDecode, InvalidValues) {
  // GlobalModel payload: round(4) epochs(4) lr(8) reset(1) tag(8) count(4) then "w": len(2) 'w' rank(1) dims
  const Bytes gm = encode_message(fl::GlobalModel{1, small_params(), {}, 0});
  const Bytes p = payload_of(gm);
  const std::size_t reset_at = 16, first_tensor = 29, rank_at = first_tensor + 3, dim0 = rank_at + 1,
                    value0 = dim0 + 8;

  Bytes b = p;
  b[reset_at] = 2;
  EXPECT_EQ(err(decode_message(reframe(gm, b))), DecodeErrorCode::invalid_value);
  b = p;
  b[rank_at] = 0;
  EXPECT_EQ(err(decode_message(reframe(gm, b))), DecodeErrorCode::invalid_value);
  b = p;
  put_u32(b, dim0, 0);
  EXPECT_EQ(err(decode_message(reframe(gm, b))), DecodeErrorCode::invalid_value);
  b = p;
  put_u32(b, value0, 0x7FC00000u);  // f32 NaN
  EXPECT_EQ(err(decode_message(reframe(gm, b))), DecodeErrorCode::invalid_value);
  b = p;
  put_u32(b, value0, 0x7F800000u);  // f32 +inf
  EXPECT_EQ(err(decode_message(reframe(gm, b))), DecodeErrorCode::invalid_value);

  ParameterSet dup;
  dup.add("a", Tensor({1}, {1.0}));
  dup.add("b", Tensor({1}, {2.0}));
  const Bytes dm = encode_message(fl::GlobalModel{1, dup, {}, 0});
  Bytes dp = payload_of(dm);
  dp[dp.size() - 10] = 'a';  // second name
  EXPECT_EQ(err(decode_message(reframe(dm, dp))), DecodeErrorCode::invalid_value);

  const Bytes em = encode_message(fl::Error{fl::ErrorCode::aborted, "x"});
  Bytes ep = payload_of(em);
  ep[0] = 99;
  EXPECT_EQ(err(decode_message(reframe(em, ep))), DecodeErrorCode::invalid_value);
  ep[0] = 0;
  EXPECT_EQ(err(decode_message(reframe(em, ep))), DecodeErrorCode::invalid_value);
}

TEST(WireDecode, ParseHeader) {
  const Bytes good = encode_message(fl::Hello{"a", "b"});
  auto h = parse_header(good);
  ASSERT_TRUE(std::holds_alternative<FrameHeader>(h));
  EXPECT_EQ(std::get<FrameHeader>(h).type, fl::MessageType::hello);
  EXPECT_EQ(std::get<FrameHeader>(h).frame_size(), good.size());
}

TEST(FrameAssembler, ByteAtATimeAndChunked) {
  Rng rng(2);
  std::vector<fl::FlMessage> msgs;
  Bytes stream;
  for (int i = 0; i < 50; ++i) {
    msgs.push_back(fednlp::testing::random_message(rng));
    auto f = encode_message(msgs.back());
    stream.insert(stream.end(), f.begin(), f.end());
  }
  for (std::size_t chunk : {std::size_t{1}, std::size_t{7}, std::size_t{1000}, stream.size()}) {
    FrameAssembler a;
    std::vector<fl::FlMessage> got;
    for (std::size_t at = 0; at < stream.size(); at += chunk) {
      const std::size_t n = std::min(chunk, stream.size() - at);
      a.feed({stream.data() + at, n});
      while (auto r = a.next()) got.push_back(ok(*r));
    }
    EXPECT_EQ(got, msgs) << chunk;
    EXPECT_EQ(a.buffered(), 0u);
  }
}

TEST(FrameAssembler, PayloadErrorDoesNotPoison) {
  Bytes bad = encode_message(fl::Shutdown{"x"});
  bad.back() ^= 0xFF;
  Bytes good = encode_message(fl::Shutdown{"y"});
  FrameAssembler a;
  a.feed(bad);
  a.feed(good);
  auto r1 = a.next();
  ASSERT_TRUE(r1);
  EXPECT_EQ(err(*r1), DecodeErrorCode::checksum_mismatch);
  auto r2 = a.next();
  ASSERT_TRUE(r2);
  EXPECT_EQ(ok(*r2), fl::FlMessage{fl::Shutdown{"y"}});
  EXPECT_FALSE(a.next());
}

TEST(FrameAssembler, HeaderErrorPoisonsStream) {
  Bytes junk{'J', 'U', 'N', 'K', 0, 0, 0, 0, 0, 0, 0};
  FrameAssembler a;
  a.feed(junk);
  auto r = a.next();
  ASSERT_TRUE(r);
  EXPECT_EQ(err(*r), DecodeErrorCode::bad_magic);
  a.feed(encode_message(fl::Shutdown{}));
  EXPECT_FALSE(a.next());
}

TEST(FrameAssembler, WaitsForCompleteFrame) {
  Bytes f = encode_message(fl::Hello{"n", "t"});
  FrameAssembler a;
  a.feed({f.data(), f.size() - 1});
  EXPECT_FALSE(a.next());
  a.feed({f.data() + f.size() - 1, 1});
  EXPECT_TRUE(a.next());
}

TEST(WireFuzz, RandomAndMutatedInputsYieldMessageOrTypedError) {
  Rng rng(3);
  std::vector<Bytes> seeds;
  for (int i = 0; i < 64; ++i) seeds.push_back(encode_message(fednlp::testing::random_message(rng)));
  std::size_t messages = 0, errors = 0;
  for (int i = 0; i < 10000; ++i) {
    Bytes input;
    if (i % 4 == 0) {
      input = fednlp::testing::random_bytes(rng, 64);
      if (i % 8 == 0 && input.size() >= 4) std::copy(kMagic.begin(), kMagic.end(), input.begin());
    } else {
      input = seeds[rng.below(seeds.size())];
      for (std::size_t k = 1 + rng.below(3); k > 0; --k) input = fednlp::testing::mutate(std::move(input), rng);
    }
    DecodeResult r;
    ASSERT_NO_THROW(r = decode_message(input, 1 << 16));
    if (std::holds_alternative<DecodeError>(r)) {
      ++errors;
      EXPECT_FALSE(decode_error_name(std::get<DecodeError>(r).code).empty());
    } else {
      ++messages;
      EXPECT_EQ(encode_message(std::get<fl::FlMessage>(r)), input);
    }
    FrameAssembler a(1 << 16);
    ASSERT_NO_THROW({
      a.feed(input);
      while (a.next()) {
      }
    });
  }
  EXPECT_GT(errors, 0u);
  EXPECT_EQ(messages + errors, 10000u);
}
