#include <gtest/gtest.h>

#include <random>

#include "biokm/wire_protocol.hpp"
#include "oracles/frame_gen.hpp"

using namespace biokm;
using namespace biokm::wire;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorCode::IoError;
}

}  // namespace

TEST(Encode, LoginLine) {
    EXPECT_EQ(encode_frame({Command::Login, {"lady_engineer"}}), "LOGIN lady_engineer\r\n");
}

TEST(Encode, MsgCarriesPayloadAfterLine) {
    EXPECT_EQ(encode_frame({Command::Msg, {"bob", "5"}}, "hello"), "MSG bob 5\r\nhello");
}

TEST(Encode, ArityIsEnforced) {
    EXPECT_EQ(code_of([] { encode_frame({Command::List, {"x"}}); }), ErrorCode::ArityViolation);
    EXPECT_EQ(code_of([] { encode_frame({Command::FileOffer, {"a", "b"}}); }), ErrorCode::ArityViolation);
    EXPECT_EQ(code_of([] { encode_frame({Command::Ok, {"a", "b"}}); }), ErrorCode::ArityViolation);
    EXPECT_NO_THROW(encode_frame({Command::Ok, {}}));
    EXPECT_NO_THROW(encode_frame({Command::Ok, {"x"}}));
}

TEST(Encode, TokensRejectSeparators) {
    EXPECT_EQ(code_of([] { encode_frame({Command::Login, {"a b"}}); }), ErrorCode::TokenError);
    EXPECT_EQ(code_of([] { encode_frame({Command::Login, {"a\rb"}}); }), ErrorCode::TokenError);
    EXPECT_EQ(code_of([] { encode_frame({Command::Login, {"a\nb"}}); }), ErrorCode::TokenError);
    EXPECT_EQ(code_of([] { encode_frame({Command::Login, {""}}); }), ErrorCode::TokenError);
}

TEST(Encode, PayloadMustMatchDeclaredLength) {
    EXPECT_EQ(code_of([] { encode_frame({Command::Msg, {"bob", "4"}}, "hello"); }), ErrorCode::PayloadLengthError);
    EXPECT_EQ(code_of([] { encode_frame({Command::Msg, {"bob", "65537"}}, std::string(65537, 'x')); }),
              ErrorCode::PayloadLengthError);
    EXPECT_EQ(code_of([] { encode_frame({Command::Login, {"bob"}}, "x"); }), ErrorCode::PayloadLengthError);
}

TEST(Decode, LoginConsumesWholeLine) {
    auto d = decode_frame("LOGIN alice\r\n");
    ASSERT_TRUE(d);
    EXPECT_EQ(d->frame, (Frame{Command::Login, {"alice"}}));
    EXPECT_EQ(d->payload, "");
    EXPECT_EQ(d->consumed, 13u);
}

TEST(Decode, IncompletePayloadNeedsMore) {
    EXPECT_FALSE(decode_frame("MSG bob 5\r\nhel"));
    EXPECT_FALSE(decode_frame("MSG bob 5\r"));
    EXPECT_FALSE(decode_frame("LOG"));
    EXPECT_FALSE(decode_frame(""));
}

TEST(Decode, StopsAtFrameBoundary) {
    auto d = decode_frame("MSG bob 2\r\nhiPING x\r\n");
    ASSERT_TRUE(d);
    EXPECT_EQ(d->payload, "hi");
    EXPECT_EQ(d->consumed, 13u);
}

TEST(Decode, PayloadMayContainCrLf) {
    auto d = decode_frame("MSG bob 4\r\n\r\n\r\n");
    ASSERT_TRUE(d);
    EXPECT_EQ(d->payload, "\r\n\r\n");
}

TEST(Decode, MalformedInputs) {
    for (const char* bad : {"HELLO x\r\n", "LIST x\r\n", "LOGIN\r\n", "LOGIN a  b\r\n", "LOGIN a\n", " LOGIN a\r\n",
                            "LOGIN a \r\n", "\r\n", "FILE_OFFER a b\r\n", "LOGIN a\rb\r\n", "login a\r\n"}) {
        EXPECT_EQ(code_of([&] { decode_frame(bad); }), ErrorCode::MalformedFrame) << bad;
    }
    EXPECT_EQ(code_of([] { decode_frame("LOGIN \xff\xfe\r\n"); }), ErrorCode::MalformedFrame);
    EXPECT_EQ(code_of([] { decode_frame(std::string(5000, 'A')); }), ErrorCode::MalformedFrame);
}

TEST(Decode, PayloadLengthToken) {
    for (const char* bad : {"MSG bob x\r\n", "MSG bob -1\r\n", "MSG bob 65537\r\n", "MSG bob 1e3\r\n", "MSG bob +5\r\n"}) {
        EXPECT_EQ(code_of([&] { decode_frame(bad); }), ErrorCode::PayloadLengthError) << bad;
    }
    EXPECT_FALSE(decode_frame("MSG bob 65536\r\n"));  // legal, just incomplete
}

TEST(RoundTrip, SeededRandomFrames) {
    std::mt19937_64 rng(20240611);
    for (int k = 0; k < 1000; ++k) {
        auto [frame, payload] = oracle::random_frame(rng);
        const std::string bytes = encode_frame(frame, payload);
        auto d = decode_frame(bytes);
        ASSERT_TRUE(d) << k;
        EXPECT_EQ(d->frame, frame) << k;
        EXPECT_EQ(d->payload, payload) << k;
        EXPECT_EQ(d->consumed, bytes.size()) << k;
    }
}

TEST(RoundTrip, ByteByByteMatchesWhole) {
    std::mt19937_64 rng(99);
    std::string stream;
    std::vector<std::pair<Frame, std::string>> sent;
    for (int k = 0; k < 200; ++k) {
        auto fp = oracle::random_frame(rng);
        if (fp.second.size() > 2000) continue;  // keep the byte loop quick
        stream += encode_frame(fp.first, fp.second);
        sent.push_back(std::move(fp));
    }

    FrameReader whole;
    whole.feed(stream);
    std::vector<Decoded> a;
    while (auto d = whole.next()) a.push_back(*d);

    FrameReader trickle;
    std::vector<Decoded> b;
    for (char c : stream) {
        trickle.feed(std::string_view(&c, 1));
        while (auto d = trickle.next()) b.push_back(*d);
    }

    ASSERT_EQ(a.size(), sent.size());
    ASSERT_EQ(b.size(), sent.size());
    for (std::size_t k = 0; k < sent.size(); ++k) {
        EXPECT_EQ(a[k].frame, sent[k].first);
        EXPECT_EQ(b[k].frame, sent[k].first);
        EXPECT_EQ(b[k].payload, sent[k].second);
        EXPECT_EQ(a[k].consumed, b[k].consumed);
    }
    EXPECT_EQ(trickle.buffered(), 0u);
}

TEST(RoundTrip, RandomSplitsMatchWhole) {
    std::mt19937_64 rng(5);
    std::string stream;
    std::size_t frames = 0;
    for (int k = 0; k < 300; ++k) {
        auto [f, p] = oracle::random_frame(rng);
        stream += encode_frame(f, p);
        ++frames;
    }
    FrameReader r;
    std::size_t got = 0;
    for (std::size_t off = 0; off < stream.size();) {
        const std::size_t n = std::min<std::size_t>(1 + rng() % 7000, stream.size() - off);
        r.feed(std::string_view(stream).substr(off, n));
        off += n;
        while (r.next()) ++got;
    }
    EXPECT_EQ(got, frames);
}

TEST(Chunk, EncodeDecode) {
    const std::string c = encode_chunk("abc");
    ASSERT_EQ(c.size(), 7u);
    EXPECT_EQ(c.substr(0, 4), std::string("\0\0\0\x03", 4));
    auto d = decode_chunk(c + "tail");
    ASSERT_TRUE(d);
    EXPECT_EQ(d->bytes, "abc");
    EXPECT_EQ(d->consumed, 7u);
    EXPECT_FALSE(d->is_terminator());
}

TEST(Chunk, TerminatorAndLimits) {
    auto t = decode_chunk(encode_chunk(""));
    ASSERT_TRUE(t);
    EXPECT_TRUE(t->is_terminator());
    EXPECT_FALSE(decode_chunk(std::string("\0\0", 2)));
    EXPECT_FALSE(decode_chunk(std::string("\0\0\0\x05" "ab", 6)));
    EXPECT_NO_THROW(encode_chunk(std::string(kMaxChunk, 'x')));
    EXPECT_EQ(code_of([] { encode_chunk(std::string(kMaxChunk + 1, 'x')); }), ErrorCode::ChunkTooLarge);
    EXPECT_EQ(code_of([] { decode_chunk(std::string("\0\x01\0\x01", 4)); }), ErrorCode::ChunkTooLarge);
}

TEST(Chunk, BigEndianPrefix) {
    const std::string c = encode_chunk(std::string(0x010203, 'x').substr(0, kMaxChunk));
    EXPECT_EQ(read_be32(c), kMaxChunk);
    EXPECT_EQ(read_be32(std::string("\x01\x02\x03\x04", 4)), 0x01020304u);
}
