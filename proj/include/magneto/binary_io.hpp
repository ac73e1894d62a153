#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "magneto/error.hpp"

namespace magneto {

using Bytes = std::vector<std::uint8_t>;

// Little-endian writer. All multi-byte values are emitted LSB first
// regardless of host byte order.
class ByteWriter {
public:
    void put_magic(std::string_view magic);
    void put_u8(std::uint8_t v) { buf_.push_back(v); }
    void put_u16(std::uint16_t v);
    void put_u32(std::uint32_t v);
    void put_u64(std::uint64_t v);
    void put_f32(float v) { put_u32(std::bit_cast<std::uint32_t>(v)); }
    void put_f64(double v) { put_u64(std::bit_cast<std::uint64_t>(v)); }
    void put_bytes(std::span<const std::uint8_t> bytes);
    // u32 length prefix followed by the raw characters.
    void put_string(std::string_view s);

    const Bytes& bytes() const& { return buf_; }
    Bytes bytes() && { return std::move(buf_); }

private:
    Bytes buf_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

    void expect_magic(std::string_view magic);
    std::uint8_t get_u8();
    std::uint16_t get_u16();
    std::uint32_t get_u32();
    std::uint64_t get_u64();
    float get_f32() { return std::bit_cast<float>(get_u32()); }
    double get_f64() { return std::bit_cast<double>(get_u64()); }
    std::span<const std::uint8_t> get_bytes(std::size_t n);
    std::string get_string();

    std::size_t remaining() const { return data_.size() - pos_; }
    bool at_end() const { return pos_ == data_.size(); }

private:
    void need(std::size_t n) const;

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

// 64-bit FNV-1a, rendered as 16 lowercase hex digits by digest_hex.
std::uint64_t fnv1a64(std::span<const std::uint8_t> data,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);
std::string digest_hex(std::uint64_t digest);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data);
void write_text(const std::filesystem::path& path, std::string_view text);

} // namespace magneto
