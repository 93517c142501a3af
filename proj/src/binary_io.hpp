#pragma once

// Little-endian byte buffers for the on-disk formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "astnet/errors.hpp"

namespace astnet::io {

static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");

class ByteWriter {
public:
    void bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        buffer_.insert(buffer_.end(), p, p + n);
    }
    void u8(std::uint8_t v) { buffer_.push_back(v); }
    void u32(std::uint32_t v) { bytes(&v, sizeof v); }
    void u64(std::uint64_t v) { bytes(&v, sizeof v); }
    void f32(float v) { bytes(&v, sizeof v); }
    void f64(double v) { bytes(&v, sizeof v); }
    void real(double v, std::size_t width) {
        if (width == 4) f32(static_cast<float>(v));
        else f64(v);
    }
    void string(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    void magic(const char (&tag)[5]) { bytes(tag, 4); }

    const std::vector<std::uint8_t>& buffer() const noexcept { return buffer_; }
    std::size_t size() const noexcept { return buffer_.size(); }

private:
    std::vector<std::uint8_t> buffer_;
};

class ByteReader {
public:
    explicit ByteReader(std::vector<std::uint8_t> data) : data_(std::move(data)) {}

    std::size_t offset() const noexcept { return offset_; }
    std::size_t remaining() const noexcept { return data_.size() - offset_; }
    bool at_end() const noexcept { return offset_ == data_.size(); }

    void need(std::size_t n, const char* what) const {
        if (remaining() < n)
            throw FormatError(std::string("truncated file while reading ") + what, offset_);
    }
    void read(void* out, std::size_t n, const char* what) {
        need(n, what);
        std::memcpy(out, data_.data() + offset_, n);
        offset_ += n;
    }
    std::uint8_t u8(const char* what) {
        std::uint8_t v;
        read(&v, 1, what);
        return v;
    }
    std::uint32_t u32(const char* what) {
        std::uint32_t v;
        read(&v, 4, what);
        return v;
    }
    std::uint64_t u64(const char* what) {
        std::uint64_t v;
        read(&v, 8, what);
        return v;
    }
    double real(std::size_t width, const char* what) {
        if (width == 4) {
            float f;
            read(&f, 4, what);
            return f;
        }
        double d;
        read(&d, 8, what);
        return d;
    }
    std::string string(const char* what, std::size_t max_length = 1u << 20) {
        const std::size_t at = offset_;
        const std::uint32_t n = u32(what);
        if (n > max_length) throw FormatError(std::string("implausible length for ") + what, at);
        need(n, what);
        std::string s(reinterpret_cast<const char*>(data_.data() + offset_), n);
        offset_ += n;
        return s;
    }
    void expect_magic(const char (&tag)[5]) {
        char got[4];
        const std::size_t at = offset_;
        read(got, 4, "magic");
        if (std::memcmp(got, tag, 4) != 0)
            throw FormatError(std::string("bad magic, expected '") + tag + "'", at);
    }

private:
    std::vector<std::uint8_t> data_;
    std::size_t offset_ = 0;
};

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);

}  // namespace astnet::io
