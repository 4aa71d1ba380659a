#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace uqfair {

enum class Dtype : uint8_t { F32 = 0, F64 = 1, U8 = 2, I64 = 3 };

size_t dtype_size(Dtype d);

// Dense row-major tensor backed by a flat byte buffer (little-endian).
// On-disk format "UQT1":
//   bytes 0-3  magic 'U' 'Q' 'T' '1'
//   byte  4    dtype code (0=f32, 1=f64, 2=u8, 3=i64)
//   byte  5    ndim (1-5)
//   then ndim x u64 LE extents, then the row-major payload.
struct Tensor {
    Dtype dtype = Dtype::F64;
    std::vector<uint64_t> dims;
    std::vector<uint8_t> data;

    size_t elem_count() const;
    bool valid() const; // ndim 1-5, extents >= 1, payload length matches

    std::span<const float> f32() const;
    std::span<const double> f64() const;
    std::span<const uint8_t> u8() const;
    std::span<const int64_t> i64() const;

    // element as double regardless of dtype
    double at(size_t flat_index) const;

    static Tensor from_f32(std::vector<uint64_t> dims, const std::vector<float>& v);
    static Tensor from_f64(std::vector<uint64_t> dims, const std::vector<double>& v);
    static Tensor from_u8(std::vector<uint64_t> dims, const std::vector<uint8_t>& v);
    static Tensor from_i64(std::vector<uint64_t> dims, const std::vector<int64_t>& v);
};

Tensor read_tensor(const std::filesystem::path& path);
void write_tensor(const Tensor& t, const std::filesystem::path& path);

} // namespace uqfair
