#include "uqfair/tensor.hpp"
#include "uqfair/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "UQT1 I/O assumes a little-endian host");

namespace uqfair {

size_t dtype_size(Dtype d) {
    switch (d) {
        case Dtype::F32: return 4;
        case Dtype::F64: return 8;
        case Dtype::U8: return 1;
        case Dtype::I64: return 8;
    }
    return 0;
}

size_t Tensor::elem_count() const {
    size_t n = 1;
    for (auto d : dims) n *= static_cast<size_t>(d);
    return dims.empty() ? 0 : n;
}

bool Tensor::valid() const {
    if (dims.empty() || dims.size() > 5) return false;
    for (auto d : dims)
        if (d == 0) return false;
    return data.size() == elem_count() * dtype_size(dtype);
}

template <typename T>
static std::span<const T> typed_span(const Tensor& t, Dtype want) {
    if (t.dtype != want) throw ValidationError("tensor dtype mismatch");
    return {reinterpret_cast<const T*>(t.data.data()), t.data.size() / sizeof(T)};
}

std::span<const float> Tensor::f32() const { return typed_span<float>(*this, Dtype::F32); }
std::span<const double> Tensor::f64() const { return typed_span<double>(*this, Dtype::F64); }
std::span<const uint8_t> Tensor::u8() const { return typed_span<uint8_t>(*this, Dtype::U8); }
std::span<const int64_t> Tensor::i64() const { return typed_span<int64_t>(*this, Dtype::I64); }

double Tensor::at(size_t i) const {
    switch (dtype) {
        case Dtype::F32: return f32()[i];
        case Dtype::F64: return f64()[i];
        case Dtype::U8: return u8()[i];
        case Dtype::I64: return static_cast<double>(i64()[i]);
    }
    return 0.0;
}

template <typename T>
static Tensor make(Dtype dt, std::vector<uint64_t> dims, const std::vector<T>& v) {
    Tensor t;
    t.dtype = dt;
    t.dims = std::move(dims);
    t.data.resize(v.size() * sizeof(T));
    std::memcpy(t.data.data(), v.data(), t.data.size());
    if (!t.valid()) throw ValidationError("tensor dims/payload mismatch");
    return t;
}

Tensor Tensor::from_f32(std::vector<uint64_t> d, const std::vector<float>& v) { return make(Dtype::F32, std::move(d), v); }
Tensor Tensor::from_f64(std::vector<uint64_t> d, const std::vector<double>& v) { return make(Dtype::F64, std::move(d), v); }
Tensor Tensor::from_u8(std::vector<uint64_t> d, const std::vector<uint8_t>& v) { return make(Dtype::U8, std::move(d), v); }
Tensor Tensor::from_i64(std::vector<uint64_t> d, const std::vector<int64_t>& v) { return make(Dtype::I64, std::move(d), v); }

Tensor read_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open tensor file: " + path.string());

    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "UQT1", 4) != 0)
        throw IoError("BadMagic at byte offset 0 in " + path.string());

    uint8_t dtype_code = 0, ndim = 0;
    if (!in.read(reinterpret_cast<char*>(&dtype_code), 1))
        throw IoError("TruncatedPayload at byte offset 4 in " + path.string());
    if (dtype_code > 3)
        throw IoError("UnknownDtype at byte offset 4 in " + path.string());
    if (!in.read(reinterpret_cast<char*>(&ndim), 1) || ndim < 1 || ndim > 5)
        throw IoError("bad ndim at byte offset 5 in " + path.string());

    Tensor t;
    t.dtype = static_cast<Dtype>(dtype_code);
    t.dims.resize(ndim);
    if (!in.read(reinterpret_cast<char*>(t.dims.data()), 8 * ndim))
        throw IoError("TruncatedPayload at byte offset 6 in " + path.string());
    for (auto d : t.dims)
        if (d == 0) throw IoError("zero extent at byte offset 6 in " + path.string());

    const size_t header = 6 + 8 * static_cast<size_t>(ndim);
    const size_t payload = t.elem_count() * dtype_size(t.dtype);
    t.data.resize(payload);
    in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(payload));
    const size_t got = static_cast<size_t>(in.gcount());
    if (got != payload)
        throw IoError("TruncatedPayload at byte offset " + std::to_string(header + got) +
                      " in " + path.string() + " (expected " + std::to_string(payload) +
                      " payload bytes, got " + std::to_string(got) + ")");
    return t;
}

void write_tensor(const Tensor& t, const std::filesystem::path& path) {
    if (!t.valid()) throw ValidationError("refusing to write invalid tensor");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for write: " + path.string());
    out.write("UQT1", 4);
    const uint8_t dtype_code = static_cast<uint8_t>(t.dtype);
    const uint8_t ndim = static_cast<uint8_t>(t.dims.size());
    out.write(reinterpret_cast<const char*>(&dtype_code), 1);
    out.write(reinterpret_cast<const char*>(&ndim), 1);
    out.write(reinterpret_cast<const char*>(t.dims.data()), 8 * ndim);
    out.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size()));
    if (!out) throw IoError("IoFailure writing " + path.string());
}

} // namespace uqfair
