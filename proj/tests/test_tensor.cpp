#include "uqfair/errors.hpp"
#include "uqfair/rng.hpp"
#include "uqfair/tensor.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace uqfair;
namespace fs = std::filesystem;

static fs::path tmpdir() {
    const auto p = fs::temp_directory_path() / "uqfair_tensor_tests";
    fs::create_directories(p);
    return p;
}

static std::vector<uint8_t> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

TEST_CASE("smallest valid file decodes") {
    const auto path = tmpdir() / "tiny.uqt";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write("UQT1", 4);
    const uint8_t dtype = 0, ndim = 2;
    out.write(reinterpret_cast<const char*>(&dtype), 1);
    out.write(reinterpret_cast<const char*>(&ndim), 1);
    const uint64_t dims[2] = {2, 2};
    out.write(reinterpret_cast<const char*>(dims), 16);
    const float payload[4] = {1.f, 2.f, 3.f, 4.f};
    out.write(reinterpret_cast<const char*>(payload), 16);
    out.close();

    const Tensor t = read_tensor(path);
    CHECK(t.dtype == Dtype::F32);
    CHECK(t.dims == std::vector<uint64_t>{2, 2});
    CHECK(t.f32()[3] == 4.f);
}

TEST_CASE("round-trip is byte identical and deterministic") {
    const auto path = tmpdir() / "rt.uqt";
    const Tensor t = Tensor::from_f64({3, 2}, {1.5, -2.25, 0.0, 1e-300, 42.0, -0.5});
    write_tensor(t, path);
    const auto bytes1 = slurp(path);
    write_tensor(t, path);
    CHECK(slurp(path) == bytes1);

    const Tensor back = read_tensor(path);
    CHECK(back.dtype == t.dtype);
    CHECK(back.dims == t.dims);
    CHECK(back.data == t.data);
}

TEST_CASE("truncated payload names the expected length") {
    const auto path = tmpdir() / "trunc.uqt";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write("UQT1", 4);
    const uint8_t dtype = 0, ndim = 2;
    out.write(reinterpret_cast<const char*>(&dtype), 1);
    out.write(reinterpret_cast<const char*>(&ndim), 1);
    const uint64_t dims[2] = {3, 3};
    out.write(reinterpret_cast<const char*>(dims), 16);
    const float partial[2] = {0.f, 0.f}; // 8 bytes instead of 36
    out.write(reinterpret_cast<const char*>(partial), 8);
    out.close();

    try {
        read_tensor(path);
        FAIL("expected TruncatedPayload");
    } catch (const IoError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("TruncatedPayload") != std::string::npos);
        CHECK(msg.find("36") != std::string::npos);
    }
}

TEST_CASE("bad magic and unknown dtype carry offsets") {
    const auto path = tmpdir() / "bad.uqt";
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write("NOPE", 4);
    }
    CHECK_THROWS_WITH_AS(read_tensor(path), doctest::Contains("BadMagic at byte offset 0"),
                         IoError);
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write("UQT1", 4);
        const uint8_t dtype = 9;
        out.write(reinterpret_cast<const char*>(&dtype), 1);
    }
    CHECK_THROWS_WITH_AS(read_tensor(path), doctest::Contains("UnknownDtype at byte offset 4"),
                         IoError);
}

TEST_CASE("invalid tensors are rejected before write") {
    Tensor t;
    t.dtype = Dtype::F32;
    t.dims = {}; // 0-dim
    CHECK_THROWS_AS(write_tensor(t, tmpdir() / "nope.uqt"), ValidationError);

    t.dims = {2, 0};
    CHECK_THROWS_AS(write_tensor(t, tmpdir() / "nope.uqt"), ValidationError);
}

TEST_CASE("f64 [60,8] file size follows the header layout") {
    const auto path = tmpdir() / "size.uqt";
    std::vector<double> v(60 * 8, 1.0);
    write_tensor(Tensor::from_f64({60, 8}, v), path);
    // 4 magic + 1 dtype + 1 ndim + 2*8 extents + 60*8*8 payload
    CHECK(fs::file_size(path) == 4 + 1 + 1 + 16 + 60 * 8 * 8);
}

TEST_CASE("random tensors round-trip (property)") {
    Rng rng(12345);
    for (int iter = 0; iter < 30; ++iter) {
        const size_t ndim = 1 + rng.next_below(5);
        std::vector<uint64_t> dims(ndim);
        size_t n = 1;
        for (auto& d : dims) {
            d = 1 + rng.next_below(4);
            n *= d;
        }
        std::vector<double> v(n);
        for (auto& x : v) x = rng.next_gaussian();
        const Tensor t = Tensor::from_f64(dims, v);
        const auto path = tmpdir() / "prop.uqt";
        write_tensor(t, path);
        const Tensor back = read_tensor(path);
        CHECK(back.data == t.data);
        CHECK(back.dims == t.dims);
    }
}
