#include <cstdio>
#include <cstring>
#include <sstream>
#include <stdexcept>

#include "doctest.h"
#include "rt/tensor.hpp"

using namespace rt;

TEST_CASE("tensor construction") {
    Tensor z = Tensor::zeros({2, 3});
    CHECK(z.rank() == 2);
    CHECK(z.numel() == 6);
    CHECK(z[5] == 0);

    Tensor f = Tensor::full({4}, Scalar(2.5));
    CHECK(f[0] == Scalar(2.5));
    CHECK(f[3] == Scalar(2.5));

    Tensor t = Tensor::from({2, 2}, {1, 2, 3, 4});
    CHECK(t[0] == 1);
    CHECK(t[3] == 4);
    CHECK(t.dim(1) == 2);

    Tensor s = Tensor::scalar(7);
    CHECK(s.numel() == 1);
    CHECK(s.rank() == 1);
}

TEST_CASE("shape helpers and errors") {
    CHECK(shape_str({8, 4, 3, 3}) == "8x4x3x3");
    CHECK(shape_str({}) == "scalar");
    CHECK(Tensor::from({2, 2}, {1, 2, 3, 4}).shape_str() == "2x2");
    CHECK(shape_numel({3, 5}) == 15);
    CHECK_THROWS_WITH_AS(shape_numel({2, 0}), doctest::Contains("non-positive"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(Tensor::from({2, 2}, {1, 2, 3}), doctest::Contains("does not match"),
                         std::invalid_argument);
}

TEST_CASE("norms") {
    Tensor t = Tensor::from({3}, {3, -4, 0});
    CHECK(t.l2_norm() == doctest::Approx(5.0));
    CHECK(t.linf_norm() == doctest::Approx(4.0));
}

TEST_CASE("tensor file round trip is bitwise") {
    Tensor t = Tensor::from({2, 3}, {0.1f, -2.0f, 3.5f, 0.0f, 1e-7f, 42.0f});
    std::stringstream buf;
    write_tensor(buf, t);
    Tensor r = read_tensor(buf, "test");
    REQUIRE(r.same_shape(t));
    CHECK(std::memcmp(r.ptr(), t.ptr(), sizeof(Scalar) * 6) == 0);
}

TEST_CASE("tensor read converts the other scalar width") {
    // hand-built record: magic, dtype 1 (f64), rank 1, dim 2, two doubles
    std::stringstream buf;
    buf.write("RTNSR1", 6);
    buf.put(1);
    buf.put(1);
    uint32_t dim = 2;
    buf.write(reinterpret_cast<const char*>(&dim), 4);
    double payload[2] = {0.5, -1.25};
    buf.write(reinterpret_cast<const char*>(payload), 16);
    Tensor t = read_tensor(buf, "test");
    REQUIRE(t.numel() == 2);
    CHECK(t[0] == Scalar(0.5));
    CHECK(t[1] == Scalar(-1.25));
}

TEST_CASE("tensor read failure modes are distinct") {
    Tensor t = Tensor::from({2}, {1, 2});
    std::stringstream good;
    write_tensor(good, t);
    std::string bytes = good.str();

    {
        std::string b = bytes;
        b[0] = 'X';
        std::stringstream in(b);
        CHECK_THROWS_WITH_AS(read_tensor(in, "t"), doctest::Contains("not a tensor file"),
                             std::runtime_error);
    }
    {
        std::string b = bytes;
        b[5] = '2';
        std::stringstream in(b);
        CHECK_THROWS_WITH_AS(read_tensor(in, "t"), doctest::Contains("unsupported tensor format"),
                             std::runtime_error);
    }
    {
        std::string b = bytes;
        b[6] = 9;  // dtype byte
        std::stringstream in(b);
        CHECK_THROWS_WITH_AS(read_tensor(in, "t"), doctest::Contains("unknown tensor dtype"),
                             std::runtime_error);
    }
    {
        std::stringstream in(bytes.substr(0, bytes.size() - 3));
        CHECK_THROWS_WITH_AS(read_tensor(in, "t"), doctest::Contains("truncated"),
                             std::runtime_error);
    }
}

TEST_CASE("tensor file io via paths") {
    Tensor t = Tensor::from({1, 2, 2}, {1, 2, 3, 4});
    std::string path = "tensor_io_test.rtnsr";
    write_tensor_file(t, path);
    Tensor r = read_tensor_file(path);
    CHECK(r.same_shape(t));
    CHECK(std::memcmp(r.ptr(), t.ptr(), sizeof(Scalar) * 4) == 0);
    CHECK_THROWS_WITH_AS(read_tensor_file("no_such_file.rtnsr"), doctest::Contains("cannot open"),
                         std::runtime_error);
    std::remove(path.c_str());
}
