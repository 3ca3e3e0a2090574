#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "doctest.h"
#include "rt/dataset.hpp"

using namespace rt;

namespace {

bool same_bytes(const Tensor& a, const Tensor& b) {
    return a.shape == b.shape &&
           std::memcmp(a.ptr(), b.ptr(), static_cast<size_t>(a.numel()) * sizeof(Scalar)) == 0;
}

}  // namespace

TEST_CASE("generator is deterministic and in domain") {
    Dataset a = generate_shapes(40, 4, 8, 0.1, 123);
    Dataset b = generate_shapes(40, 4, 8, 0.1, 123);
    Dataset c = generate_shapes(40, 4, 8, 0.1, 124);
    CHECK(a.size() == 40);
    CHECK(a.classes == 4);
    CHECK(a.inputs.shape == std::vector<int>{40, 1, 8, 8});
    a.validate();
    CHECK(same_bytes(a.inputs, b.inputs));
    CHECK(a.labels == b.labels);
    CHECK_FALSE(same_bytes(a.inputs, c.inputs));
    for (Scalar v : a.inputs.data) {
        CHECK(v >= 0);
        CHECK(v <= 1);
    }
}

TEST_CASE("classes are balanced to within one sample") {
    Dataset d = generate_shapes(23, 5, 8, 0.0, 7);
    std::vector<int> counts(5, 0);
    for (int y : d.labels) counts[static_cast<size_t>(y)]++;
    int lo = counts[0], hi = counts[0];
    for (int c : counts) {
        lo = std::min(lo, c);
        hi = std::max(hi, c);
    }
    CHECK(hi - lo <= 1);
    int total = 0;
    for (int c : counts) total += c;
    CHECK(total == 23);
}

TEST_CASE("a prefix of a larger dataset is the smaller dataset") {
    Dataset big = generate_shapes(64, 4, 8, 0.05, 99);
    Dataset small = generate_shapes(24, 4, 8, 0.05, 99);
    Dataset head = slice(big, 0, 24);
    CHECK(same_bytes(head.inputs, small.inputs));
    CHECK(head.labels == small.labels);
}

TEST_CASE("sample and slice agree with manual row math") {
    Dataset d = generate_shapes(10, 2, 8, 0.0, 5);
    Tensor s3 = d.sample(3);
    CHECK(s3.shape == std::vector<int>{1, 8, 8});
    for (int64_t i = 0; i < 64; ++i) CHECK(s3[i] == d.inputs[3 * 64 + i]);

    Dataset mid = slice(d, 2, 3);
    CHECK(mid.size() == 3);
    CHECK(mid.classes == 2);
    CHECK(mid.labels[0] == d.labels[2]);
    for (int64_t i = 0; i < 64; ++i) CHECK(mid.inputs[i] == d.inputs[2 * 64 + i]);

    CHECK_THROWS_AS(slice(d, 8, 5), std::out_of_range);
    CHECK_THROWS_AS(slice(d, -1, 2), std::out_of_range);
    CHECK_THROWS_AS(d.sample(10), std::out_of_range);
}

TEST_CASE("gather_rows reorders and repeats rows") {
    Tensor t = Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6});
    Tensor g = gather_rows(t, {2, 0, 2});
    CHECK(g.shape == std::vector<int>{3, 2});
    CHECK(g[0] == 5);
    CHECK(g[1] == 6);
    CHECK(g[2] == 1);
    CHECK(g[4] == 5);
    std::vector<int> labs = gather_labels({7, 8, 9}, {1, 1, 0});
    CHECK(labs == std::vector<int>{8, 8, 7});
    CHECK_THROWS_AS(gather_rows(t, {3}), std::out_of_range);
}

TEST_CASE("dataset file round trip is exact") {
    Dataset d = generate_shapes(12, 3, 8, 0.2, 42);
    const char* path = "test_dataset_rt.rdset";
    save_dataset(d, path);
    Dataset r = load_dataset(path);
    CHECK(r.classes == 3);
    CHECK(same_bytes(r.inputs, d.inputs));
    CHECK(r.labels == d.labels);
    std::remove(path);
}

TEST_CASE("dataset loader rejects foreign and truncated files") {
    const char* path = "test_dataset_bad.rdset";
    {
        std::ofstream out(path, std::ios::binary);
        out << "NOTDS1 garbage";
    }
    CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("bad magic"), std::runtime_error);

    Dataset d = generate_shapes(4, 2, 8, 0.0, 1);
    save_dataset(d, path);
    {
        // chop the final label
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 2));
    }
    CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("truncated"), std::runtime_error);
    std::remove(path);
    CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("cannot open"), std::runtime_error);
}

TEST_CASE("validate flags bad pixels and labels") {
    Dataset d = generate_shapes(4, 2, 8, 0.0, 3);
    d.validate();
    Dataset bad = d;
    bad.inputs[0] = Scalar(1.5);
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = d;
    bad.labels[1] = 2;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = d;
    bad.labels.pop_back();
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
