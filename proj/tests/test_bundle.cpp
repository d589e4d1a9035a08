#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "salve/bundle.hpp"

using namespace salve;

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

TensorBundle random_bundle(Rng& rng) {
  TensorBundle b;
  const auto n = rng.below(5);
  for (std::uint64_t e = 0; e < n; ++e) {
    TensorEntry t;
    const auto ndim = rng.below(5);  // 0..4 dims
    std::uint64_t count = 1;
    for (std::uint64_t d = 0; d < ndim; ++d) {
      t.shape.push_back(rng.below(5));
      count *= t.shape.back();
    }
    if (count > 64) {
      t.shape = {count % 64};
      count = count % 64;
    }
    for (std::uint64_t i = 0; i < count; ++i) t.data.push_back(static_cast<float>(rng.normal()));
    b.set("t" + std::to_string(e), std::move(t));
  }
  b.manifest = R"({"seed":)" + std::to_string(rng.below(1000)) + "}";
  return b;
}

TensorBundle toy_dataset_bundle() {
  TensorBundle b;
  b.set("activations", Matrix::from_rows({{1, 0}, {0, 1}, {1, 1}}));
  b.set("labels", std::vector<float>{0, 1, 1});
  b.set("head_weight", Matrix::from_rows({{1, 0}, {0, 1}}));
  b.set("head_bias", std::vector<float>{0, 0});
  b.manifest = R"({"class_names":["cat","dog"],"model":"toy"})";
  return b;
}

}  // namespace

TEST_CASE("empty bundle is the fixed header plus manifest") {
  TensorBundle b;
  b.manifest = "{}";
  const auto bytes = encode_bundle(b);
  const std::vector<std::uint8_t> expected = {'S', 'A', 'L', 'V', 1, 0, 0, 0, 0, 0, 0, 0,
                                              2, 0, 0, 0, 0, 0, 0, 0, '{', '}'};
  CHECK(bytes == expected);
  CHECK(decode_bundle(bytes) == b);
}

TEST_CASE("2x2 tensor round-trips bit-identically") {
  TensorBundle b;
  b.set("m", TensorEntry{{2, 2}, {1.5f, -0.0f, 3.25e-7f, -1e30f}});
  std::stringstream ss;
  write_bundle(b, ss);
  const auto back = read_bundle(ss);
  CHECK(back == b);
  CHECK(std::signbit(back.at("m").data[1]));
}

TEST_CASE("duplicate names rejected before writing") {
  TensorBundle b;
  b.entries.push_back({"x", TensorEntry{{1}, {1.0f}}});
  b.entries.push_back({"x", TensorEntry{{1}, {2.0f}}});
  std::stringstream ss;
  CHECK_THROWS_AS(write_bundle(b, ss), FormatError);
  CHECK(ss.str().empty());
}

TEST_CASE("invalid names and shape/data mismatch are rejected") {
  TensorBundle b;
  b.entries.push_back({"", TensorEntry{{1}, {1.0f}}});
  CHECK_THROWS_AS(encode_bundle(b), FormatError);
  b.entries = {{"caf\xc3\xa9", TensorEntry{{1}, {1.0f}}}};
  CHECK_THROWS_AS(encode_bundle(b), FormatError);
  b.entries = {{"x", TensorEntry{{2, 2}, {1.0f, 2.0f, 3.0f}}}};
  CHECK_THROWS_AS(encode_bundle(b), FormatError);
}

TEST_CASE("read_bundle detects corruption") {
  TensorBundle b;
  b.set("m", TensorEntry{{2, 2}, {1, 2, 3, 4}});
  const auto good = encode_bundle(b);

  SUBCASE("bad magic") {
    auto bytes = good;
    bytes[0] = 'X';
    CHECK_THROWS_WITH_AS(decode_bundle(bytes), "bad magic", FormatError);
  }
  SUBCASE("declared 2x2 with only 3 floats") {
    // Hand-built: header, entry "m" 2x2 and three floats, no manifest.
    std::vector<std::uint8_t> bytes(good.begin(), good.begin() + 12 + 2 + 1 + 1 + 16 + 12);
    CHECK_THROWS_AS(decode_bundle(bytes), FormatError);
  }
  SUBCASE("every truncation fails cleanly") {
    for (std::size_t n = 0; n < good.size(); ++n) {
      CHECK_THROWS_AS(decode_bundle(std::span(good).first(n)), FormatError);
    }
  }
  SUBCASE("trailing bytes") {
    auto bytes = good;
    bytes.push_back(0);
    CHECK_THROWS_AS(decode_bundle(bytes), FormatError);
  }
  SUBCASE("unsupported version") {
    auto bytes = good;
    bytes[4] = 2;
    CHECK_THROWS_AS(decode_bundle(bytes), FormatError);
  }
}

TEST_CASE("round-trip property over random bundles") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const auto b = random_bundle(rng);
    CHECK(decode_bundle(encode_bundle(b)) == b);
  }
}

TEST_CASE("golden fixture parses identically and re-encodes byte-for-byte") {
  const auto path = std::filesystem::path(SALVE_TEST_DATA) / "golden.salv";
  const auto bytes = read_file(path);
  const auto b = decode_bundle(bytes);
  REQUIRE(b.entries.size() == 2);
  CHECK(b.entries[0].first == "w");
  CHECK(b.at("w").shape == std::vector<std::uint64_t>{2, 2});
  CHECK(b.at("w").data == std::vector<float>{1.0f, -2.0f, 0.5f, 3.0f});
  CHECK(b.at("labels").data == std::vector<float>{0, 1, 2});
  CHECK(manifest_class_names(b) == std::vector<std::string>{"a", "b", "c"});
  CHECK(encode_bundle(b) == bytes);
}

TEST_CASE("save and load through the filesystem") {
  const auto dir = std::filesystem::temp_directory_path() / "salve_bundle_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "x.salv";
  const auto b = toy_dataset_bundle();
  save_bundle(b, path);
  CHECK(load_bundle(path) == b);
  CHECK_FALSE(std::filesystem::exists(dir / "x.salv.tmp"));
  CHECK_THROWS_AS(load_bundle(dir / "missing.salv"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("validate_dataset happy path") {
  const auto v = validate_dataset(toy_dataset_bundle());
  CHECK(v.dataset.size() == 3);
  CHECK(v.dataset.dim() == 2);
  CHECK(v.dataset.num_classes() == 2);
  CHECK(v.dataset.labels == std::vector<std::uint32_t>{0, 1, 1});
  CHECK(v.head.W == Matrix::identity(2));
}

TEST_CASE("validate_dataset errors") {
  SUBCASE("label equal to C") {
    auto b = toy_dataset_bundle();
    b.set("labels", std::vector<float>{0, 2, 1});
    CHECK_THROWS_AS(validate_dataset(b), DataError);
  }
  SUBCASE("non-integer label") {
    auto b = toy_dataset_bundle();
    b.set("labels", std::vector<float>{0, 0.5f, 1});
    CHECK_THROWS_AS(validate_dataset(b), DataError);
  }
  SUBCASE("head columns differ from activation columns") {
    auto b = toy_dataset_bundle();
    b.set("head_weight", Matrix::from_rows({{1, 0, 0}, {0, 1, 0}}));
    CHECK_THROWS_AS(validate_dataset(b), DataError);
  }
  SUBCASE("bias length mismatch") {
    auto b = toy_dataset_bundle();
    b.set("head_bias", std::vector<float>{0, 0, 0});
    CHECK_THROWS_AS(validate_dataset(b), DataError);
  }
  SUBCASE("missing entry") {
    auto b = toy_dataset_bundle();
    b.entries.erase(b.entries.begin() + 3);
    CHECK_THROWS_AS(validate_dataset(b), SchemaError);
  }
  SUBCASE("missing class names") {
    auto b = toy_dataset_bundle();
    b.manifest = "{}";
    CHECK_THROWS_AS(validate_dataset(b), SchemaError);
  }
  SUBCASE("class count disagrees with head rows") {
    auto b = toy_dataset_bundle();
    b.manifest = R"({"class_names":["a","b","c"]})";
    CHECK_THROWS_AS(validate_dataset(b), DataError);
  }
}
