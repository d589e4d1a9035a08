#pragma once

// Named-tensor container shared with the exporter.
//
// Byte layout (all integers and floats little-endian):
//
//   "SALV"                     4 bytes magic
//   u32 version                currently 1
//   u32 entry_count
//   entry_count times:
//     u16 name_length
//     name bytes               ASCII, non-empty, unique
//     u8  ndim
//     u64 dims[ndim]
//     f32 payload[prod(dims)]  row-major
//   u64 manifest_length
//   manifest bytes             UTF-8 JSON text
//
// Files conventionally use the ".salv" extension.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "salve/tensor.hpp"

namespace salve {

inline constexpr std::uint32_t kBundleVersion = 1;

struct TensorEntry {
  std::vector<std::uint64_t> shape;
  std::vector<float> data;

  std::uint64_t element_count() const;
};

// Bitwise float comparison: round-trips must be exact, including signed zeros.
bool operator==(const TensorEntry& a, const TensorEntry& b);

class TensorBundle {
 public:
  std::uint32_t version = kBundleVersion;
  std::vector<std::pair<std::string, TensorEntry>> entries;
  std::string manifest = "{}";

  // Appends or replaces an entry, keeping insertion order for new names.
  void set(std::string name, TensorEntry entry);
  void set(std::string name, const Matrix& m);
  void set(std::string name, std::span<const float> vec);

  const TensorEntry* find(std::string_view name) const;
  const TensorEntry& at(std::string_view name) const;  // SchemaError if absent
  bool contains(std::string_view name) const { return find(name) != nullptr; }

  // Throws FormatError when an entry invariant is broken.
  void validate() const;

  friend bool operator==(const TensorBundle&, const TensorBundle&) = default;
};

void write_bundle(const TensorBundle& bundle, std::ostream& out);
TensorBundle read_bundle(std::istream& in);

std::vector<std::uint8_t> encode_bundle(const TensorBundle& bundle);
TensorBundle decode_bundle(std::span<const std::uint8_t> bytes);

// Writes through a temporary sibling file and renames it into place.
void save_bundle(const TensorBundle& bundle, const std::filesystem::path& path);
TensorBundle load_bundle(const std::filesystem::path& path);

Matrix entry_as_matrix(const TensorEntry& entry, std::string_view name);
Vector entry_as_vector(const TensorEntry& entry, std::string_view name);

struct ActivationDataset {
  Matrix X;                             // N x M penultimate activations
  std::vector<std::uint32_t> labels;    // length N, each < class_names.size()
  std::vector<std::string> class_names;

  std::size_t size() const { return X.rows(); }
  std::size_t dim() const { return X.cols(); }
  std::size_t num_classes() const { return class_names.size(); }
  std::vector<std::size_t> class_counts() const;
  std::vector<std::size_t> indices_of(std::uint32_t cls) const;

  // Labels in range and consistent with X.
  void check() const;
};

struct HeadWeights {
  Matrix W;  // C x M
  Vector b;  // length C

  std::size_t num_classes() const { return W.rows(); }
  std::size_t dim() const { return W.cols(); }
  void check() const;

  friend bool operator==(const HeadWeights&, const HeadWeights&) = default;
};

struct ValidatedBundle {
  ActivationDataset dataset;
  HeadWeights head;
};

// Requires "activations", "labels", "head_weight", "head_bias" entries and a
// manifest with "class_names". Cross-checks N, M and C.
ValidatedBundle validate_dataset(const TensorBundle& bundle);

// Typed view of an arbitrary activations/labels pair (e.g. the train split).
ActivationDataset dataset_from_bundle(const TensorBundle& bundle, std::string_view activations_name,
                                      std::string_view labels_name);

std::vector<std::string> manifest_class_names(const TensorBundle& bundle);

void put_dataset(TensorBundle& bundle, const ActivationDataset& dataset,
                 std::string_view activations_name = "activations",
                 std::string_view labels_name = "labels");
void put_head(TensorBundle& bundle, const HeadWeights& head);
HeadWeights head_from_bundle(const TensorBundle& bundle);

}  // namespace salve
