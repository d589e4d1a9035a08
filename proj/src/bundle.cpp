#include "salve/bundle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"

namespace salve {

namespace {

constexpr char kMagic[4] = {'S', 'A', 'L', 'V'};

class ByteWriter {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename T>
  void uint(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float f) { uint(std::bit_cast<std::uint32_t>(f)); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  void need(std::size_t n, const char* what) const {
    if (in_.size() - pos_ < n) throw FormatError(std::string("truncated stream while reading ") + what);
  }
  template <typename T>
  T uint(const char* what) {
    need(sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(in_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void check_name(std::string_view name) {
  if (name.empty()) throw FormatError("empty entry name");
  if (name.size() > std::numeric_limits<std::uint16_t>::max()) throw FormatError("entry name too long");
  for (unsigned char ch : name) {
    if (ch >= 0x80) throw FormatError("entry name '" + std::string(name) + "' is not ASCII");
  }
}

// Product of dims, or nullopt-like sentinel on overflow.
bool checked_count(std::span<const std::uint64_t> dims, std::uint64_t& count) {
  count = 1;
  for (auto d : dims) {
    if (d != 0 && count > std::numeric_limits<std::uint64_t>::max() / d) return false;
    count *= d;
  }
  return true;
}

nlohmann::json parse_manifest(const TensorBundle& bundle) {
  try {
    return nlohmann::json::parse(bundle.manifest);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("manifest is not valid JSON: ") + e.what());
  }
}

}  // namespace

std::uint64_t TensorEntry::element_count() const {
  std::uint64_t count = 0;
  if (!checked_count(shape, count)) throw FormatError("tensor shape overflows");
  return count;
}

bool operator==(const TensorEntry& a, const TensorEntry& b) {
  return a.shape == b.shape && a.data.size() == b.data.size() &&
         (a.data.empty() || std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0);
}

void TensorBundle::set(std::string name, TensorEntry entry) {
  for (auto& [n, e] : entries) {
    if (n == name) {
      e = std::move(entry);
      return;
    }
  }
  entries.emplace_back(std::move(name), std::move(entry));
}

void TensorBundle::set(std::string name, const Matrix& m) {
  set(std::move(name), TensorEntry{{m.rows(), m.cols()}, m.storage()});
}

void TensorBundle::set(std::string name, std::span<const float> vec) {
  set(std::move(name), TensorEntry{{vec.size()}, std::vector<float>(vec.begin(), vec.end())});
}

const TensorEntry* TensorBundle::find(std::string_view name) const {
  for (const auto& [n, e] : entries) {
    if (n == name) return &e;
  }
  return nullptr;
}

const TensorEntry& TensorBundle::at(std::string_view name) const {
  if (const auto* e = find(name)) return *e;
  throw SchemaError("bundle has no entry named '" + std::string(name) + "'");
}

void TensorBundle::validate() const {
  if (entries.size() > std::numeric_limits<std::uint32_t>::max()) throw FormatError("too many entries");
  std::set<std::string_view> seen;
  for (const auto& [name, entry] : entries) {
    check_name(name);
    if (!seen.insert(name).second) throw FormatError("duplicate entry name '" + name + "'");
    if (entry.shape.size() > std::numeric_limits<std::uint8_t>::max()) {
      throw FormatError("entry '" + name + "' has too many dimensions");
    }
    if (entry.element_count() != entry.data.size()) {
      throw FormatError("entry '" + name + "' data length " + std::to_string(entry.data.size()) +
                        " does not match its shape");
    }
  }
}

std::vector<std::uint8_t> encode_bundle(const TensorBundle& bundle) {
  bundle.validate();
  ByteWriter w;
  w.bytes(kMagic, 4);
  w.uint<std::uint32_t>(bundle.version);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(bundle.entries.size()));
  for (const auto& [name, entry] : bundle.entries) {
    w.uint<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.uint<std::uint8_t>(static_cast<std::uint8_t>(entry.shape.size()));
    for (auto d : entry.shape) w.uint<std::uint64_t>(d);
    for (float f : entry.data) w.f32(f);
  }
  w.uint<std::uint64_t>(bundle.manifest.size());
  w.bytes(bundle.manifest.data(), bundle.manifest.size());
  return w.take();
}

TensorBundle decode_bundle(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  auto magic = r.take(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), kMagic)) throw FormatError("bad magic");
  TensorBundle bundle;
  bundle.version = r.uint<std::uint32_t>("version");
  if (bundle.version != kBundleVersion) {
    throw FormatError("unsupported bundle version " + std::to_string(bundle.version));
  }
  const auto count = r.uint<std::uint32_t>("entry count");
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.uint<std::uint16_t>("entry name length");
    auto name_bytes = r.take(name_len, "entry name");
    std::string name(name_bytes.begin(), name_bytes.end());
    check_name(name);
    if (!seen.insert(name).second) throw FormatError("duplicate entry name '" + name + "'");
    TensorEntry entry;
    const auto ndim = r.uint<std::uint8_t>("ndim");
    entry.shape.resize(ndim);
    for (auto& d : entry.shape) d = r.uint<std::uint64_t>("dimension");
    std::uint64_t n = 0;
    if (!checked_count(entry.shape, n) || n > r.remaining() / 4) {
      throw FormatError("entry '" + name + "' declares more payload than the stream holds");
    }
    entry.data.resize(n);
    for (auto& f : entry.data) f = std::bit_cast<float>(r.uint<std::uint32_t>("payload"));
    bundle.entries.emplace_back(std::move(name), std::move(entry));
  }
  const auto manifest_len = r.uint<std::uint64_t>("manifest length");
  if (manifest_len > r.remaining()) throw FormatError("truncated stream while reading manifest");
  auto manifest = r.take(manifest_len, "manifest");
  bundle.manifest.assign(manifest.begin(), manifest.end());
  if (r.remaining() != 0) {
    throw FormatError("trailing bytes after manifest: payload length does not match declared shapes");
  }
  return bundle;
}

void write_bundle(const TensorBundle& bundle, std::ostream& out) {
  const auto bytes = encode_bundle(bundle);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed to write bundle");
}

TensorBundle read_bundle(std::istream& in) {
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed to read bundle stream");
  return decode_bundle(bytes);
}

void save_bundle(const TensorBundle& bundle, const std::filesystem::path& path) {
  const auto bytes = encode_bundle(bundle);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

TensorBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_bundle(in);
}

Matrix entry_as_matrix(const TensorEntry& entry, std::string_view name) {
  if (entry.shape.size() != 2) {
    throw DataError("entry '" + std::string(name) + "' must be 2-D, has " + std::to_string(entry.shape.size()) +
                    " dimensions");
  }
  try {
    return Matrix(entry.shape[0], entry.shape[1], entry.data);
  } catch (const DataError&) {
    throw DataError("entry '" + std::string(name) + "' contains non-finite values");
  }
}

Vector entry_as_vector(const TensorEntry& entry, std::string_view name) {
  if (entry.shape.size() != 1) {
    throw DataError("entry '" + std::string(name) + "' must be 1-D, has " + std::to_string(entry.shape.size()) +
                    " dimensions");
  }
  for (float f : entry.data) {
    if (!std::isfinite(f)) throw DataError("entry '" + std::string(name) + "' contains non-finite values");
  }
  return entry.data;
}

std::vector<std::size_t> ActivationDataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes(), 0);
  for (auto l : labels) ++counts.at(l);
  return counts;
}

std::vector<std::size_t> ActivationDataset::indices_of(std::uint32_t cls) const {
  std::vector<std::size_t> out;
  for (std::size_t n = 0; n < labels.size(); ++n) {
    if (labels[n] == cls) out.push_back(n);
  }
  return out;
}

void ActivationDataset::check() const {
  if (labels.size() != X.rows()) {
    throw DataError("labels length " + std::to_string(labels.size()) + " != activation rows " +
                    std::to_string(X.rows()));
  }
  for (std::size_t n = 0; n < labels.size(); ++n) {
    if (labels[n] >= num_classes()) {
      throw DataError("label " + std::to_string(labels[n]) + " at sample " + std::to_string(n) +
                      " out of range for " + std::to_string(num_classes()) + " classes");
    }
  }
}

void HeadWeights::check() const {
  if (b.size() != W.rows()) {
    throw DataError("head bias length " + std::to_string(b.size()) + " != weight rows " + std::to_string(W.rows()));
  }
}

std::vector<std::string> manifest_class_names(const TensorBundle& bundle) {
  const auto manifest = parse_manifest(bundle);
  if (!manifest.is_object() || !manifest.contains("class_names") || !manifest["class_names"].is_array()) {
    throw SchemaError("manifest lacks a 'class_names' array");
  }
  std::vector<std::string> names;
  for (const auto& n : manifest["class_names"]) {
    if (!n.is_string()) throw SchemaError("class_names must be strings");
    names.push_back(n.get<std::string>());
  }
  return names;
}

ActivationDataset dataset_from_bundle(const TensorBundle& bundle, std::string_view activations_name,
                                      std::string_view labels_name) {
  ActivationDataset ds;
  ds.X = entry_as_matrix(bundle.at(activations_name), activations_name);
  const auto raw = entry_as_vector(bundle.at(labels_name), labels_name);
  ds.class_names = manifest_class_names(bundle);
  if (raw.size() != ds.X.rows()) {
    throw DataError("'" + std::string(labels_name) + "' length " + std::to_string(raw.size()) +
                    " != activation rows " + std::to_string(ds.X.rows()));
  }
  ds.labels.reserve(raw.size());
  for (std::size_t n = 0; n < raw.size(); ++n) {
    const float v = raw[n];
    if (v != std::floor(v) || v < 0.0f) {
      throw DataError("label at sample " + std::to_string(n) + " is not a non-negative integer");
    }
    if (v >= static_cast<float>(ds.class_names.size())) {
      throw DataError("label " + std::to_string(static_cast<long long>(v)) + " at sample " + std::to_string(n) +
                      " out of range for " + std::to_string(ds.class_names.size()) + " classes");
    }
    ds.labels.push_back(static_cast<std::uint32_t>(v));
  }
  return ds;
}

HeadWeights head_from_bundle(const TensorBundle& bundle) {
  HeadWeights head{entry_as_matrix(bundle.at("head_weight"), "head_weight"),
                   entry_as_vector(bundle.at("head_bias"), "head_bias")};
  head.check();
  return head;
}

ValidatedBundle validate_dataset(const TensorBundle& bundle) {
  bundle.validate();
  for (const char* required : {"activations", "labels", "head_weight", "head_bias"}) {
    if (!bundle.contains(required)) throw SchemaError(std::string("bundle is missing entry '") + required + "'");
  }
  ValidatedBundle out{dataset_from_bundle(bundle, "activations", "labels"), head_from_bundle(bundle)};
  if (out.head.dim() != out.dataset.dim()) {
    throw DataError("head_weight has " + std::to_string(out.head.dim()) + " columns but activations have " +
                    std::to_string(out.dataset.dim()));
  }
  if (out.head.num_classes() != out.dataset.num_classes()) {
    throw DataError("head_weight has " + std::to_string(out.head.num_classes()) + " rows but manifest names " +
                    std::to_string(out.dataset.num_classes()) + " classes");
  }
  return out;
}

void put_dataset(TensorBundle& bundle, const ActivationDataset& dataset, std::string_view activations_name,
                 std::string_view labels_name) {
  bundle.set(std::string(activations_name), dataset.X);
  std::vector<float> labels(dataset.labels.begin(), dataset.labels.end());
  bundle.set(std::string(labels_name), std::span<const float>(labels));
}

void put_head(TensorBundle& bundle, const HeadWeights& head) {
  bundle.set("head_weight", head.W);
  bundle.set("head_bias", std::span<const float>(head.b));
}

}  // namespace salve
