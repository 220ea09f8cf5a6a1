#pragma once

// Array container: named f64/u32 arrays in one CBOR document.
//
//   {"format": "domino.arrays", "version": 1,
//    "entries": [{"name", "dtype": "f64"|"u32", "dims": [...], "data": <bytes>}, ...]}
//
// Payloads are little-endian byte strings so doubles round-trip bit for bit.

#include <cstdint>
#include <fstream>
#include <iterator>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "domino/error.hpp"
#include "domino/io/le.hpp"

namespace domino::io {

inline constexpr const char* kContainerFormat = "domino.arrays";
inline constexpr std::uint32_t kContainerVersion = 1;

enum class DType : std::uint8_t { kF64 = 0, kU32 = 1 };

struct Array {
  std::vector<std::uint64_t> dims;
  std::variant<std::vector<double>, std::vector<std::uint32_t>> data;

  DType dtype() const { return data.index() == 0 ? DType::kF64 : DType::kU32; }
  std::size_t size() const { return data.index() == 0 ? std::get<0>(data).size() : std::get<1>(data).size(); }
};

class ArrayContainer {
 public:
  void put(const std::string& name, std::vector<std::uint64_t> dims, std::vector<double> values) {
    insert(name, Array{std::move(dims), std::move(values)});
  }
  void put(const std::string& name, std::vector<std::uint64_t> dims, std::vector<std::uint32_t> values) {
    insert(name, Array{std::move(dims), std::move(values)});
  }
  void put_scalar(const std::string& name, double v) { put(name, {1}, std::vector<double>{v}); }
  void put_text(const std::string& name, const std::string& text) {
    put(name, {text.size()}, std::vector<std::uint32_t>(text.begin(), text.end()));
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const std::vector<std::string>& names() const { return order_; }

  const Array& at(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) throw ValidationError("container has no entry '" + name + "'");
    return it->second;
  }
  const std::vector<double>& f64(const std::string& name) const {
    const Array& a = at(name);
    if (a.dtype() != DType::kF64) throw ValidationError("entry '" + name + "' is not f64");
    return std::get<0>(a.data);
  }
  const std::vector<std::uint32_t>& u32(const std::string& name) const {
    const Array& a = at(name);
    if (a.dtype() != DType::kU32) throw ValidationError("entry '" + name + "' is not u32");
    return std::get<1>(a.data);
  }
  double scalar(const std::string& name) const {
    const auto& v = f64(name);
    if (v.size() != 1) throw ValidationError("entry '" + name + "' is not a scalar");
    return v[0];
  }
  std::string text(const std::string& name) const {
    const auto& v = u32(name);
    std::string s;
    s.reserve(v.size());
    for (auto c : v) {
      if (c > 0xFF) throw ValidationError("entry '" + name + "' is not text");
      s.push_back(static_cast<char>(c));
    }
    return s;
  }

  std::string serialize() const {
    using Json = nlohmann::json;
    Json entries = Json::array();
    for (const auto& name : order_) {
      const Array& a = index_.at(name);
      std::string payload;
      if (a.dtype() == DType::kF64)
        for (double v : std::get<0>(a.data)) store_f64(payload, v);
      else
        for (auto v : std::get<1>(a.data)) store_le<std::uint32_t>(payload, v);
      entries.push_back({{"name", name},
                         {"dtype", a.dtype() == DType::kF64 ? "f64" : "u32"},
                         {"dims", a.dims},
                         {"data", Json::binary(std::vector<std::uint8_t>(payload.begin(), payload.end()))}});
    }
    const Json doc{{"format", kContainerFormat}, {"version", kContainerVersion}, {"entries", std::move(entries)}};
    const auto bytes = Json::to_cbor(doc);
    return {bytes.begin(), bytes.end()};
  }

  static ArrayContainer parse(std::span<const unsigned char> bytes) {
    using Json = nlohmann::json;
    Json doc;
    try {
      doc = Json::from_cbor(bytes.begin(), bytes.end());
    } catch (const Json::parse_error& e) {
      throw ParseError(std::string("malformed container: ") + e.what(), e.byte);
    }
    auto bad = [](const std::string& what) { return ParseError("malformed container: " + what, 0); };
    if (!doc.is_object() || !doc.contains("format") || doc["format"] != kContainerFormat) throw bad("not an array container");
    if (!doc.contains("version") || !doc["version"].is_number_unsigned() || doc["version"].get<std::uint64_t>() != kContainerVersion)
      throw bad("unsupported version");
    if (!doc.contains("entries") || !doc["entries"].is_array()) throw bad("no entry list");
    ArrayContainer c;
    for (const auto& e : doc["entries"]) {
      if (!e.is_object() || !e.contains("name") || !e["name"].is_string() || !e.contains("dtype") || !e["dtype"].is_string() ||
          !e.contains("dims") || !e["dims"].is_array() || !e.contains("data") || !e["data"].is_binary())
        throw bad("entry with missing or mistyped fields");
      const std::string name = e["name"].get<std::string>();
      const std::string dtype = e["dtype"].get<std::string>();
      if (dtype != "f64" && dtype != "u32") throw bad("entry '" + name + "' has unknown dtype '" + dtype + "'");
      std::vector<std::uint64_t> dims;
      std::uint64_t n = 1;
      for (const auto& d : e["dims"]) {
        if (!d.is_number_unsigned()) throw bad("entry '" + name + "' has a non-integer dimension");
        const auto v = d.get<std::uint64_t>();
        if (v != 0 && n > (std::uint64_t{1} << 60) / v) throw bad("entry '" + name + "' is too large");
        dims.push_back(v);
        n *= v;
      }
      const auto& payload = e["data"].get_binary();
      const std::size_t width = dtype == "f64" ? 8 : 4;
      if (payload.size() != n * width) throw bad("entry '" + name + "' payload does not match its dims");
      if (c.contains(name)) throw bad("duplicate entry '" + name + "'");
      if (name.empty()) throw bad("entry with an empty name");
      if (dtype == "f64") {
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = load_f64(payload.data() + 8 * i);
        c.put(name, std::move(dims), std::move(v));
      } else {
        std::vector<std::uint32_t> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = load_le<std::uint32_t>(payload.data() + 4 * i);
        c.put(name, std::move(dims), std::move(v));
      }
    }
    return c;
  }
  static ArrayContainer parse(const std::string& bytes) {
    return parse(std::span(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()));
  }

 private:
  void insert(const std::string& name, Array a) {
    if (name.empty()) throw ContractError("container entry names must not be empty");
    std::uint64_t n = 1;
    for (auto d : a.dims) n *= d;
    if (n != a.size()) throw ContractError("entry '" + name + "': payload length does not match dims");
    if (!index_.emplace(name, std::move(a)).second) throw ContractError("duplicate container entry '" + name + "'");
    order_.push_back(name);
  }

  std::vector<std::string> order_;
  std::map<std::string, Array> index_;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeFailure("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw RuntimeFailure("short write to '" + path + "'");
}

inline ArrayContainer load_container(const std::string& path) { return ArrayContainer::parse(read_file(path)); }
inline void save_container(const std::string& path, const ArrayContainer& c) { write_file(path, c.serialize()); }

}  // namespace domino::io
