#pragma once

// NPY v1.0 reader/writer restricted to little-endian f32/f64, C-order.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mvgeom/error.hpp"

namespace mvgeom {

enum class Dtype { F32, F64 };

struct ArrayFile {
  std::vector<std::size_t> shape;
  std::variant<std::vector<float>, std::vector<double>> data;

  ArrayFile() : shape{0}, data(std::vector<double>{}) {}
  ArrayFile(std::vector<std::size_t> s, std::vector<float> v) : shape(std::move(s)), data(std::move(v)) {
    check();
  }
  ArrayFile(std::vector<std::size_t> s, std::vector<double> v) : shape(std::move(s)), data(std::move(v)) {
    check();
  }

  Dtype dtype() const { return data.index() == 0 ? Dtype::F32 : Dtype::F64; }

  std::size_t size() const {
    return std::visit([](const auto& v) { return v.size(); }, data);
  }

  static std::size_t element_count(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
  }

  /// Elements widened to f64 (exact for both dtypes).
  std::vector<double> to_f64() const {
    return std::visit([](const auto& v) { return std::vector<double>(v.begin(), v.end()); }, data);
  }

  bool operator==(const ArrayFile& other) const = default;

 private:
  void check() const {
    if (element_count(shape) != size())
      throw Error(ErrorCode::ShapeMismatch, "shape does not match element count");
  }
};

namespace detail {

inline constexpr char kNpyMagic[] = "\x93NUMPY";
inline constexpr std::size_t kNpyMagicLen = 6;

template <typename T>
T byteswap_if_big(T value) {
  if constexpr (std::endian::native == std::endian::little) {
    return value;
  } else {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    std::reverse(bytes, bytes + sizeof(T));
    std::memcpy(&value, bytes, sizeof(T));
    return value;
  }
}

inline std::string npy_header_dict(std::string_view descr, const std::vector<std::size_t>& shape) {
  std::string s = "{'descr': '";
  s += descr;
  s += "', 'fortran_order': False, 'shape': (";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    s += std::to_string(shape[i]);
    if (shape.size() == 1 || i + 1 < shape.size()) s += ",";
    if (i + 1 < shape.size()) s += " ";
  }
  s += "), }";
  return s;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\n')) s.remove_suffix(1);
  return s;
}

// Value text following 'key': in the header dict; stops at the matching
// delimiter for tuples and at the next comma otherwise.
inline std::string_view dict_value(std::string_view dict, std::string_view key, const std::string& path) {
  std::string quoted = "'" + std::string(key) + "'";
  auto pos = dict.find(quoted);
  if (pos == std::string_view::npos) throw Error(ErrorCode::MalformedHeader, path + ": missing key " + quoted);
  pos = dict.find(':', pos + quoted.size());
  if (pos == std::string_view::npos) throw Error(ErrorCode::MalformedHeader, path + ": bad dict");
  std::string_view rest = trim(dict.substr(pos + 1));
  std::size_t end;
  if (!rest.empty() && rest.front() == '(') {
    end = rest.find(')');
    if (end == std::string_view::npos) throw Error(ErrorCode::MalformedHeader, path + ": unterminated shape");
    return rest.substr(0, end + 1);
  }
  end = rest.find_first_of(",}");
  return trim(rest.substr(0, end));
}

inline std::vector<std::size_t> parse_shape(std::string_view tuple, const std::string& path) {
  std::vector<std::size_t> shape;
  tuple.remove_prefix(1);
  tuple.remove_suffix(1);
  while (true) {
    tuple = trim(tuple);
    if (tuple.empty()) break;
    std::size_t comma = tuple.find(',');
    std::string_view item = trim(tuple.substr(0, comma));
    if (item.empty()) throw Error(ErrorCode::MalformedHeader, path + ": empty shape entry");
    std::size_t value = 0;
    for (char c : item) {
      if (c < '0' || c > '9') throw Error(ErrorCode::MalformedHeader, path + ": bad shape entry");
      value = value * 10 + static_cast<std::size_t>(c - '0');
    }
    shape.push_back(value);
    if (comma == std::string_view::npos) break;
    tuple.remove_prefix(comma + 1);
  }
  return shape;
}

}  // namespace detail

inline ArrayFile read_array(const std::filesystem::path& path) {
  const std::string name = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, name);

  char prefix[10];
  in.read(prefix, 10);
  if (in.gcount() < 10 || std::memcmp(prefix, detail::kNpyMagic, detail::kNpyMagicLen) != 0)
    throw Error(ErrorCode::BadMagic, name);
  if (prefix[6] != 1 || prefix[7] != 0) throw Error(ErrorCode::BadMagic, name + ": only NPY version 1.0 is supported");

  const std::size_t header_len = static_cast<unsigned char>(prefix[8]) |
                                 (static_cast<std::size_t>(static_cast<unsigned char>(prefix[9])) << 8);
  std::string dict(header_len, '\0');
  in.read(dict.data(), static_cast<std::streamsize>(header_len));
  if (static_cast<std::size_t>(in.gcount()) != header_len) throw Error(ErrorCode::MalformedHeader, name + ": truncated header");

  std::string_view descr = detail::dict_value(dict, "descr", name);
  if (descr.size() < 2 || (descr.front() != '\'' && descr.front() != '"'))
    throw Error(ErrorCode::MalformedHeader, name + ": bad descr");
  descr = descr.substr(1, descr.size() - 2);
  Dtype dtype;
  if (descr == "<f4") {
    dtype = Dtype::F32;
  } else if (descr == "<f8") {
    dtype = Dtype::F64;
  } else {
    throw Error(ErrorCode::UnsupportedDtype, name + ": dtype " + std::string(descr));
  }

  const std::string_view fortran = detail::dict_value(dict, "fortran_order", name);
  if (fortran != "False") throw Error(ErrorCode::MalformedHeader, name + ": fortran-order arrays are not supported");

  std::string_view shape_text = detail::dict_value(dict, "shape", name);
  if (shape_text.empty() || shape_text.front() != '(') throw Error(ErrorCode::MalformedHeader, name + ": bad shape");
  std::vector<std::size_t> shape = detail::parse_shape(shape_text, name);

  std::vector<char> payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t count = ArrayFile::element_count(shape);
  const std::size_t width = dtype == Dtype::F32 ? 4 : 8;
  if (payload.size() != count * width)
    throw Error(ErrorCode::HeaderShapeMismatch, name + ": header declares " + std::to_string(count) +
                                                     " elements, payload holds " + std::to_string(payload.size()) +
                                                     " bytes");

  auto decode = [&]<typename T>(std::vector<T> out) {
    if (!payload.empty()) std::memcpy(out.data(), payload.data(), payload.size());
    for (auto& v : out) v = detail::byteswap_if_big(v);
    return ArrayFile(std::move(shape), std::move(out));
  };
  if (dtype == Dtype::F32) return decode(std::vector<float>(count));
  return decode(std::vector<double>(count));
}

inline void write_array(const std::filesystem::path& path, const ArrayFile& a) {
  const std::string name = path.string();
  if (ArrayFile::element_count(a.shape) != a.size())
    throw Error(ErrorCode::ShapeMismatch, name + ": shape does not match element count");

  std::string dict = detail::npy_header_dict(a.dtype() == Dtype::F32 ? "<f4" : "<f8", a.shape);
  // Pad so the payload starts on a 64-byte boundary; the header ends with '\n'.
  const std::size_t unpadded = 10 + dict.size() + 1;
  dict.append((64 - unpadded % 64) % 64, ' ');
  dict.push_back('\n');
  if (dict.size() > 0xFFFF) throw Error(ErrorCode::IoFailure, name + ": header too long for NPY v1.0");

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, name);
  out.write(detail::kNpyMagic, detail::kNpyMagicLen);
  const char version[2] = {1, 0};
  out.write(version, 2);
  const unsigned char len[2] = {static_cast<unsigned char>(dict.size() & 0xFF),
                                static_cast<unsigned char>(dict.size() >> 8)};
  out.write(reinterpret_cast<const char*>(len), 2);
  out.write(dict.data(), static_cast<std::streamsize>(dict.size()));

  std::visit(
      [&](const auto& values) {
        using T = typename std::decay_t<decltype(values)>::value_type;
        if constexpr (std::endian::native == std::endian::little) {
          out.write(reinterpret_cast<const char*>(values.data()),
                    static_cast<std::streamsize>(values.size() * sizeof(T)));
        } else {
          for (T v : values) {
            T le = detail::byteswap_if_big(v);
            out.write(reinterpret_cast<const char*>(&le), sizeof(T));
          }
        }
      },
      a.data);
  if (!out) throw Error(ErrorCode::IoFailure, name + ": write failed");
}

}  // namespace mvgeom
