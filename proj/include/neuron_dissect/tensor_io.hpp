#ifndef NEURON_DISSECT_TENSOR_IO_HPP
#define NEURON_DISSECT_TENSOR_IO_HPP

// TensorFile layout:
//   bytes [0, 8)       magic "NDTENSR1"
//   bytes [8, 12)      header length, uint32 little-endian
//   bytes [12, 12+H)   UTF-8 JSON {"dtype":"f32","order":"row-major","shape":[...]}
//   remainder          product(shape) IEEE-754 binary32 values, little-endian
//
// The writer always emits the header as compact JSON with sorted keys, so
// encode(decode(f)) == f for every file produced by this library.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "neuron_dissect/errors.hpp"
#include "neuron_dissect/io_util.hpp"
#include "neuron_dissect/matrix.hpp"

namespace neuron_dissect {

inline constexpr std::string_view kTensorMagic = "NDTENSR1";
inline constexpr std::size_t kTensorPreamble = 12;

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<float> values;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    if (a.shape != b.shape || a.values.size() != b.values.size()) return false;
    // Bitwise, so NaN payloads compare equal to themselves.
    return std::memcmp(a.values.data(), b.values.data(),
                       a.values.size() * sizeof(float)) == 0;
  }
};

namespace detail {

inline std::uint32_t load_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void store_u32_le(std::uint32_t v, char* p) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
}

inline Error tensor_error(ErrorKind kind, std::size_t offset,
                          const std::string& what) {
  return Error(kind, what + " at byte offset " + std::to_string(offset))
      .with_offset(offset);
}

}  // namespace detail

inline Tensor decode_tensor(std::span<const unsigned char> bytes) {
  if (bytes.size() < kTensorMagic.size() ||
      std::memcmp(bytes.data(), kTensorMagic.data(), kTensorMagic.size()) != 0) {
    throw detail::tensor_error(ErrorKind::kBadMagic, 0,
                               "missing NDTENSR1 magic");
  }
  if (bytes.size() < kTensorPreamble) {
    throw detail::tensor_error(ErrorKind::kHeaderParse, kTensorMagic.size(),
                               "file ends inside header length");
  }
  const std::size_t header_len = detail::load_u32_le(bytes.data() + 8);
  if (bytes.size() < kTensorPreamble + header_len) {
    throw detail::tensor_error(ErrorKind::kHeaderParse, bytes.size(),
                               "file ends inside header (declared " +
                                   std::to_string(header_len) + " bytes)");
  }
  const std::string_view header_text(
      reinterpret_cast<const char*>(bytes.data()) + kTensorPreamble, header_len);

  Tensor tensor;
  try {
    const auto header = nlohmann::json::parse(header_text);
    if (!header.is_object()) throw std::runtime_error("header is not an object");
    if (header.at("dtype").get<std::string>() != "f32") {
      throw std::runtime_error("unsupported dtype");
    }
    if (header.at("order").get<std::string>() != "row-major") {
      throw std::runtime_error("unsupported order");
    }
    const auto& shape = header.at("shape");
    if (!shape.is_array() || shape.empty()) {
      throw std::runtime_error("shape must be a non-empty array");
    }
    for (const auto& dim : shape) {
      if (!dim.is_number_unsigned() || dim.get<std::uint64_t>() == 0) {
        throw std::runtime_error("shape entries must be positive integers");
      }
      tensor.shape.push_back(dim.get<std::size_t>());
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw detail::tensor_error(ErrorKind::kHeaderParse, kTensorPreamble,
                               std::string("invalid header: ") + e.what());
  }

  const std::size_t count =
      std::accumulate(tensor.shape.begin(), tensor.shape.end(), std::size_t{1},
                      std::multiplies<>());
  const std::size_t payload_at = kTensorPreamble + header_len;
  const std::size_t have = bytes.size() - payload_at;
  if (have < count * sizeof(float)) {
    throw detail::tensor_error(
        ErrorKind::kTruncatedPayload, bytes.size(),
        "payload has " + std::to_string(have) + " bytes, expected " +
            std::to_string(count * sizeof(float)));
  }
  if (have > count * sizeof(float)) {
    throw detail::tensor_error(ErrorKind::kTrailingData,
                               payload_at + count * sizeof(float),
                               "unexpected bytes after payload");
  }

  tensor.values.resize(count);
  const unsigned char* src = bytes.data() + payload_at;
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t bits = detail::load_u32_le(src + 4 * i);
    tensor.values[i] = std::bit_cast<float>(bits);
  }
  return tensor;
}

inline std::string encode_tensor(const Tensor& tensor) {
  nlohmann::json header;
  header["dtype"] = "f32";
  header["order"] = "row-major";
  header["shape"] = tensor.shape;
  const std::string header_text = header.dump();

  std::string out(kTensorPreamble + header_text.size() +
                      tensor.values.size() * sizeof(float),
                  '\0');
  std::memcpy(out.data(), kTensorMagic.data(), kTensorMagic.size());
  detail::store_u32_le(static_cast<std::uint32_t>(header_text.size()),
                       out.data() + 8);
  std::memcpy(out.data() + kTensorPreamble, header_text.data(),
              header_text.size());
  char* dst = out.data() + kTensorPreamble + header_text.size();
  for (std::size_t i = 0; i < tensor.values.size(); ++i) {
    detail::store_u32_le(std::bit_cast<std::uint32_t>(tensor.values[i]),
                         dst + 4 * i);
  }
  return out;
}

inline Tensor read_tensor_file(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  try {
    return decode_tensor(std::span(
        reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()));
  } catch (Error& e) {
    e.path = path.string();
    throw;
  }
}

inline void write_tensor_file(const std::filesystem::path& path,
                              const Tensor& tensor) {
  write_file_atomic(path, encode_tensor(tensor));
}

inline Tensor to_tensor(const Matrix<float>& m) {
  return Tensor{{m.rows(), m.cols()},
                std::vector<float>(m.values().begin(), m.values().end())};
}

/// Rank-2 view of a tensor; rank 1 is read as a single row.
inline Matrix<float> to_matrix(Tensor tensor) {
  if (tensor.shape.size() == 1) {
    return Matrix<float>(1, tensor.shape[0], std::move(tensor.values));
  }
  if (tensor.shape.size() != 2) {
    throw Error(ErrorKind::kShapeMismatch,
                "expected a rank-2 tensor, got rank " +
                    std::to_string(tensor.shape.size()));
  }
  return Matrix<float>(tensor.shape[0], tensor.shape[1],
                       std::move(tensor.values));
}

/// Reads an EmbeddingMatrix or ActivationTable.
inline Matrix<float> read_tensor(const std::filesystem::path& path) {
  try {
    return to_matrix(read_tensor_file(path));
  } catch (Error& e) {
    if (!e.path) e.path = path.string();
    throw;
  }
}

inline void write_tensor(const std::filesystem::path& path,
                         const Matrix<float>& m) {
  write_tensor_file(path, to_tensor(m));
}

}  // namespace neuron_dissect

#endif  // NEURON_DISSECT_TENSOR_IO_HPP
