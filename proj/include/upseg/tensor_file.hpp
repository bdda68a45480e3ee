#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "upseg/mask.hpp"
#include "upseg/tensor.hpp"

namespace upseg {

// "UTSR" container, all integers little-endian:
//   magic "UTSR", version byte 0x01, then until end of file one record each:
//   u16 name length, name bytes (ASCII), u8 dtype, u8 rank, u64 extents,
//   raw row-major payload.

enum class DType : std::uint8_t { F32 = 1, F64 = 2, U8 = 3 };

std::size_t dtype_size(DType dtype);

struct TensorRecord {
    std::string name;
    DType dtype = DType::F64;
    std::vector<std::uint64_t> shape;
    std::vector<std::uint8_t> payload;  // already little-endian

    std::uint64_t numel() const;
    bool operator==(const TensorRecord&) const = default;
};

std::vector<std::uint8_t> encode_records(const std::vector<TensorRecord>& records);
/// Throws FormatError on bad magic or version, unknown dtype, truncation, or
/// duplicate names.
std::vector<TensorRecord> decode_records(std::span<const std::uint8_t> bytes);

void write_tensor_file(const std::filesystem::path& path, const std::vector<TensorRecord>& records);
std::vector<TensorRecord> read_tensor_file(const std::filesystem::path& path);

TensorRecord to_record(const std::string& name, const Tensor& tensor, DType dtype = DType::F64);
TensorRecord to_record(const std::string& name, const Mask& mask);
/// Any dtype, widened to double.
Tensor to_tensor(const TensorRecord& record);
/// Requires a rank-3 U8 record.
Mask to_mask(const TensorRecord& record);

const TensorRecord& find_record(const std::vector<TensorRecord>& records, const std::string& name);

}  // namespace upseg
