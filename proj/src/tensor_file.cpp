#include "upseg/tensor_file.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>

#include "upseg/errors.hpp"

namespace upseg {
namespace {

constexpr std::uint8_t kMagic[4] = {'U', 'T', 'S', 'R'};
constexpr std::uint8_t kVersion = 0x01;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
    }
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    bool done() const { return pos_ == bytes_.size(); }

    std::span<const std::uint8_t> take(std::size_t n, const std::string& what) {
        if (bytes_.size() - pos_ < n) throw FormatError("truncated tensor file: " + what);
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

    template <typename T>
    T le(const std::string& what) {
        auto s = take(sizeof(T), what);
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(s[i]) << (8 * i));
        return v;
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

bool valid_dtype(std::uint8_t code) { return code >= 1 && code <= 3; }

}  // namespace

std::size_t dtype_size(DType dtype) {
    switch (dtype) {
        case DType::F32: return 4;
        case DType::F64: return 8;
        case DType::U8: return 1;
    }
    throw FormatError("unknown dtype");
}

std::uint64_t TensorRecord::numel() const {
    std::uint64_t n = 1;
    for (auto e : shape) {
        if (e != 0 && n > std::numeric_limits<std::uint64_t>::max() / e) {
            throw FormatError("record '" + name + "': extent product overflows");
        }
        n *= e;
    }
    return n;
}

std::vector<std::uint8_t> encode_records(const std::vector<TensorRecord>& records) {
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    out.push_back(kVersion);
    std::set<std::string> names;
    for (const auto& r : records) {
        if (r.name.size() > 0xFFFF) throw FormatError("record name too long: " + r.name.substr(0, 32));
        if (!std::all_of(r.name.begin(), r.name.end(),
                         [](char ch) { return static_cast<unsigned char>(ch) < 0x80; })) {
            throw FormatError("record name is not ASCII: " + r.name);
        }
        if (!names.insert(r.name).second) throw FormatError("duplicate record name '" + r.name + "'");
        if (!valid_dtype(static_cast<std::uint8_t>(r.dtype))) {
            throw FormatError("record '" + r.name + "': unknown dtype");
        }
        if (r.shape.size() > 0xFF) throw FormatError("record '" + r.name + "': rank exceeds 255");
        if (r.payload.size() != r.numel() * dtype_size(r.dtype)) {
            throw FormatError("record '" + r.name + "': payload size does not match shape");
        }
        put_le<std::uint16_t>(out, static_cast<std::uint16_t>(r.name.size()));
        out.insert(out.end(), r.name.begin(), r.name.end());
        out.push_back(static_cast<std::uint8_t>(r.dtype));
        out.push_back(static_cast<std::uint8_t>(r.shape.size()));
        for (auto e : r.shape) put_le<std::uint64_t>(out, e);
        out.insert(out.end(), r.payload.begin(), r.payload.end());
    }
    return out;
}

std::vector<TensorRecord> decode_records(std::span<const std::uint8_t> bytes) {
    Reader in(bytes);
    auto magic = in.take(4, "missing magic");
    if (!std::equal(magic.begin(), magic.end(), std::begin(kMagic))) {
        throw FormatError("bad magic: not a UTSR tensor file");
    }
    const auto version = in.le<std::uint8_t>("missing version");
    if (version != kVersion) {
        throw FormatError("unsupported UTSR version " + std::to_string(version));
    }
    std::vector<TensorRecord> records;
    std::set<std::string> names;
    while (!in.done()) {
        const std::string where = "record #" + std::to_string(records.size());
        TensorRecord r;
        const auto len = in.le<std::uint16_t>(where + " name length");
        auto name = in.take(len, where + " name");
        r.name.assign(name.begin(), name.end());
        const std::string label = "record '" + r.name + "'";
        const auto code = in.le<std::uint8_t>(label + " dtype");
        if (!valid_dtype(code)) {
            throw FormatError(label + ": unknown dtype code " + std::to_string(code));
        }
        r.dtype = static_cast<DType>(code);
        const auto rank = in.le<std::uint8_t>(label + " rank");
        for (std::uint8_t i = 0; i < rank; ++i) r.shape.push_back(in.le<std::uint64_t>(label + " extents"));
        const std::uint64_t n = r.numel();
        if (n > std::numeric_limits<std::size_t>::max() / dtype_size(r.dtype)) {
            throw FormatError(label + ": payload too large");
        }
        auto payload = in.take(static_cast<std::size_t>(n) * dtype_size(r.dtype), label + " payload");
        r.payload.assign(payload.begin(), payload.end());
        if (!names.insert(r.name).second) throw FormatError("duplicate " + label);
        records.push_back(std::move(r));
    }
    return records;
}

void write_tensor_file(const std::filesystem::path& path, const std::vector<TensorRecord>& records) {
    auto bytes = encode_records(records);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

std::vector<TensorRecord> read_tensor_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_records(bytes);
}

TensorRecord to_record(const std::string& name, const Tensor& tensor, DType dtype) {
    TensorRecord r;
    r.name = name;
    r.dtype = dtype;
    for (auto e : tensor.shape()) r.shape.push_back(static_cast<std::uint64_t>(e));
    auto data = tensor.data();
    r.payload.reserve(data.size() * dtype_size(dtype));
    for (double v : data) {
        switch (dtype) {
            case DType::F64: put_le(r.payload, std::bit_cast<std::uint64_t>(v)); break;
            case DType::F32: put_le(r.payload, std::bit_cast<std::uint32_t>(static_cast<float>(v))); break;
            case DType::U8:
                if (!(v >= 0.0 && v <= 255.0)) throw DomainError("value out of u8 range in " + name);
                r.payload.push_back(static_cast<std::uint8_t>(v));
                break;
        }
    }
    return r;
}

TensorRecord to_record(const std::string& name, const Mask& mask) {
    TensorRecord r;
    r.name = name;
    r.dtype = DType::U8;
    r.shape = {static_cast<std::uint64_t>(mask.batch), static_cast<std::uint64_t>(mask.height),
               static_cast<std::uint64_t>(mask.width)};
    r.payload = mask.labels;
    return r;
}

Tensor to_tensor(const TensorRecord& record) {
    Shape shape;
    for (auto e : record.shape) shape.push_back(static_cast<std::int64_t>(e));
    const std::size_t n = static_cast<std::size_t>(record.numel());
    std::vector<double> data(n);
    const std::uint8_t* p = record.payload.data();
    for (std::size_t i = 0; i < n; ++i) {
        switch (record.dtype) {
            case DType::F64: {
                std::uint64_t bits = 0;
                for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(p[i * 8 + b]) << (8 * b);
                data[i] = std::bit_cast<double>(bits);
                break;
            }
            case DType::F32: {
                std::uint32_t bits = 0;
                for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(p[i * 4 + b]) << (8 * b);
                data[i] = std::bit_cast<float>(bits);
                break;
            }
            case DType::U8: data[i] = p[i]; break;
        }
    }
    if (shape.empty()) shape = {1};
    return Tensor::from_data(shape, std::move(data));
}

Mask to_mask(const TensorRecord& record) {
    if (record.dtype != DType::U8 || record.shape.size() != 3) {
        throw FormatError("record '" + record.name + "' is not a u8 N x H x W mask");
    }
    Mask m;
    m.batch = static_cast<std::int64_t>(record.shape[0]);
    m.height = static_cast<std::int64_t>(record.shape[1]);
    m.width = static_cast<std::int64_t>(record.shape[2]);
    m.labels = record.payload;
    return m;
}

const TensorRecord& find_record(const std::vector<TensorRecord>& records, const std::string& name) {
    for (const auto& r : records) {
        if (r.name == name) return r;
    }
    throw FormatError("missing record '" + name + "'");
}

}  // namespace upseg
