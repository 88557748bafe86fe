#include "encscan/formats.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace encscan {

namespace {

// Byte-level little-endian writer/reader; keeps the formats host-independent.
struct Writer {
    std::ofstream out;
    explicit Writer(const std::string& path) : out(path, std::ios::binary) {
        if (!out) throw FormatError("cannot open " + path + " for writing");
    }
    void u8(uint8_t v) { out.put(static_cast<char>(v)); }
    void u16(uint16_t v) {
        for (int i = 0; i < 2; ++i) u8(static_cast<uint8_t>(v >> (8 * i)));
    }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<uint8_t>(v >> (8 * i)));
    }
    void f32(float v) {
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }
    void f32s(const std::vector<float>& vs) {
        for (float v : vs) f32(v);
    }
    void magic(const char* m) { out.write(m, 4); }
    void close(const std::string& path) {
        out.flush();
        if (!out) throw FormatError("write failed for " + path);
    }
};

struct Reader {
    std::vector<uint8_t> bytes;
    size_t pos = 0;
    std::string path;
    explicit Reader(const std::string& p) : path(p) {
        std::ifstream in(p, std::ios::binary);
        if (!in) throw FormatError("cannot open " + p);
        bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    void need(size_t n) {
        if (pos + n > bytes.size())
            throw FormatError(path + ": truncated (needed " + std::to_string(n) + " bytes at offset " +
                              std::to_string(pos) + ", file has " + std::to_string(bytes.size()) + ")");
    }
    uint8_t u8() {
        need(1);
        return bytes[pos++];
    }
    uint16_t u16() {
        need(2);
        uint16_t v = static_cast<uint16_t>(bytes[pos] | (bytes[pos + 1] << 8));
        pos += 2;
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    float f32() {
        uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    void f32s(std::vector<float>& out, size_t n) {
        need(4 * n);
        out.resize(n);
        std::memcpy(out.data(), bytes.data() + pos, 4 * n);  // little-endian host
        pos += 4 * n;
    }
    void expect_magic(const char* m) {
        need(4);
        if (std::memcmp(bytes.data() + pos, m, 4) != 0)
            throw FormatError(path + ": bad magic, expected \"" + std::string(m, 4) + "\"");
        pos += 4;
    }
    void expect_end() {
        if (pos != bytes.size())
            throw FormatError(path + ": " + std::to_string(bytes.size() - pos) + " trailing bytes");
    }
};

}  // namespace

void save_encoder(const EncoderNet& net, const std::string& path) {
    net.validate();
    Writer w(path);
    w.magic("ENCW");
    w.u16(kEncwVersion);
    w.u32(static_cast<uint32_t>(net.layer_count()));
    for (size_t l = 0; l < net.layer_count(); ++l) {
        w.u32(static_cast<uint32_t>(net.weights[l].rows()));
        w.u32(static_cast<uint32_t>(net.weights[l].cols()));
        w.f32s(net.weights[l].data);
        w.f32s(net.biases[l].data);
    }
    w.u8(static_cast<uint8_t>(net.activation));
    w.u8(net.normalize_output ? 1 : 0);
    w.close(path);
}

EncoderNet load_encoder(const std::string& path) {
    Reader r(path);
    r.expect_magic("ENCW");
    uint16_t version = r.u16();
    if (version != kEncwVersion)
        throw FormatError(path + ": unsupported encoder version " + std::to_string(version));
    uint32_t layers = r.u32();
    if (layers == 0) throw FormatError(path + ": encoder has zero layers");
    EncoderNet net;
    for (uint32_t l = 0; l < layers; ++l) {
        uint32_t rows = r.u32(), cols = r.u32();
        if (rows == 0 || cols == 0)
            throw FormatError(path + ": layer " + std::to_string(l) + " has zero extent");
        Tensor w = Tensor::zeros({rows, cols});
        r.f32s(w.data, static_cast<size_t>(rows) * cols);
        Tensor b = Tensor::zeros({rows});
        r.f32s(b.data, rows);
        if (l == 0) net.layer_dims.push_back(cols);
        if (net.layer_dims.back() != cols)
            throw FormatError(path + ": layer " + std::to_string(l) + " input dim " +
                              std::to_string(cols) + " does not chain with previous output " +
                              std::to_string(net.layer_dims.back()));
        net.layer_dims.push_back(rows);
        net.weights.push_back(std::move(w));
        net.biases.push_back(std::move(b));
    }
    uint8_t act = r.u8();
    if (act > 1) throw FormatError(path + ": unknown activation code " + std::to_string(act));
    net.activation = static_cast<Activation>(act);
    uint8_t norm = r.u8();
    if (norm > 1) throw FormatError(path + ": bad normalize flag " + std::to_string(norm));
    net.normalize_output = norm == 1;
    r.expect_end();
    net.validate();
    return net;
}

void save_dataset(const SampleSet& set, const std::string& path) {
    set.validate();
    Writer w(path);
    w.magic("DSET");
    w.u16(kDsetVersion);
    w.u32(static_cast<uint32_t>(set.count()));
    w.u32(static_cast<uint32_t>(set.geom.height));
    w.u32(static_cast<uint32_t>(set.geom.width));
    w.u32(static_cast<uint32_t>(set.geom.channels));
    w.f32s(set.samples.data);
    w.u8(set.labeled() ? 1 : 0);
    if (set.labeled())
        for (int32_t lab : *set.labels) w.u32(static_cast<uint32_t>(lab));
    w.close(path);
}

SampleSet load_dataset(const std::string& path) {
    Reader r(path);
    r.expect_magic("DSET");
    uint16_t version = r.u16();
    if (version != kDsetVersion)
        throw FormatError(path + ": unsupported dataset version " + std::to_string(version));
    uint32_t n = r.u32(), h = r.u32(), w = r.u32(), c = r.u32();
    if (h == 0 || w == 0 || c == 0) throw FormatError(path + ": zero geometry extent");
    SampleSet set;
    set.geom = {static_cast<int64_t>(h), static_cast<int64_t>(w), static_cast<int64_t>(c)};
    set.samples = Tensor::zeros({static_cast<int64_t>(n), set.geom.dim()});
    r.f32s(set.samples.data, static_cast<size_t>(n) * static_cast<size_t>(set.geom.dim()));
    uint8_t has_labels = r.u8();
    if (has_labels > 1) throw FormatError(path + ": bad label flag " + std::to_string(has_labels));
    if (has_labels) {
        std::vector<int32_t> labels(n);
        for (uint32_t i = 0; i < n; ++i) labels[i] = static_cast<int32_t>(r.u32());
        set.labels = std::move(labels);
    }
    r.expect_end();
    set.validate();
    return set;
}

// ---- base64 ----

namespace {
constexpr char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}
}  // namespace

std::string base64_encode(const uint8_t* data, size_t len) {
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    for (size_t i = 0; i < len; i += 3) {
        uint32_t chunk = static_cast<uint32_t>(data[i]) << 16;
        size_t rest = len - i;
        if (rest > 1) chunk |= static_cast<uint32_t>(data[i + 1]) << 8;
        if (rest > 2) chunk |= data[i + 2];
        out.push_back(kB64[(chunk >> 18) & 63]);
        out.push_back(kB64[(chunk >> 12) & 63]);
        out.push_back(rest > 1 ? kB64[(chunk >> 6) & 63] : '=');
        out.push_back(rest > 2 ? kB64[chunk & 63] : '=');
    }
    return out;
}

std::vector<uint8_t> base64_decode(const std::string& text) {
    if (text.size() % 4 != 0) throw FormatError("base64 payload length not a multiple of 4");
    std::vector<uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    for (size_t i = 0; i < text.size(); i += 4) {
        int pad = 0;
        uint32_t chunk = 0;
        for (int j = 0; j < 4; ++j) {
            char c = text[i + j];
            if (c == '=') {
                if (i + 4 != text.size() || j < 2) throw FormatError("base64: misplaced padding");
                ++pad;
                chunk <<= 6;
                continue;
            }
            if (pad > 0) throw FormatError("base64: data after padding");
            int v = b64_value(c);
            if (v < 0) throw FormatError("base64: invalid character");
            chunk = (chunk << 6) | static_cast<uint32_t>(v);
        }
        out.push_back(static_cast<uint8_t>((chunk >> 16) & 0xFF));
        if (pad < 2) out.push_back(static_cast<uint8_t>((chunk >> 8) & 0xFF));
        if (pad < 1) out.push_back(static_cast<uint8_t>(chunk & 0xFF));
    }
    return out;
}

std::string base64_encode_floats(const std::vector<float>& v) {
    // Stored little-endian; this host is little-endian, so raw bytes round-trip.
    return base64_encode(reinterpret_cast<const uint8_t*>(v.data()), v.size() * 4);
}

std::vector<float> base64_decode_floats(const std::string& text) {
    std::vector<uint8_t> bytes = base64_decode(text);
    if (bytes.size() % 4 != 0) throw FormatError("float payload has " + std::to_string(bytes.size()) + " bytes");
    std::vector<float> out(bytes.size() / 4);
    std::memcpy(out.data(), bytes.data(), bytes.size());
    return out;
}

// ---- digests ----

std::string digest_bytes(const uint8_t* data, size_t len) {
    uint64_t h = 0xCBF29CE484222325ull;
    for (size_t i = 0; i < len; ++i) {
        h ^= data[i];
        h *= 0x100000001B3ull;
    }
    std::ostringstream os;
    os << std::hex;
    for (int i = 15; i >= 0; --i) os << "0123456789abcdef"[(h >> (4 * i)) & 0xF];
    return os.str();
}

std::string digest_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path + " for digest");
    std::vector<uint8_t> bytes(std::istreambuf_iterator<char>(in), {});
    return digest_bytes(bytes.data(), bytes.size());
}

std::string digest_string(const std::string& text) {
    return digest_bytes(reinterpret_cast<const uint8_t*>(text.data()), text.size());
}

}  // namespace encscan
