#include "psld/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace psld {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint codec assumes a little-endian host");

template <typename T>
void put(std::string& out, T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.append(buf, sizeof(T));
}

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}

    bool done() const { return pos_ == bytes_.size(); }

    template <typename T>
    T get(const char* what) {
        need(sizeof(T), what);
        T value;
        std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }

    std::string get_string(std::size_t n) {
        need(n, "tensor name");
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

private:
    void need(std::size_t n, const char* what) {
        if (bytes_.size() - pos_ < n)
            throw FormatError(std::string("checkpoint truncated while reading ") + what);
    }

    const std::string& bytes_;
    std::size_t pos_ = sizeof(kCheckpointMagic) - 1;
};

bool is_bias(const std::string& name) {
    return name.size() >= 5 && name.compare(name.size() - 5, 5, ".bias") == 0;
}

} // namespace

std::string encode_checkpoint(std::span<const StoredTensor> tensors) {
    std::string out(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);
    for (const auto& t : tensors) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
        out += t.name;
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.dims.size()));
        for (auto d : t.dims) put<std::uint64_t>(out, d);
        for (double v : t.values) put<double>(out, v);
    }
    return out;
}

std::vector<StoredTensor> decode_checkpoint(const std::string& bytes) {
    constexpr std::size_t magic_len = sizeof(kCheckpointMagic) - 1;
    if (bytes.size() < magic_len || bytes.compare(0, magic_len, kCheckpointMagic) != 0)
        throw FormatError("bad magic: not a PSLD1 checkpoint");
    Reader in(bytes);
    std::vector<StoredTensor> out;
    while (!in.done()) {
        StoredTensor t;
        const auto name_len = in.get<std::uint32_t>("name length");
        t.name = in.get_string(name_len);
        const auto rank = in.get<std::uint32_t>("rank");
        if (rank > 8) throw FormatError("checkpoint: implausible rank for " + t.name);
        std::uint64_t count = 1;
        for (std::uint32_t r = 0; r < rank; ++r) {
            t.dims.push_back(in.get<std::uint64_t>("dims"));
            count *= t.dims.back();
        }
        if (count > bytes.size() / sizeof(double))
            throw FormatError("checkpoint truncated in payload of " + t.name);
        t.values.reserve(count);
        for (std::uint64_t i = 0; i < count; ++i) t.values.push_back(in.get<double>("payload"));
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<StoredTensor> to_stored(std::span<const ConstNamedTensor> tensors) {
    std::vector<StoredTensor> out;
    for (const auto& t : tensors) {
        StoredTensor s;
        s.name = t.name;
        if (is_bias(t.name)) {
            s.dims = {t.value->size()};
        } else {
            s.dims = {t.value->rows(), t.value->cols()};
        }
        s.values = t.value->data();
        out.push_back(std::move(s));
    }
    return out;
}

void assign_stored(std::span<const StoredTensor> stored, std::span<const NamedTensor> targets) {
    std::unordered_map<std::string, const StoredTensor*> by_name;
    for (const auto& s : stored) by_name[s.name] = &s;
    for (const auto& t : targets) {
        const auto it = by_name.find(t.name);
        if (it == by_name.end()) throw ShapeError("checkpoint is missing tensor " + t.name);
        const auto& s = *it->second;
        const bool shape_ok = is_bias(t.name)
                                  ? s.dims.size() == 1 && s.dims[0] == t.value->size()
                                  : s.dims.size() == 2 && s.dims[0] == t.value->rows() &&
                                        s.dims[1] == t.value->cols();
        if (!shape_ok) throw ShapeError("checkpoint tensor " + t.name + " has the wrong shape");
        t.value->data() = s.values;
    }
    if (by_name.size() != targets.size())
        throw ShapeError("checkpoint holds " + std::to_string(by_name.size()) +
                         " tensors, model expects " + std::to_string(targets.size()));
}

void write_checkpoint(const std::filesystem::path& path, std::span<const ConstNamedTensor> tensors) {
    const auto stored = to_stored(tensors);
    const auto bytes = encode_checkpoint(stored);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<StoredTensor> read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open checkpoint " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return decode_checkpoint(ss.str());
}

} // namespace psld
