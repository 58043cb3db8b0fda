#include "kbie/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include "kbie/errors.hpp"

namespace kbie {

namespace {

void put_u32(std::ostream& os, uint32_t x) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((x >> (8 * i)) & 0xff);
    os.write(b, 4);
}

void put_u64(std::ostream& os, uint64_t x) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((x >> (8 * i)) & 0xff);
    os.write(b, 8);
}

void put_f64(std::ostream& os, double x) { put_u64(os, std::bit_cast<uint64_t>(x)); }

uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw ParseError("checkpoint: truncated u32");
    uint32_t x = 0;
    for (int i = 0; i < 4; ++i) x |= static_cast<uint32_t>(b[i]) << (8 * i);
    return x;
}

uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw ParseError("checkpoint: truncated u64");
    uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= static_cast<uint64_t>(b[i]) << (8 * i);
    return x;
}

double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

}  // namespace

void write_checkpoint(std::ostream& os, const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
    os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    put_u64(os, tensors.size());
    for (const auto& [name, t] : tensors) {
        put_u32(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(os, static_cast<uint32_t>(t->shape.size()));
        for (int d : t->shape) put_u64(os, static_cast<uint64_t>(d));
        for (double x : t->values) put_f64(os, x);
    }
    if (!os) throw IoError("checkpoint: write failed");
}

void write_checkpoint_file(const std::string& path, const std::vector<Parameter*>& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("checkpoint: cannot open " + path + " for writing");
    std::vector<std::pair<std::string, const Tensor*>> tensors;
    tensors.reserve(params.size());
    for (const Parameter* p : params) tensors.emplace_back(p->name, &p->value);
    write_checkpoint(os, tensors);
}

std::vector<std::pair<std::string, Tensor>> read_checkpoint(std::istream& is) {
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
        throw ParseError("checkpoint: bad magic");
    }
    uint64_t count = get_u64(is);
    std::vector<std::pair<std::string, Tensor>> out;
    out.reserve(count);
    std::set<std::string> seen;
    for (uint64_t i = 0; i < count; ++i) {
        uint32_t name_len = get_u32(is);
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len)) throw ParseError("checkpoint: truncated name");
        if (!seen.insert(name).second) throw ValidationError("checkpoint: duplicate tensor '" + name + "'");
        uint32_t rank = get_u32(is);
        Shape shape(rank);
        for (uint32_t d = 0; d < rank; ++d) shape[d] = static_cast<int>(get_u64(is));
        int64_t n = shape_numel(shape);
        std::vector<double> values(static_cast<size_t>(n));
        for (auto& x : values) x = get_f64(is);
        out.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
    }
    return out;
}

std::vector<std::pair<std::string, Tensor>> read_checkpoint_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("checkpoint: cannot open " + path);
    return read_checkpoint(is);
}

void load_into_params(const std::vector<std::pair<std::string, Tensor>>& entries,
                      const std::vector<Parameter*>& params) {
    std::map<std::string, const Tensor*> by_name;
    for (const auto& [name, t] : entries) by_name[name] = &t;
    for (Parameter* p : params) {
        auto it = by_name.find(p->name);
        if (it == by_name.end()) throw ValidationError("checkpoint: missing tensor '" + p->name + "'");
        if (!same_shape(it->second->shape, p->value.shape)) {
            throw ValidationError("checkpoint: shape mismatch for '" + p->name + "': file " +
                                  shape_str(it->second->shape) + " vs model " + shape_str(p->value.shape));
        }
        p->value = *it->second;
        p->zero_grad();
    }
}

}  // namespace kbie
