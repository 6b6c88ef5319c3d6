#include "msdft/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "msdft/errors.hpp"

namespace msdft {

Tensor& ParameterStore::add(std::string name, Tensor value) {
    if (contains(name)) throw ContractError("duplicate parameter name: " + name);
    entries_.push_back({std::move(name), std::move(value)});
    return entries_.back().value;
}

bool ParameterStore::contains(const std::string& name) const {
    for (const auto& e : entries_) {
        if (e.name == name) return true;
    }
    return false;
}

const Tensor& ParameterStore::get(const std::string& name) const {
    for (const auto& e : entries_) {
        if (e.name == name) return e.value;
    }
    throw ContractError("unknown parameter: " + name);
}

Tensor& ParameterStore::get(const std::string& name) {
    return const_cast<Tensor&>(static_cast<const ParameterStore&>(*this).get(name));
}

std::size_t ParameterStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.numel();
    return n;
}

void ParameterStore::zero_grad() {
    for (auto& e : entries_) e.value.zero_grad();
}

ParameterStore ParameterStore::clone() const {
    ParameterStore copy;
    for (const auto& e : entries_) copy.add(e.name, e.value.clone_leaf());
    return copy;
}

void ParameterStore::assign_from(const ParameterStore& other) {
    if (other.size() != size()) throw ContractError("parameter stores differ in size");
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& src = other.entries_[i];
        auto& dst = entries_[i];
        if (src.name != dst.name || src.value.shape() != dst.value.shape()) {
            throw ContractError("parameter mismatch at " + dst.name);
        }
        auto out = dst.value.mutable_data();
        auto in = src.value.data();
        std::copy(in.begin(), in.end(), out.begin());
    }
}

namespace {

void put_u64(std::ofstream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint64_t get_u64(std::ifstream& is, const std::filesystem::path& path) {
    std::uint64_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) {
        throw FormatError("truncated checkpoint: " + path.string());
    }
    return v;
}

std::string get_bytes(std::ifstream& is, std::uint64_t n, const std::filesystem::path& path) {
    if (n > (std::uint64_t{1} << 32)) throw FormatError("implausible field length in " + path.string());
    std::string s(n, '\0');
    if (n && !is.read(s.data(), static_cast<std::streamsize>(n))) {
        throw FormatError("truncated checkpoint: " + path.string());
    }
    return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& params, const std::string& metadata) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
    os << kCheckpointMagic << '\n';
    put_u64(os, metadata.size());
    os.write(metadata.data(), static_cast<std::streamsize>(metadata.size()));
    put_u64(os, params.size());
    for (const auto& e : params.entries()) {
        put_u64(os, e.name.size());
        os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        put_u64(os, e.value.rank());
        for (auto extent : e.value.shape()) put_u64(os, extent);
        auto values = e.value.data();
        os.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
    }
    if (!os) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path.string());
    const std::string expected = std::string(kCheckpointMagic) + '\n';
    std::string magic(expected.size(), '\0');
    if (!is.read(magic.data(), static_cast<std::streamsize>(magic.size())) || magic != expected) {
        throw FormatError("not an MSDFTV1 checkpoint: " + path.string());
    }
    Checkpoint ckpt;
    ckpt.metadata = get_bytes(is, get_u64(is, path), path);
    const std::uint64_t count = get_u64(is, path);
    for (std::uint64_t i = 0; i < count; ++i) {
        std::string name = get_bytes(is, get_u64(is, path), path);
        const std::uint64_t rank = get_u64(is, path);
        if (rank == 0 || rank > 16) throw FormatError("bad tensor rank for " + name);
        Shape shape(rank);
        for (auto& extent : shape) extent = get_u64(is, path);
        std::vector<double> values(numel_of(shape));
        if (!is.read(reinterpret_cast<char*>(values.data()),
                     static_cast<std::streamsize>(values.size() * sizeof(double)))) {
            throw FormatError("truncated tensor data for " + name);
        }
        ckpt.params.add(std::move(name), Tensor::from(std::move(shape), std::move(values), true));
    }
    return ckpt;
}

}  // namespace msdft
