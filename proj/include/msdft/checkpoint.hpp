#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "msdft/tensor.hpp"

namespace msdft {

struct NamedTensor {
    std::string name;
    Tensor value;
};

/// Ordered, name-addressable set of trainable tensors.
class ParameterStore {
public:
    /// The returned reference is invalidated by the next add().
    Tensor& add(std::string name, Tensor value);
    const Tensor& get(const std::string& name) const;
    Tensor& get(const std::string& name);
    bool contains(const std::string& name) const;

    std::vector<NamedTensor>& entries() { return entries_; }
    const std::vector<NamedTensor>& entries() const { return entries_; }

    std::size_t size() const { return entries_.size(); }
    std::size_t scalar_count() const;
    void zero_grad();
    /// Deep copy; the copies are fresh leaves that keep requires_grad.
    ParameterStore clone() const;
    /// Copies values from `other` (same names and shapes) into this store.
    void assign_from(const ParameterStore& other);

private:
    std::vector<NamedTensor> entries_;
};

inline constexpr char kCheckpointMagic[] = "MSDFTV1";

/**
 * Binary checkpoint layout (little-endian, native doubles):
 *
 *   "MSDFTV1\n"
 *   u64 metadata length, metadata bytes (free-form text, JSON in practice)
 *   u64 tensor count
 *   per tensor: u64 name length, name bytes, u64 rank, rank x u64 extents,
 *               numel x f64 values in row-major order
 */
void save_checkpoint(const std::filesystem::path& path, const ParameterStore& params, const std::string& metadata);

struct Checkpoint {
    ParameterStore params;
    std::string metadata;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace msdft
