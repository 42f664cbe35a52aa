#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gsvit/tensor.hpp"

namespace gsvit {

// A named tensor owned by a model. Buffers (batch-norm running statistics)
// are persisted in checkpoints but never optimised or counted as parameters.
template <typename T>
struct NamedTensor {
    std::string name;
    BasicTensor<T> tensor;
    bool tunable = true;
    bool buffer = false;
};

template <typename T>
class ParameterSet {
public:
    void add(std::string name, BasicTensor<T> tensor, bool tunable = true);
    void add_buffer(std::string name, BasicTensor<T> tensor);
    void append(const ParameterSet& other);

    const std::vector<NamedTensor<T>>& entries() const { return entries_; }
    std::vector<NamedTensor<T>>& entries() { return entries_; }
    std::size_t size() const { return entries_.size(); }
    const NamedTensor<T>* find(const std::string& name) const;

    // Marks every non-buffer entry tunable (or frozen) and sets requires_grad to match.
    void set_tunable(bool tunable);
    void zero_grad();

    // Element counts over non-buffer entries.
    std::size_t total_count() const;
    std::size_t tunable_count() const;

    // FNV-1a over names, shapes and raw bytes of every entry (buffers included).
    std::uint64_t checksum() const;

private:
    std::vector<NamedTensor<T>> entries_;
};

struct ParamCount {
    std::size_t total = 0;
    std::size_t tunable = 0;
    bool operator==(const ParamCount&) const = default;
};

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ULL);

extern template class ParameterSet<float>;
extern template class ParameterSet<double>;

}  // namespace gsvit
