#include "gsvit/params.hpp"

#include "gsvit/error.hpp"

namespace gsvit {

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

template <typename T>
void ParameterSet<T>::add(std::string name, BasicTensor<T> tensor, bool tunable) {
    if (find(name) != nullptr) {
        throw Error("duplicate parameter name " + name);
    }
    tensor.set_requires_grad(tunable);
    entries_.push_back({std::move(name), std::move(tensor), tunable, false});
}

template <typename T>
void ParameterSet<T>::add_buffer(std::string name, BasicTensor<T> tensor) {
    if (find(name) != nullptr) {
        throw Error("duplicate parameter name " + name);
    }
    tensor.set_requires_grad(false);
    entries_.push_back({std::move(name), std::move(tensor), false, true});
}

template <typename T>
void ParameterSet<T>::append(const ParameterSet& other) {
    for (const auto& e : other.entries_) {
        if (find(e.name) != nullptr) {
            throw Error("duplicate parameter name " + e.name);
        }
        entries_.push_back(e);
    }
}

template <typename T>
const NamedTensor<T>* ParameterSet<T>::find(const std::string& name) const {
    for (const auto& e : entries_) {
        if (e.name == name) {
            return &e;
        }
    }
    return nullptr;
}

template <typename T>
void ParameterSet<T>::set_tunable(bool tunable) {
    for (auto& e : entries_) {
        if (!e.buffer) {
            e.tunable = tunable;
            e.tensor.set_requires_grad(tunable);
        }
    }
}

template <typename T>
void ParameterSet<T>::zero_grad() {
    for (auto& e : entries_) {
        e.tensor.zero_grad();
    }
}

template <typename T>
std::size_t ParameterSet<T>::total_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) {
        if (!e.buffer) {
            n += e.tensor.numel();
        }
    }
    return n;
}

template <typename T>
std::size_t ParameterSet<T>::tunable_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) {
        if (!e.buffer && e.tunable) {
            n += e.tensor.numel();
        }
    }
    return n;
}

template <typename T>
std::uint64_t ParameterSet<T>::checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& e : entries_) {
        h = fnv1a64(e.name.data(), e.name.size(), h);
        for (std::size_t d : e.tensor.shape()) {
            const std::uint64_t dim = d;
            h = fnv1a64(&dim, sizeof(dim), h);
        }
        h = fnv1a64(e.tensor.data().data(), e.tensor.numel() * sizeof(T), h);
    }
    return h;
}

template class ParameterSet<float>;
template class ParameterSet<double>;

}  // namespace gsvit
