#pragma once

#include <cstdint>
#include <cstring>
#include <string>

#include "apgw/model.hpp"

namespace apgw {

/// FNV-1a 64-bit over raw bytes; used for run-manifest digests and to tag
/// datasets so cross-dataset model comparisons can be rejected.
inline std::uint64_t fnv1a64(const void* data, std::size_t size,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

inline std::string digest_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::uint64_t dataset_digest(const SurvivalDataset& data) {
    std::uint64_t h = fnv1a64(data.times.data(), sizeof(double) * data.times.size());
    h = fnv1a64(data.status.data(), sizeof(int) * data.status.size(), h);
    h = fnv1a64(data.covariates.data(),
                sizeof(double) * static_cast<std::size_t>(data.covariates.size()), h);
    for (const auto& name : data.names) h = fnv1a64(name.data(), name.size(), h);
    return h;
}

}  // namespace apgw
