#pragma once

#include <filesystem>

#include "pathnet/net.hpp"

namespace pathnet {

/// Versioned binary grid checkpoint. Round-trips bit-exactly: doubles are
/// written as raw little-endian IEEE-754 words.
class Checkpoint {
public:
    static constexpr std::uint32_t kMagic = 0x504e4b31; // "PNK1"
    static constexpr std::uint32_t kVersion = 1;

    static void save(const ParameterGrid& grid, const std::filesystem::path& path);
    static ParameterGrid load(const std::filesystem::path& path);
};

} // namespace pathnet
