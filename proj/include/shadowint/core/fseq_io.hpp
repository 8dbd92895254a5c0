// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "shadowint/core/types.hpp"

namespace shadowint {

// FSEQ layout (little-endian):
//   "FSEQ" | u32 version=1 | u32 T | u32 d | u32 hop_ms | u8 kind | 3 x u8 0
//   followed by T*d float32 values, frame-major.
inline constexpr std::uint32_t kFseqVersion = 1;
inline constexpr std::size_t kFseqHeaderBytes = 24;

std::vector<std::uint8_t> encode_frames(const FrameSequence& seq);
FrameSequence decode_frames(std::span<const std::uint8_t> bytes);

/// Validates before touching the file; a NaN sequence leaves no file behind.
void write_frames(const FrameSequence& seq, const std::filesystem::path& path);
FrameSequence read_frames(const std::filesystem::path& path);

// Shared little-endian helpers (also used by the checkpoint container).
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t value);
void put_f32(std::vector<std::uint8_t>& out, float value);
std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset);
float get_f32(std::span<const std::uint8_t> bytes, std::size_t offset);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace shadowint
