// SPDX-License-Identifier: Apache-2.0
#include "shadowint/core/fseq_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace shadowint {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t value) {
  for (int shift = 0; shift < 32; shift += 8) {
    out.push_back(static_cast<std::uint8_t>((value >> shift) & 0xFFu));
  }
}

void put_f32(std::vector<std::uint8_t>& out, float value) {
  put_u32(out, std::bit_cast<std::uint32_t>(value));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  if (offset + 4 > bytes.size()) throw FormatError("unexpected end of data");
  std::uint32_t value = 0;
  for (int k = 0; k < 4; ++k) {
    value |= static_cast<std::uint32_t>(bytes[offset + k]) << (8 * k);
  }
  return value;
}

float get_f32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return std::bit_cast<float>(get_u32(bytes, offset));
}

std::vector<std::uint8_t> encode_frames(const FrameSequence& seq) {
  seq.validate();
  std::vector<std::uint8_t> out;
  const auto count = static_cast<std::size_t>(seq.frames.size());
  out.reserve(kFseqHeaderBytes + 4 * count);
  out.insert(out.end(), {'F', 'S', 'E', 'Q'});
  put_u32(out, kFseqVersion);
  put_u32(out, static_cast<std::uint32_t>(seq.length()));
  put_u32(out, static_cast<std::uint32_t>(seq.dim()));
  put_u32(out, static_cast<std::uint32_t>(seq.hop_ms));
  out.push_back(static_cast<std::uint8_t>(seq.kind));
  out.insert(out.end(), {0, 0, 0});
  // FrameMatrix is row-major, so data() is already frame-major.
  const float* data = seq.frames.data();
  for (std::size_t k = 0; k < count; ++k) put_f32(out, data[k]);
  return out;
}

FrameSequence decode_frames(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFseqHeaderBytes) throw FormatError("FSEQ header truncated");
  if (std::memcmp(bytes.data(), "FSEQ", 4) != 0) throw FormatError("bad FSEQ magic");
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kFseqVersion) {
    throw FormatError("unsupported FSEQ version " + std::to_string(version));
  }
  const std::uint32_t frames = get_u32(bytes, 8);
  const std::uint32_t dims = get_u32(bytes, 12);
  const std::uint32_t hop = get_u32(bytes, 16);
  const std::uint8_t kind_code = bytes[20];
  if (kind_code > static_cast<std::uint8_t>(FeatureKind::kSynthetic)) {
    throw FormatError("unknown FSEQ kind code " + std::to_string(kind_code));
  }
  const std::uint64_t expected = kFseqHeaderBytes + 4ull * frames * dims;
  if (bytes.size() != expected) {
    throw FormatError("FSEQ payload size " + std::to_string(bytes.size() - kFseqHeaderBytes) +
                      " does not match T*d*4 = " + std::to_string(4ull * frames * dims));
  }
  FrameSequence seq;
  seq.hop_ms = static_cast<int>(hop);
  seq.kind = static_cast<FeatureKind>(kind_code);
  seq.frames.resize(frames, dims);
  float* data = seq.frames.data();
  for (std::size_t k = 0; k < static_cast<std::size_t>(frames) * dims; ++k) {
    data[k] = get_f32(bytes, kFseqHeaderBytes + 4 * k);
  }
  try {
    seq.validate();
  } catch (const ValidationError& e) {
    throw FormatError(std::string("invalid FSEQ content: ") + e.what());
  }
  return seq;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

void write_frames(const FrameSequence& seq, const std::filesystem::path& path) {
  const auto bytes = encode_frames(seq);
  write_file_bytes(path, bytes);
}

FrameSequence read_frames(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode_frames(bytes);
}

}  // namespace shadowint
