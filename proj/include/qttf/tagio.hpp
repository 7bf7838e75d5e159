// QTTF binary tag files, one per channel.
//
// Layout (little-endian):
//   magic   "QTTF"
//   version u8 = 0x01
//   header  { channel u8, block_count u32 }
//   blocks  { epoch_s u64, count u32, count x i64 femtosecond offsets, sorted }

#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qttf/simulator.hpp"

namespace qttf {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

constexpr char kMagic[4] = {'Q', 'T', 'T', 'F'};
constexpr std::uint8_t kVersion = 0x01;

template <typename T>
void put_le(std::ostream& os, T value) {
  std::array<char, sizeof(T)> buf;
  auto u = static_cast<std::uint64_t>(static_cast<std::make_unsigned_t<T>>(value));
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<char>((u >> (8 * i)) & 0xFF);
  os.write(buf.data(), sizeof(T));
}

template <typename T>
T get_le(std::istream& is, const std::string& path) {
  std::array<char, sizeof(T)> buf;
  is.read(buf.data(), sizeof(T));
  if (!is) throw IoError("tagio: truncated file: " + path);
  std::uint64_t u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    u |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
  return static_cast<T>(static_cast<std::make_unsigned_t<T>>(u));
}

}  // namespace detail

inline std::string channel_filename(Channel ch) {
  return "d" + std::to_string(static_cast<int>(ch) + 1) + ".qttf";
}

// Incremental writer; the block count is patched into the header on close.
class TagFileWriter {
 public:
  TagFileWriter(const std::filesystem::path& path, Channel channel)
      : path_(path.string()), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("tagio: cannot open for writing: " + path_);
    out_.write(detail::kMagic, 4);
    detail::put_le<std::uint8_t>(out_, detail::kVersion);
    detail::put_le<std::uint8_t>(out_, static_cast<std::uint8_t>(channel));
    count_pos_ = out_.tellp();
    detail::put_le<std::uint32_t>(out_, 0);
  }

  void write_block(std::uint64_t epoch_s, const std::vector<TimeFs>& tags) {
    detail::put_le<std::uint64_t>(out_, epoch_s);
    detail::put_le<std::uint32_t>(out_, static_cast<std::uint32_t>(tags.size()));
    for (const TimeFs t : tags) detail::put_le<std::int64_t>(out_, t);
    ++blocks_;
    if (!out_) throw IoError("tagio: write failed: " + path_);
  }

  void close() {
    if (!out_.is_open()) return;
    out_.seekp(count_pos_);
    detail::put_le<std::uint32_t>(out_, blocks_);
    out_.close();
    if (out_.fail()) throw IoError("tagio: close failed: " + path_);
  }

  ~TagFileWriter() {
    try {
      close();
    } catch (...) {
    }
  }

 private:
  std::string path_;
  std::ofstream out_;
  std::ostream::pos_type count_pos_;
  std::uint32_t blocks_ = 0;
};

inline void write_tag_stream(const TagStream& stream, const std::filesystem::path& path) {
  TagFileWriter writer(path, stream.channel);
  for (const TagBlock& block : stream.blocks) writer.write_block(block.epoch_s, block.tags);
  writer.close();
}

// Writes the four channel files (d1.qttf .. d4.qttf) into a directory.
inline std::vector<std::filesystem::path> write_tags(const std::array<TagStream, 4>& streams,
                                                     const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> paths;
  for (const TagStream& s : streams) {
    paths.push_back(dir / channel_filename(s.channel));
    write_tag_stream(s, paths.back());
  }
  return paths;
}

inline TagStream read_tag_stream(const std::filesystem::path& path) {
  const std::string name = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("tagio: cannot open: " + name);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, detail::kMagic, 4) != 0)
    throw IoError("tagio: bad magic: " + name);
  if (detail::get_le<std::uint8_t>(in, name) != detail::kVersion)
    throw IoError("tagio: unsupported version: " + name);

  TagStream stream;
  const auto ch = detail::get_le<std::uint8_t>(in, name);
  if (ch > 3) throw IoError("tagio: bad channel id: " + name);
  stream.channel = static_cast<Channel>(ch);
  const auto blocks = detail::get_le<std::uint32_t>(in, name);
  stream.blocks.reserve(blocks);
  for (std::uint32_t b = 0; b < blocks; ++b) {
    TagBlock block;
    block.epoch_s = detail::get_le<std::uint64_t>(in, name);
    const auto count = detail::get_le<std::uint32_t>(in, name);
    block.tags.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i)
      block.tags.push_back(detail::get_le<std::int64_t>(in, name));
    stream.blocks.push_back(std::move(block));
  }
  return stream;
}

inline std::array<TagStream, 4> read_tags(const std::filesystem::path& dir) {
  std::array<TagStream, 4> streams;
  for (int ch = 0; ch < 4; ++ch) {
    const auto path = dir / channel_filename(static_cast<Channel>(ch));
    if (!std::filesystem::exists(path)) throw IoError("tagio: missing file: " + path.string());
    streams[static_cast<std::size_t>(ch)] = read_tag_stream(path);
  }
  return streams;
}

}  // namespace qttf
