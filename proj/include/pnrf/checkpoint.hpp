#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "pnrf/util.hpp"

namespace pnrf {

inline constexpr char kCheckpointMagic[] = "PNRF1";

using CheckpointEntries = std::vector<std::pair<std::string, std::vector<float>>>;

// Binary layout: magic "PNRF1", little-endian u32 entry count, then per entry
// u32 name length, UTF-8 name, u32 element count, raw little-endian f32 data.
inline void save_checkpoint(const std::string& path, const CheckpointEntries& entries) {
  std::ofstream f(path, std::ios::binary);
  check(f.good(), cat("checkpoint: cannot open for write: ", path));
  f.write(kCheckpointMagic, 5);
  const uint32_t count = static_cast<uint32_t>(entries.size());
  f.write(reinterpret_cast<const char*>(&count), 4);
  for (const auto& [name, data] : entries) {
    const uint32_t name_len = static_cast<uint32_t>(name.size());
    const uint32_t elems = static_cast<uint32_t>(data.size());
    f.write(reinterpret_cast<const char*>(&name_len), 4);
    f.write(name.data(), name_len);
    f.write(reinterpret_cast<const char*>(&elems), 4);
    f.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(elems) * 4);
  }
  check(f.good(), cat("checkpoint: write failed: ", path));
}

inline CheckpointEntries load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  check(f.good(), cat("checkpoint: cannot open: ", path));
  char magic[5];
  f.read(magic, 5);
  check(f.good() && std::memcmp(magic, kCheckpointMagic, 5) == 0,
        cat("checkpoint: magic string mismatch (expected \"", kCheckpointMagic, "\"): ", path));
  uint32_t count = 0;
  f.read(reinterpret_cast<char*>(&count), 4);
  check(f.good(), cat("checkpoint: truncated header: ", path));
  CheckpointEntries entries;
  entries.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    uint32_t name_len = 0;
    f.read(reinterpret_cast<char*>(&name_len), 4);
    check(f.good() && name_len < (1u << 20), cat("checkpoint: corrupt entry name: ", path));
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    uint32_t elems = 0;
    f.read(reinterpret_cast<char*>(&elems), 4);
    check(f.good(), cat("checkpoint: truncated entry \"", name, "\": ", path));
    std::vector<float> data(elems);
    f.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(elems) * 4);
    check(f.good(), cat("checkpoint: truncated data for \"", name, "\": ", path));
    entries.emplace_back(std::move(name), std::move(data));
  }
  return entries;
}

inline const std::vector<float>* find_entry(const CheckpointEntries& entries,
                                            const std::string& name) {
  for (const auto& [n, data] : entries)
    if (n == name) return &data;
  return nullptr;
}

}  // namespace pnrf
