#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bitup {

/// Test hook: abort an atomic write after this many bytes have reached the
/// temporary file, as if the process died mid-write.
struct WriteFault {
  std::size_t fail_after_bytes = 0;
};

std::vector<uint8_t> read_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);

/// Writes to "<path>.tmp", fsyncs, then renames over path. Readers see either
/// the previous file or the complete new one.
void write_file_atomic(const std::filesystem::path& path, std::span<const uint8_t> bytes,
                       const WriteFault* fault = nullptr);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

bool is_temp_file(const std::filesystem::path& path);

}  // namespace bitup
