#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace fve {

// Entry point of the `fve` tool. Returns the process exit code; reports go
// to `out`, one-line diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// 64-bit FNV-1a of a file's bytes, as 16 hex digits.
std::string file_digest(const std::string& path);
std::uint64_t fnv1a(std::string_view bytes);

}  // namespace fve
