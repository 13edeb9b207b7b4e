#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "rcrf/forest.hpp"

namespace rcrf {

/// Format version written as the first byte of every model file.
inline constexpr std::uint8_t kModelFormatVersion = 1;

// Binary layout (all integers little-endian fixed width, reals IEEE-754
// binary64):
//
//   tree_<i>.rcrf   u8 version, "RCRT", u32 index, u64 seed, u64 n, u32[n]
//                   in-bag counts, u32 node count, nodes...
//   forest.meta     u8 version, "RCRF", parameters, split finder, seed,
//                   event count, training row count and hash, largest event
//                   time, response
//                   column names, schema.
//
// A curve is f64 initial value, u64 length, then length (f64 time,
// f64 value) pairs.

void write_tree(std::ostream& out, const Tree& tree, std::uint32_t index);
/// Throws IoError on a truncated or malformed stream.
Tree read_tree(std::istream& in, std::uint32_t* index = nullptr);

/// Everything in a Forest except the trees.
void write_forest_meta(std::ostream& out, const Forest& forest);
Forest read_forest_meta(std::istream& in);

std::filesystem::path tree_path(const std::filesystem::path& dir, std::size_t index);
std::filesystem::path meta_path(const std::filesystem::path& dir);

/// Writes via a ".partial" file and renames, so readers never see a
/// half-written tree.
void save_tree(const std::filesystem::path& dir, std::size_t index, const Tree& tree);
/// nullopt when the file is absent or unreadable.
std::optional<Tree> try_load_tree(const std::filesystem::path& dir, std::size_t index);

void save_forest_meta(const std::filesystem::path& dir, const Forest& forest);
void save_forest(const std::filesystem::path& dir, const Forest& forest);
Forest load_forest(const std::filesystem::path& dir);

/// True when two forests were configured identically (trees ignored).
bool same_setup(const Forest& a, const Forest& b);

}  // namespace rcrf
