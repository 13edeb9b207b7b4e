#include "rcrf/persistence.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "rcrf/error.hpp"

namespace rcrf {

namespace {

constexpr std::array<char, 4> kTreeMagic{'R', 'C', 'R', 'T'};
constexpr std::array<char, 4> kMetaMagic{'R', 'C', 'R', 'F'};

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    char buf[4];
    for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out_.write(buf, 4);
  }
  void u64(std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out_.write(buf, 8);
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void magic(const std::array<char, 4>& m) { out_.write(m.data(), 4); }
  void curve(const StepFunction& f) {
    f64(f.initial_value());
    u64(f.size());
    for (std::size_t k = 0; k < f.size(); ++k) {
      f64(f.times()[k]);
      f64(f.values()[k]);
    }
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::uint8_t u8() {
    unsigned char c;
    read(reinterpret_cast<char*>(&c), 1);
    return c;
  }
  std::uint32_t u32() {
    unsigned char buf[4];
    read(reinterpret_cast<char*>(buf), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    unsigned char buf[8];
    read(reinterpret_cast<char*>(buf), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  void magic(const std::array<char, 4>& expected, const char* what) {
    char buf[4];
    read(buf, 4);
    if (std::memcmp(buf, expected.data(), 4) != 0) throw IoError(std::string("not a ") + what + " file");
  }
  void version(const char* what) {
    const std::uint8_t v = u8();
    if (v != kModelFormatVersion) {
      throw IoError(std::string(what) + " format version " + std::to_string(v) + " is not supported");
    }
  }
  StepFunction curve() {
    const double initial = f64();
    const std::uint64_t n = count(16);
    std::vector<double> times(n), values(n);
    for (std::uint64_t k = 0; k < n; ++k) {
      times[k] = f64();
      values[k] = f64();
    }
    try {
      return StepFunction(std::move(times), std::move(values), initial);
    } catch (const DomainError& e) {
      throw IoError(std::string("corrupt curve: ") + e.what());
    }
  }
  /// Length prefix, sanity-checked so a corrupt file cannot request an
  /// absurd allocation.
  std::uint64_t count(std::uint64_t bytes_per_item) {
    const std::uint64_t n = u64();
    if (n > (std::uint64_t{1} << 40) / bytes_per_item) throw IoError("corrupt length prefix");
    return n;
  }

 private:
  void read(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw IoError("unexpected end of model file");
  }
  std::istream& in_;
};

void write_parameters(Writer& w, const TrainingParameters& p) {
  w.u64(p.ntree);
  w.u64(p.mtry);
  w.u64(p.number_of_splits);
  w.u64(p.node_size);
  w.u64(p.max_node_depth);
  w.u8(static_cast<std::uint8_t>(p.split_finder.kind));
  w.u32(static_cast<std::uint32_t>(p.split_finder.event_count));
  w.u32(static_cast<std::uint32_t>(p.split_finder.focus.size()));
  for (int j : p.split_finder.focus) w.u32(static_cast<std::uint32_t>(j));
  w.u64(p.random_seed);
}

TrainingParameters read_parameters(Reader& r) {
  TrainingParameters p;
  p.ntree = r.u64();
  p.mtry = r.u64();
  p.number_of_splits = r.u64();
  p.node_size = r.u64();
  p.max_node_depth = r.u64();
  const std::uint8_t kind = r.u8();
  if (kind > 1) throw IoError("unknown split finder kind");
  p.split_finder.kind = static_cast<SplitFinderKind>(kind);
  p.split_finder.event_count = static_cast<int>(r.u32());
  const std::uint32_t focus = r.u32();
  p.split_finder.focus.clear();
  for (std::uint32_t i = 0; i < focus; ++i) p.split_finder.focus.push_back(static_cast<int>(r.u32()));
  p.random_seed = r.u64();
  return p;
}

}  // namespace

void write_tree(std::ostream& out, const Tree& tree, std::uint32_t index) {
  Writer w(out);
  w.u8(kModelFormatVersion);
  w.magic(kTreeMagic);
  w.u32(index);
  w.u64(tree.tree_seed);
  w.u64(tree.in_bag_counts.size());
  for (auto c : tree.in_bag_counts) w.u32(c);
  w.u32(static_cast<std::uint32_t>(tree.nodes.size()));
  for (const auto& node : tree.nodes) {
    if (const auto* split = std::get_if<SplitNode>(&node)) {
      w.u8(0);
      w.u32(static_cast<std::uint32_t>(split->column));
      if (const auto* numeric = std::get_if<NumericThreshold>(&split->rule)) {
        w.u8(0);
        w.f64(numeric->threshold);
      } else {
        const auto& levels = std::get<LevelSubset>(split->rule).left_levels;
        w.u8(1);
        w.u32(static_cast<std::uint32_t>(levels.size()));
        for (auto l : levels) w.u32(l);
      }
      w.f64(split->missing_left_probability);
      w.u32(split->left);
      w.u32(split->right);
    } else {
      const auto& terminal = std::get<TerminalNode>(node);
      w.u8(1);
      w.u64(terminal.size);
      w.u32(static_cast<std::uint32_t>(terminal.functions.event_count()));
      w.curve(terminal.functions.survival);
      for (const auto& f : terminal.functions.cifs) w.curve(f);
      for (const auto& f : terminal.functions.chfs) w.curve(f);
    }
  }
  if (!out) throw IoError("failed writing tree");
}

Tree read_tree(std::istream& in, std::uint32_t* index) {
  Reader r(in);
  r.version("tree");
  r.magic(kTreeMagic, "tree");
  Tree tree;
  const std::uint32_t stored_index = r.u32();
  if (index) *index = stored_index;
  tree.tree_seed = r.u64();
  tree.in_bag_counts.resize(r.count(4));
  for (auto& c : tree.in_bag_counts) c = r.u32();
  const std::uint32_t node_count = r.u32();
  tree.nodes.reserve(node_count);
  for (std::uint32_t i = 0; i < node_count; ++i) {
    const std::uint8_t tag = r.u8();
    if (tag == 0) {
      SplitNode split;
      split.column = r.u32();
      const std::uint8_t rule = r.u8();
      if (rule == 0) {
        split.rule = NumericThreshold{r.f64()};
      } else if (rule == 1) {
        LevelSubset subset;
        const std::uint32_t n = r.u32();
        subset.left_levels.reserve(n);
        for (std::uint32_t k = 0; k < n; ++k) subset.left_levels.push_back(r.u32());
        split.rule = std::move(subset);
      } else {
        throw IoError("unknown split rule tag");
      }
      split.missing_left_probability = r.f64();
      split.left = r.u32();
      split.right = r.u32();
      if (split.left >= node_count || split.right >= node_count) throw IoError("tree child index out of range");
      tree.nodes.emplace_back(std::move(split));
    } else if (tag == 1) {
      TerminalNode terminal;
      terminal.size = r.u64();
      const std::uint32_t J = r.u32();
      terminal.functions.survival = r.curve();
      for (std::uint32_t j = 0; j < J; ++j) terminal.functions.cifs.push_back(r.curve());
      for (std::uint32_t j = 0; j < J; ++j) terminal.functions.chfs.push_back(r.curve());
      tree.nodes.emplace_back(std::move(terminal));
    } else {
      throw IoError("unknown tree node tag");
    }
  }
  return tree;
}

void write_forest_meta(std::ostream& out, const Forest& forest) {
  Writer w(out);
  w.u8(kModelFormatVersion);
  w.magic(kMetaMagic);
  write_parameters(w, forest.parameters);
  w.u32(static_cast<std::uint32_t>(forest.event_count));
  w.u64(forest.training_rows);
  w.u64(forest.training_hash);
  w.f64(forest.largest_event_time);
  w.str(forest.response.time);
  w.str(forest.response.event);
  w.u8(forest.response.censor_time ? 1 : 0);
  if (forest.response.censor_time) w.str(*forest.response.censor_time);
  w.u32(static_cast<std::uint32_t>(forest.schema.columns.size()));
  for (const auto& c : forest.schema.columns) {
    w.str(c.name);
    w.u8(static_cast<std::uint8_t>(c.kind));
    w.u32(static_cast<std::uint32_t>(c.levels.size()));
    for (const auto& l : c.levels) w.str(l);
  }
  if (!out) throw IoError("failed writing forest metadata");
}

Forest read_forest_meta(std::istream& in) {
  Reader r(in);
  r.version("forest metadata");
  r.magic(kMetaMagic, "forest metadata");
  Forest forest;
  forest.parameters = read_parameters(r);
  forest.event_count = static_cast<int>(r.u32());
  forest.training_rows = r.u64();
  forest.training_hash = r.u64();
  forest.largest_event_time = r.f64();
  forest.response.time = r.str();
  forest.response.event = r.str();
  if (r.u8()) {
    forest.response.censor_time = r.str();
  } else {
    forest.response.censor_time.reset();
  }
  const std::uint32_t columns = r.u32();
  for (std::uint32_t i = 0; i < columns; ++i) {
    ColumnSchema c;
    c.name = r.str();
    const std::uint8_t kind = r.u8();
    if (kind > 2) throw IoError("unknown column kind");
    c.kind = static_cast<ColumnKind>(kind);
    const std::uint32_t levels = r.u32();
    for (std::uint32_t k = 0; k < levels; ++k) c.levels.push_back(r.str());
    forest.schema.columns.push_back(std::move(c));
  }
  return forest;
}

std::filesystem::path tree_path(const std::filesystem::path& dir, std::size_t index) {
  return dir / ("tree_" + std::to_string(index) + ".rcrf");
}

std::filesystem::path meta_path(const std::filesystem::path& dir) { return dir / "forest.meta"; }

namespace {

template <typename WriteBody>
void write_atomically(const std::filesystem::path& target, WriteBody body) {
  auto partial = target;
  partial += ".partial";
  {
    std::ofstream out(partial, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + partial.string() + "'");
    body(out);
    out.flush();
    if (!out) throw IoError("failed writing '" + partial.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(partial, target, ec);
  if (ec) throw IoError("cannot rename '" + partial.string() + "': " + ec.message());
}

}  // namespace

void save_tree(const std::filesystem::path& dir, std::size_t index, const Tree& tree) {
  write_atomically(tree_path(dir, index),
                   [&](std::ostream& out) { write_tree(out, tree, static_cast<std::uint32_t>(index)); });
}

std::optional<Tree> try_load_tree(const std::filesystem::path& dir, std::size_t index) {
  const auto path = tree_path(dir, index);
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  try {
    std::uint32_t stored = 0;
    Tree tree = read_tree(in, &stored);
    if (stored != index) return std::nullopt;
    return tree;
  } catch (const IoError&) {
    return std::nullopt;
  }
}

void save_forest_meta(const std::filesystem::path& dir, const Forest& forest) {
  write_atomically(meta_path(dir), [&](std::ostream& out) { write_forest_meta(out, forest); });
}

void save_forest(const std::filesystem::path& dir, const Forest& forest) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  save_forest_meta(dir, forest);
  for (std::size_t t = 0; t < forest.trees.size(); ++t) save_tree(dir, t, forest.trees[t]);
}

Forest load_forest(const std::filesystem::path& dir) {
  std::ifstream meta(meta_path(dir), std::ios::binary);
  if (!meta) throw IoError("no forest.meta in '" + dir.string() + "'");
  Forest forest = read_forest_meta(meta);
  forest.trees.reserve(forest.parameters.ntree);
  for (std::size_t t = 0; t < forest.parameters.ntree; ++t) {
    std::ifstream in(tree_path(dir, t), std::ios::binary);
    if (!in) throw IoError("missing " + tree_path(dir, t).string() + "; the forest is incomplete");
    std::uint32_t stored = 0;
    forest.trees.push_back(read_tree(in, &stored));
    if (stored != t) throw IoError(tree_path(dir, t).string() + " holds tree " + std::to_string(stored));
  }
  return forest;
}

bool same_setup(const Forest& a, const Forest& b) {
  const auto& pa = a.parameters;
  const auto& pb = b.parameters;
  return pa.ntree == pb.ntree && pa.mtry == pb.mtry && pa.number_of_splits == pb.number_of_splits &&
         pa.node_size == pb.node_size && pa.max_node_depth == pb.max_node_depth &&
         pa.split_finder == pb.split_finder && pa.random_seed == pb.random_seed && a.schema == b.schema &&
         a.event_count == b.event_count && a.training_rows == b.training_rows &&
         a.training_hash == b.training_hash;
}

}  // namespace rcrf
