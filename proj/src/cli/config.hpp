#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

namespace rcrf::cli {

/// Reads key = value config files. Keys outside any [section] belong to
/// the subcommand being run.
class SubcommandConfig : public CLI::ConfigINI {
 public:
  explicit SubcommandConfig(std::string subcommand) : subcommand_(std::move(subcommand)) {}
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override;

 private:
  std::string subcommand_;
};

/// Moves "--config FILE" (or "--config=FILE") in front of the subcommand so
/// it may be written anywhere on the line. Returns the subcommand name
/// found, or "".
std::string normalize_arguments(std::vector<std::string>& args, const std::vector<std::string>& subcommands);

/// A file written under "<path>.partial" and renamed by commit().
class PartialFile {
 public:
  explicit PartialFile(std::filesystem::path target, bool binary = false);
  ~PartialFile();
  PartialFile(const PartialFile&) = delete;
  PartialFile& operator=(const PartialFile&) = delete;

  std::ostream& stream() { return out_; }
  void commit();

 private:
  std::filesystem::path target_;
  std::filesystem::path partial_;
  std::ofstream out_;
  bool committed_ = false;
};

/// Line-delimited JSON report; a no-op when constructed with an empty path.
class Report {
 public:
  explicit Report(const std::string& path);
  void emit(const nlohmann::json& record);
  void commit();

 private:
  std::unique_ptr<PartialFile> file_;
};

}  // namespace rcrf::cli
