#include "cli/config.hpp"

#include <algorithm>

#include "rcrf/error.hpp"

namespace rcrf::cli {

std::vector<CLI::ConfigItem> SubcommandConfig::from_config(std::istream& input) const {
  auto items = CLI::ConfigINI::from_config(input);
  for (auto& item : items) {
    if (item.parents.empty() && !subcommand_.empty() && item.name != "++" && item.name != "--") {
      item.parents.push_back(subcommand_);
    }
  }
  return items;
}

std::string normalize_arguments(std::vector<std::string>& args, const std::vector<std::string>& subcommands) {
  std::string found;
  std::size_t position = args.size();
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (std::find(subcommands.begin(), subcommands.end(), args[i]) != subcommands.end()) {
      found = args[i];
      position = i;
      break;
    }
  }
  if (found.empty()) return found;
  std::vector<std::string> moved;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i > position && args[i] == "--config" && i + 1 < args.size()) {
      moved.push_back(args[i]);
      moved.push_back(args[i + 1]);
      ++i;
    } else if (i > position && args[i].rfind("--config=", 0) == 0) {
      moved.push_back(args[i]);
    } else {
      rest.push_back(args[i]);
    }
  }
  moved.insert(moved.end(), rest.begin(), rest.end());
  args = std::move(moved);
  return found;
}

PartialFile::PartialFile(std::filesystem::path target, bool binary) : target_(std::move(target)) {
  partial_ = target_;
  partial_ += ".partial";
  if (target_.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(target_.parent_path(), ec);
    if (ec) throw IoError("cannot create '" + target_.parent_path().string() + "': " + ec.message());
  }
  out_.open(partial_, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!out_) throw IoError("cannot write '" + partial_.string() + "'");
}

PartialFile::~PartialFile() {
  if (!committed_) {
    out_.close();
    std::error_code ec;
    std::filesystem::remove(partial_, ec);
  }
}

void PartialFile::commit() {
  out_.flush();
  if (!out_) throw IoError("failed writing '" + partial_.string() + "'");
  out_.close();
  std::error_code ec;
  std::filesystem::rename(partial_, target_, ec);
  if (ec) throw IoError("cannot rename '" + partial_.string() + "': " + ec.message());
  committed_ = true;
}

Report::Report(const std::string& path) {
  if (!path.empty()) file_ = std::make_unique<PartialFile>(path);
}

void Report::emit(const nlohmann::json& record) {
  if (file_) file_->stream() << record.dump() << '\n';
}

void Report::commit() {
  if (file_) file_->commit();
}

}  // namespace rcrf::cli
