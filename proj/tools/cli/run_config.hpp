#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dgcf/model.hpp"
#include "dgcf/model_io.hpp"
#include "dgcf/training.hpp"

namespace dgcf::cli {

/// Flat key=value settings for one training run. Values resolve in order:
/// built-in defaults, then the config file, then command-line flags.
class RunConfig {
 public:
  RunConfig();

  static const std::vector<std::string>& keys();
  static std::string default_value(const std::string& key);

  // Throws UserError for unknown keys.
  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;

  // "key = value" lines; '#' starts a comment.
  void merge_file(const std::filesystem::path& path);

  // Throws UserError if any value fails to parse or validate.
  struct Resolved {
    std::string model;  // ours | plain | lightgcn | bprmf
    ModelKind kind = ModelKind::Ours;
    Hyperparams hyper;
    TrainConfig train;
  };
  Resolved resolve() const;

  // Sorted "key=value" lines of the resolved settings.
  std::string echo() const;

 private:
  std::map<std::string, std::string> values_;
};

double parse_double(const std::string& key, const std::string& text);
long long parse_integer(const std::string& key, const std::string& text);
std::vector<double> parse_double_list(const std::string& key, const std::string& text);

}  // namespace dgcf::cli
