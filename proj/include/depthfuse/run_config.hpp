#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "depthfuse/fusenet.hpp"
#include "depthfuse/gradops.hpp"
#include "depthfuse/poisson.hpp"
#include "depthfuse/sampling.hpp"
#include "depthfuse/synthetic.hpp"

namespace depthfuse {

// Flat key=value configuration shared by every command. Text form:
//
//   # comment
//   alpha = 0.15
//   steps = 500   # trailing comments allowed
//
// Unknown keys and unparsable values are InvalidConfig errors.
class RunConfig {
 public:
  enum class Type { Int, UInt, Double, Bool };

  struct Entry {
    std::string_view key;
    Type type;
    std::string_view fallback;
    std::string_view help;
  };

  RunConfig();

  static const std::vector<Entry>& schema();

  void load_file(const std::filesystem::path& path);
  void load_text(std::string_view text, std::string_view origin = "<text>");
  void set(std::string_view key, std::string_view value);
  bool is_known(std::string_view key) const;

  double get_double(std::string_view key) const;
  std::int64_t get_int(std::string_view key) const;
  std::uint64_t get_u64(std::string_view key) const;
  bool get_bool(std::string_view key) const;

  // Canonical textual value (what set() stored after validation).
  const std::string& raw(std::string_view key) const;
  const std::map<std::string, std::string, std::less<>>& values() const { return values_; }

  // Views onto the module parameter structs.
  SampleConfig sampling() const;
  GuidedFuseParams guided() const;
  PoissonOptions poisson() const;
  int dilate() const;
  FusionNetConfig net() const;
  TrainConfig training() const;
  FixtureParams fixtures() const;

 private:
  const Entry& entry(std::string_view key) const;
  std::map<std::string, std::string, std::less<>> values_;
};

}  // namespace depthfuse
