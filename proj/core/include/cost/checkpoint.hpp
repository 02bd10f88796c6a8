#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "cost/layers.hpp"

namespace cost {

/// Key -> (shape, values) map plus a free-form metadata string. See
/// docs/checkpoint-format.md for the byte layout.
struct Checkpoint {
  std::string metadata;
  std::map<std::string, Tensor> tensors;

  static Checkpoint from_parameters(const ParameterList& params, std::string metadata = {});
  /// Copies values into `params`; every name must be present with an identical shape.
  void restore(const ParameterList& params) const;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cost
