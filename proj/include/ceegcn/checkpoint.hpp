#pragma once

#include <iosfwd>
#include <string>

#include "ceegcn/trainer.hpp"

namespace ceegcn {

/// Text checkpoint, version 1:
///
///   ceegcn-checkpoint 1
///   K <int>
///   config <key> = <value>          (one line per TrainConfig field)
///   nodes trained <count> <ids...>
///   nodes core <count> <ids...>
///   matrix <name> <rows> <cols>      followed by `rows` lines of `cols` values
///   end
///
/// Matrices are stored row-major with round-trip precision. Names are
/// `embedding`, `layer<l>.head<t>.W1`, `layer<l>.head<t>.W2`, `layer<l>.gamma`
/// (T x 1) and optionally `training_centers`.
void write_checkpoint(std::ostream& out, const TrainedModel& model);
void save_checkpoint(const std::string& path, const TrainedModel& model);

/// Restores everything written above; history and refined_subgraph stay empty.
TrainedModel read_checkpoint(std::istream& in);
TrainedModel load_checkpoint(const std::string& path);

}  // namespace ceegcn
