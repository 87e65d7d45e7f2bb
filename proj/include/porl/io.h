#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "porl/dataset.h"
#include "porl/diffusion.h"
#include "porl/net.h"
#include "porl/trajectory.h"

namespace porl {

// ---------------------------------------------------------------------------
// Dataset files. One little-endian binary container ("PORL1") holds either a
// transition table or a set of trajectories; values are stored as 32-bit
// floats. Loading validates the header and the payload length.
// ---------------------------------------------------------------------------

enum class DatasetMode { kTransition, kTrajectory };

struct DatasetFile {
  DatasetMode mode = DatasetMode::kTransition;
  TransitionDataset transitions;          // payload when mode == kTransition
  std::vector<Trajectory> trajectories;   // payload when mode == kTrajectory
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
};

DatasetFile make_dataset_file(TransitionDataset ds);
DatasetFile make_dataset_file(std::vector<Trajectory> ts);

void save_dataset(const std::string& path, const DatasetFile& file);
DatasetFile load_dataset(const std::string& path);

// ---------------------------------------------------------------------------
// Checkpoints ("PORLCKPT"): an architecture descriptor (flat key-value map),
// the noise schedule, normalization statistics, trainable parameters, and any
// fixed tensors the model was constructed with. Doubles are stored by their
// exact bits, so load(save(x)) reproduces x bit for bit.
// ---------------------------------------------------------------------------

using ConfigMap = std::map<std::string, std::string>;

struct Checkpoint {
  ConfigMap arch;        // model kind + shape, enough to rebuild the network
  NoiseSchedule schedule;
  NormStats stats;
  ParamSet params;       // trainable tensors
  ParamSet extras;       // fixed tensors (e.g. time-feature frequencies)
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// ---------------------------------------------------------------------------
// Flat key-value configuration: `key = value` lines, '#' comments, blank
// lines ignored. Overrides are "key=value" strings (e.g. from the command
// line) applied on top.
// ---------------------------------------------------------------------------

ConfigMap parse_config_text(const std::string& text);
ConfigMap load_config(const std::string& path);
void apply_overrides(ConfigMap& cfg, const std::vector<std::string>& overrides);

// Typed lookups with defaults; conversion failures name the offending key.
std::string config_get(const ConfigMap& cfg, const std::string& key, const std::string& fallback);
double config_num(const ConfigMap& cfg, const std::string& key, double fallback);
std::size_t config_count(const ConfigMap& cfg, const std::string& key, std::size_t fallback);
bool config_flag(const ConfigMap& cfg, const std::string& key, bool fallback);
// Comma-separated size lists ("64,64"); empty string -> fallback.
std::vector<std::size_t> config_sizes(const ConfigMap& cfg, const std::string& key,
                                      std::vector<std::size_t> fallback);

// ---------------------------------------------------------------------------
// Reports: one `key = value` metric per line, written atomically. Numbers are
// formatted deterministically so identical runs produce identical bytes.
// ---------------------------------------------------------------------------

class Report {
 public:
  void add(const std::string& key, const std::string& value);
  void add_num(const std::string& key, double value);
  void add_count(const std::string& key, std::size_t value);
  std::string text() const;
  void save(const std::string& path) const;

 private:
  std::vector<std::pair<std::string, std::string>> lines_;
};

std::string format_num(double value);  // shortest round-trippable decimal

// Plot-data CSV: header row then one line per data row.
void write_csv(const std::string& path, const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows);

// Writes to a temporary file in the same directory, then renames into place.
void atomic_write_file(const std::string& path, const std::string& bytes);
std::string read_file(const std::string& path);

}  // namespace porl
