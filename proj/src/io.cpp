#include "porl/io.h"

#include <cctype>
#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace porl {

namespace {

constexpr char kDatasetMagic[] = "PORL1";
constexpr char kCheckpointMagic[] = "PORLCKPT";
constexpr std::uint32_t kFormatVersion = 1;

// --- little-endian primitives over an in-memory buffer ---

void put_u8(std::string& b, std::uint8_t v) { b.push_back(char(v)); }

void put_u32(std::string& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(char((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& b, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(b, bits);
}

void put_f64(std::string& b, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(b, bits);
}

void put_str(std::string& b, const std::string& s) {
  put_u64(b, s.size());
  b.append(s);
}

struct Reader {
  const std::string& b;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > b.size()) throw std::runtime_error("file truncated");
  }
  std::uint8_t u8() {
    need(1);
    return std::uint8_t(b[pos++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(std::uint8_t(b[pos++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(std::uint8_t(b[pos++])) << (8 * i);
    return v;
  }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str() {
    const std::uint64_t n = u64();
    need(n);
    std::string s = b.substr(pos, n);
    pos += n;
    return s;
  }
  void magic(const char* expect, const char* what) {
    const std::size_t n = std::strlen(expect);
    need(n);
    if (b.compare(pos, n, expect) != 0)
      throw std::runtime_error(std::string(what) + ": bad magic, not a recognized file");
    pos += n;
  }
  void done() const {
    if (pos != b.size()) throw std::runtime_error("file has trailing bytes");
  }
};

void put_tensor_list(std::string& b, const ParamSet& ps) {
  put_u64(b, ps.items.size());
  for (const auto& [name, t] : ps.items) {
    put_str(b, name);
    put_u64(b, t.shape.size());
    for (std::size_t d : t.shape) put_u64(b, d);
    for (double v : t.data) put_f64(b, v);
  }
}

ParamSet read_tensor_list(Reader& r) {
  ParamSet ps;
  const std::uint64_t count = r.u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = r.str();
    const std::uint64_t rank = r.u64();
    std::vector<std::size_t> shape;
    for (std::uint64_t d = 0; d < rank; ++d) shape.push_back(std::size_t(r.u64()));
    Tensor& t = ps.add(name, shape);
    for (double& v : t.data) v = r.f64();
  }
  return ps;
}

void put_f64_vector(std::string& b, const std::vector<double>& v) {
  put_u64(b, v.size());
  for (double x : v) put_f64(b, x);
}

std::vector<double> read_f64_vector(Reader& r) {
  std::vector<double> v(std::size_t(r.u64()));
  for (double& x : v) x = r.f64();
  return v;
}

std::string trim(const std::string& s) {
  std::size_t lo = 0, hi = s.size();
  while (lo < hi && std::isspace(std::uint8_t(s[lo]))) ++lo;
  while (hi > lo && std::isspace(std::uint8_t(s[hi - 1]))) --hi;
  return s.substr(lo, hi - lo);
}

[[noreturn]] void bad_key(const std::string& key, const std::string& value, const char* want) {
  throw std::invalid_argument("config: key '" + key + "' holds '" + value + "', expected " + want);
}

}  // namespace

// ---------------------------------------------------------------------------
// datasets
// ---------------------------------------------------------------------------

DatasetFile make_dataset_file(TransitionDataset ds) {
  ds.validate();
  DatasetFile f;
  f.mode = DatasetMode::kTransition;
  f.state_dim = ds.state_dim;
  f.action_dim = ds.action_dim;
  f.transitions = std::move(ds);
  return f;
}

DatasetFile make_dataset_file(std::vector<Trajectory> ts) {
  if (ts.empty()) throw std::invalid_argument("dataset file: no trajectories");
  DatasetFile f;
  f.mode = DatasetMode::kTrajectory;
  f.state_dim = ts[0].state_dim;
  f.action_dim = ts[0].action_dim;
  f.trajectories = std::move(ts);
  return f;
}

void save_dataset(const std::string& path, const DatasetFile& file) {
  std::string b;
  b.append(kDatasetMagic);
  put_u32(b, kFormatVersion);
  put_u8(b, file.mode == DatasetMode::kTransition ? 0 : 1);
  if (file.mode == DatasetMode::kTransition) {
    const TransitionDataset& ds = file.transitions;
    ds.validate();
    if (ds.state_dim != file.state_dim || ds.action_dim != file.action_dim)
      throw std::invalid_argument("dataset file: header dims disagree with the payload");
    put_u8(b, ds.has_terminal ? 1 : 0);
    put_u64(b, ds.state_dim);
    put_u64(b, ds.action_dim);
    put_u64(b, ds.discrete.size());
    for (const DiscreteColumn& dc : ds.discrete) {
      put_u64(b, dc.column);
      put_u64(b, dc.cardinality);
    }
    put_u64(b, ds.count());
    for (double v : ds.rows.data) put_f32(b, float(v));
  } else {
    if (file.trajectories.empty()) throw std::invalid_argument("dataset file: no trajectories");
    put_u8(b, 1);
    put_u64(b, file.state_dim);
    put_u64(b, file.action_dim);
    put_u64(b, 0);  // trajectories carry no discrete descriptors
    put_u64(b, file.trajectories.size());
    for (const Trajectory& t : file.trajectories) {
      t.validate();
      if (t.state_dim != file.state_dim || t.action_dim != file.action_dim)
        throw std::invalid_argument("dataset file: trajectory dims disagree with the header");
      put_u64(b, t.length());
      for (double v : t.steps.data) put_f32(b, float(v));
    }
  }
  atomic_write_file(path, b);
}

DatasetFile load_dataset(const std::string& path) {
  const std::string bytes = read_file(path);
  Reader r{bytes};
  r.magic(kDatasetMagic, "dataset");
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion)
    throw std::runtime_error("dataset: unsupported format version " + std::to_string(version));
  const std::uint8_t mode = r.u8();
  if (mode > 1) throw std::runtime_error("dataset: unknown mode byte");
  const bool has_terminal = r.u8() != 0;
  DatasetFile f;
  f.state_dim = std::size_t(r.u64());
  f.action_dim = std::size_t(r.u64());
  std::vector<DiscreteColumn> discrete(std::size_t(r.u64()));
  for (DiscreteColumn& dc : discrete) {
    dc.column = std::size_t(r.u64());
    dc.cardinality = std::size_t(r.u64());
  }
  const std::size_t count = std::size_t(r.u64());
  if (mode == 0) {
    f.mode = DatasetMode::kTransition;
    TransitionDataset& ds = f.transitions;
    ds.state_dim = f.state_dim;
    ds.action_dim = f.action_dim;
    ds.has_terminal = has_terminal;
    ds.discrete = std::move(discrete);
    ds.rows = Tensor(count, ds.width());
    for (double& v : ds.rows.data) v = double(r.f32());
    r.done();
    ds.validate();
  } else {
    f.mode = DatasetMode::kTrajectory;
    if (!discrete.empty()) throw std::runtime_error("dataset: trajectories cannot be discrete");
    const std::size_t width = 2 * f.state_dim + f.action_dim + 2;
    for (std::size_t i = 0; i < count; ++i) {
      Trajectory t;
      t.state_dim = f.state_dim;
      t.action_dim = f.action_dim;
      t.steps = Tensor(std::size_t(r.u64()), width);
      for (double& v : t.steps.data) v = double(r.f32());
      t.validate();
      f.trajectories.push_back(std::move(t));
    }
    r.done();
  }
  return f;
}

// ---------------------------------------------------------------------------
// checkpoints
// ---------------------------------------------------------------------------

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::string b;
  b.append(kCheckpointMagic);
  put_u32(b, kFormatVersion);
  std::string arch;
  for (const auto& [k, v] : ckpt.arch) arch += k + " = " + v + "\n";
  put_str(b, arch);
  put_u64(b, ckpt.schedule.T);
  put_f64_vector(b, ckpt.schedule.beta);
  put_f64_vector(b, ckpt.schedule.alpha);
  put_f64_vector(b, ckpt.schedule.alpha_bar);
  put_f64_vector(b, ckpt.schedule.sigma);
  put_f64_vector(b, ckpt.stats.mean);
  put_f64_vector(b, ckpt.stats.stdev);
  put_u64(b, ckpt.stats.constant.size());
  for (bool c : ckpt.stats.constant) put_u8(b, c ? 1 : 0);
  put_tensor_list(b, ckpt.params);
  put_tensor_list(b, ckpt.extras);
  atomic_write_file(path, b);
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::string bytes = read_file(path);
  Reader r{bytes};
  r.magic(kCheckpointMagic, "checkpoint");
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion)
    throw std::runtime_error("checkpoint: unsupported format version " + std::to_string(version));
  Checkpoint c;
  c.arch = parse_config_text(r.str());
  c.schedule.T = std::size_t(r.u64());
  c.schedule.beta = read_f64_vector(r);
  c.schedule.alpha = read_f64_vector(r);
  c.schedule.alpha_bar = read_f64_vector(r);
  c.schedule.sigma = read_f64_vector(r);
  c.stats.mean = read_f64_vector(r);
  c.stats.stdev = read_f64_vector(r);
  c.stats.constant.resize(std::size_t(r.u64()));
  for (std::size_t i = 0; i < c.stats.constant.size(); ++i) c.stats.constant[i] = r.u8() != 0;
  c.params = read_tensor_list(r);
  c.extras = read_tensor_list(r);
  r.done();
  return c;
}

// ---------------------------------------------------------------------------
// configuration
// ---------------------------------------------------------------------------

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(line_no) + " has no '='");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty())
      throw std::invalid_argument("config: line " + std::to_string(line_no) + " has an empty key");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

ConfigMap load_config(const std::string& path) { return parse_config_text(read_file(path)); }

void apply_overrides(ConfigMap& cfg, const std::vector<std::string>& overrides) {
  for (const std::string& ov : overrides) {
    const std::size_t eq = ov.find('=');
    if (eq == std::string::npos || trim(ov.substr(0, eq)).empty())
      throw std::invalid_argument("override '" + ov + "' is not key=value");
    cfg[trim(ov.substr(0, eq))] = trim(ov.substr(eq + 1));
  }
}

std::string config_get(const ConfigMap& cfg, const std::string& key, const std::string& fallback) {
  const auto it = cfg.find(key);
  return it == cfg.end() ? fallback : it->second;
}

double config_num(const ConfigMap& cfg, const std::string& key, double fallback) {
  const auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) bad_key(key, it->second, "a number");
    return v;
  } catch (const std::invalid_argument&) {
    bad_key(key, it->second, "a number");
  } catch (const std::out_of_range&) {
    bad_key(key, it->second, "a representable number");
  }
}

std::size_t config_count(const ConfigMap& cfg, const std::string& key, std::size_t fallback) {
  const auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(it->second, &used);
    if (used != it->second.size() || it->second[0] == '-')
      bad_key(key, it->second, "a non-negative integer");
    return std::size_t(v);
  } catch (const std::invalid_argument&) {
    bad_key(key, it->second, "a non-negative integer");
  } catch (const std::out_of_range&) {
    bad_key(key, it->second, "a representable integer");
  }
}

bool config_flag(const ConfigMap& cfg, const std::string& key, bool fallback) {
  const auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  std::string v = it->second;
  for (char& c : v) c = char(std::tolower(std::uint8_t(c)));
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  bad_key(key, it->second, "a boolean");
}

std::vector<std::size_t> config_sizes(const ConfigMap& cfg, const std::string& key,
                                      std::vector<std::size_t> fallback) {
  const auto it = cfg.find(key);
  if (it == cfg.end() || trim(it->second).empty()) return fallback;
  std::vector<std::size_t> out;
  std::size_t start = 0;
  const std::string& v = it->second;
  while (start <= v.size()) {
    std::size_t end = v.find(',', start);
    if (end == std::string::npos) end = v.size();
    const std::string piece = trim(v.substr(start, end - start));
    if (piece.empty()) bad_key(key, v, "a comma-separated list of integers");
    try {
      std::size_t used = 0;
      out.push_back(std::size_t(std::stoull(piece, &used)));
      if (used != piece.size()) bad_key(key, v, "a comma-separated list of integers");
    } catch (const std::logic_error&) {
      bad_key(key, v, "a comma-separated list of integers");
    }
    start = end + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// reports
// ---------------------------------------------------------------------------

std::string format_num(double value) {
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, value);
    if (std::strtod(buf, nullptr) == value) return buf;
  }
  return buf;
}

void Report::add(const std::string& key, const std::string& value) {
  lines_.emplace_back(key, value);
}

void Report::add_num(const std::string& key, double value) {
  lines_.emplace_back(key, format_num(value));
}

void Report::add_count(const std::string& key, std::size_t value) {
  lines_.emplace_back(key, std::to_string(value));
}

std::string Report::text() const {
  std::string out;
  for (const auto& [k, v] : lines_) out += k + " = " + v + "\n";
  return out;
}

void Report::save(const std::string& path) const { atomic_write_file(path, text()); }

void write_csv(const std::string& path, const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows) {
  std::string out;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (c) out += ',';
    out += columns[c];
  }
  out += '\n';
  for (const std::vector<double>& row : rows) {
    if (row.size() != columns.size())
      throw std::invalid_argument("csv: row width does not match the header");
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      out += format_num(row[c]);
    }
    out += '\n';
  }
  atomic_write_file(path, out);
}

// ---------------------------------------------------------------------------
// files
// ---------------------------------------------------------------------------

void atomic_write_file(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp);
    f.write(bytes.data(), std::streamsize(bytes.size()));
    if (!f) throw std::runtime_error("short write to " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw std::runtime_error("cannot move " + tmp + " into place: " + std::strerror(errno));
  }
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (f.bad()) throw std::runtime_error("read failure on " + path);
  return bytes;
}

}  // namespace porl
