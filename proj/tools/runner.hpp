#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "vwb/lattice.hpp"

namespace vwb::run {

using Json = nlohmann::ordered_json;

enum class KeyType { kInt, kReal, kBool, kString, kIntList, kRealList, kSite };

struct KeySpec {
  std::string name;
  KeyType type;
  bool required = true;
  std::string fallback;  // text used when the key is absent and not required
  std::string doc;
};

struct Schema {
  std::string subcommand;
  std::vector<KeySpec> keys;
  const KeySpec* find(const std::string& name) const;
};

// Typed, validated configuration. Keys keep the schema order.
class Config {
 public:
  Config() = default;
  Config(const Schema& schema, const std::map<std::string, std::string>& raw);

  std::int64_t integer(const std::string& key) const;
  double real(const std::string& key) const;
  bool boolean(const std::string& key) const;
  std::string text(const std::string& key) const;
  std::vector<std::int64_t> int_list(const std::string& key) const;
  std::vector<double> real_list(const std::string& key) const;
  Site site(const std::string& key) const;

  void set_text(const std::string& key, const std::string& value);  // re-parsed against the schema
  const Json& values() const { return values_; }
  std::string to_text() const;  // key = value lines, parseable again
  const Schema& schema() const { return schema_; }

 private:
  Schema schema_;
  Json values_ = Json::object();
  const Json& get(const std::string& key) const;
};

// key = value lines, '#' starts a comment
std::map<std::string, std::string> parse_key_values(const std::string& text);
// A config file is key = value text, or a run manifest whose "config" object is used.
Config load_config(const Schema& schema, const std::filesystem::path& file);
Config config_from_text(const Schema& schema, const std::string& text);
Config config_from_json(const Schema& schema, const Json& object);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& file);

// Named, independent random streams derived from one seed.
std::uint64_t stream_seed(std::uint64_t seed, const std::string& name, std::uint64_t index = 0);

std::string format_real(double v);  // shortest round-trip text

// Collects the outputs of one run and writes the manifest last.
class RunOutputs {
 public:
  RunOutputs(std::filesystem::path dir, std::string subcommand, const Config& config, std::uint64_t seed,
             int threads, bool reproducible);
  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path path(const std::string& name) const { return dir_ / name; }
  // written to a temporary name and renamed into place
  void write(const std::string& name, const std::string& bytes);
  // registers a file produced by a stream (already complete on disk)
  void add_existing(const std::string& name);
  Json& summary() { return summary_; }
  std::string finish();  // writes manifest.json, returns its path
  // an unfinished manifest, so checkpoints written mid-run are listed
  std::string write_manifest(bool final);

 private:
  void record(const std::string& name, const std::string& bytes);
  std::filesystem::path dir_;
  std::string subcommand_;
  Json config_;
  std::uint64_t seed_;
  int threads_;
  bool reproducible_;
  std::string started_;
  Json outputs_ = Json::array();
  Json summary_ = Json::object();
};

void write_atomic(const std::filesystem::path& file, const std::string& bytes);
std::string read_file(const std::filesystem::path& file);
std::string code_version();

// Binary checkpoint: magic header, JSON metadata, RNG states, double arrays,
// SHA-256 trailer over everything before it.
struct Checkpoint {
  Json meta = Json::object();
  std::vector<std::string> rng_states;
  std::vector<std::vector<double>> arrays;
};
std::string encode_checkpoint(const Checkpoint& c);
Checkpoint decode_checkpoint(const std::string& bytes);  // Corruption on a bad header or digest
void save_checkpoint(const std::filesystem::path& file, const Checkpoint& c);
// Reads and verifies; when a manifest.json sits next to the file and lists
// it, the recorded digest must match as well.
Checkpoint load_checkpoint(const std::filesystem::path& file);

std::string rng_state(const std::mt19937_64& rng);
void restore_rng(std::mt19937_64& rng, const std::string& state);

}  // namespace vwb::run
