#include "runner.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <sstream>

#include "vwb/errors.hpp"
#include "vwb/stats.hpp"

#ifndef VWB_VERSION
#define VWB_VERSION "0.0.0"
#endif

namespace vwb::run {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  return out;
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
  std::int64_t x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size())
    throw InvalidArgument("config: key '" + key + "' expects an integer, got '" + v + "'");
  return x;
}

double parse_real(const std::string& key, const std::string& v) {
  double x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(x))
    throw InvalidArgument("config: key '" + key + "' expects a real number, got '" + v + "'");
  return x;
}

Json parse_value(const KeySpec& spec, const std::string& v) {
  switch (spec.type) {
    case KeyType::kInt:
      return parse_int(spec.name, v);
    case KeyType::kReal:
      return parse_real(spec.name, v);
    case KeyType::kBool:
      if (v == "true") return true;
      if (v == "false") return false;
      throw InvalidArgument("config: key '" + spec.name + "' expects true or false, got '" + v + "'");
    case KeyType::kString:
      return v;
    case KeyType::kIntList:
    case KeyType::kSite: {
      Json arr = Json::array();
      if (!v.empty())
        for (const auto& part : split(v, ',')) arr.push_back(parse_int(spec.name, part));
      if (spec.type == KeyType::kSite && arr.empty())
        throw InvalidArgument("config: key '" + spec.name + "' expects comma-separated coordinates");
      return arr;
    }
    case KeyType::kRealList: {
      Json arr = Json::array();
      if (!v.empty())
        for (const auto& part : split(v, ',')) arr.push_back(parse_real(spec.name, part));
      return arr;
    }
  }
  return nullptr;
}

std::string value_text(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_float()) return format_real(v.get<double>());
  if (v.is_array()) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += ",";
      s += value_text(v[i]);
    }
    return s;
  }
  return v.dump();
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

constexpr char kMagic[8] = {'V', 'W', 'B', 'C', 'K', 'P', 'T', '1'};

void put_u64(std::string& s, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& s, std::size_t& pos) {
  if (pos + 8 > s.size()) throw Corruption("checkpoint: truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[pos + i])) << (8 * i);
  pos += 8;
  return v;
}

std::string get_bytes(const std::string& s, std::size_t& pos, std::uint64_t n) {
  if (n > s.size() || pos + n > s.size()) throw Corruption("checkpoint: truncated");
  std::string out = s.substr(pos, n);
  pos += n;
  return out;
}

}  // namespace

const KeySpec* Schema::find(const std::string& name) const {
  for (const auto& k : keys)
    if (k.name == name) return &k;
  return nullptr;
}

Config::Config(const Schema& schema, const std::map<std::string, std::string>& raw) : schema_(schema) {
  std::vector<std::string> unknown, missing;
  for (const auto& [k, v] : raw)
    if (!schema.find(k)) unknown.push_back(k);
  if (!unknown.empty()) {
    std::string msg = "config: unknown key(s) for '" + schema.subcommand + "':";
    for (const auto& k : unknown) msg += " " + k;
    throw InvalidArgument(msg);
  }
  for (const auto& spec : schema.keys) {
    auto it = raw.find(spec.name);
    if (it == raw.end() && spec.required) missing.push_back(spec.name);
  }
  if (!missing.empty()) {
    std::string msg = "config: missing required key(s) for '" + schema.subcommand + "':";
    for (const auto& k : missing) msg += " " + k;
    throw InvalidArgument(msg);
  }
  for (const auto& spec : schema.keys) {
    auto it = raw.find(spec.name);
    values_[spec.name] = parse_value(spec, it == raw.end() ? spec.fallback : it->second);
  }
}

const Json& Config::get(const std::string& key) const {
  if (!values_.contains(key)) throw InvalidArgument("config: no key '" + key + "'");
  return values_.at(key);
}

std::int64_t Config::integer(const std::string& key) const { return get(key).get<std::int64_t>(); }
double Config::real(const std::string& key) const {
  const auto& v = get(key);
  return v.is_number_integer() ? static_cast<double>(v.get<std::int64_t>()) : v.get<double>();
}
bool Config::boolean(const std::string& key) const { return get(key).get<bool>(); }
std::string Config::text(const std::string& key) const { return get(key).get<std::string>(); }
std::vector<std::int64_t> Config::int_list(const std::string& key) const {
  return get(key).get<std::vector<std::int64_t>>();
}
std::vector<double> Config::real_list(const std::string& key) const {
  std::vector<double> out;
  for (const auto& v : get(key)) out.push_back(v.is_number_integer() ? v.get<std::int64_t>() : v.get<double>());
  return out;
}
Site Config::site(const std::string& key) const {
  Site s;
  for (const auto& v : get(key)) s.push_back(static_cast<int>(v.get<std::int64_t>()));
  return s;
}

void Config::set_text(const std::string& key, const std::string& value) {
  const KeySpec* spec = schema_.find(key);
  if (!spec) throw InvalidArgument("config: unknown key '" + key + "'");
  values_[key] = parse_value(*spec, value);
}

std::string Config::to_text() const {
  std::string s;
  for (const auto& [k, v] : values_.items()) s += k + " = " + value_text(v) + "\n";
  return s;
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidArgument("config: line " + std::to_string(lineno) + " is not of the form key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw InvalidArgument("config: empty key on line " + std::to_string(lineno));
    if (out.count(key)) throw InvalidArgument("config: key '" + key + "' given twice");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

Config config_from_text(const Schema& schema, const std::string& text) {
  return Config(schema, parse_key_values(text));
}

Config config_from_json(const Schema& schema, const Json& object) {
  if (!object.is_object()) throw InvalidArgument("config: expected a JSON object");
  std::map<std::string, std::string> raw;
  for (const auto& [k, v] : object.items()) raw[k] = value_text(v);
  return Config(schema, raw);
}

Config load_config(const Schema& schema, const std::filesystem::path& file) {
  const std::string text = read_file(file);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    Json j;
    try {
      j = Json::parse(text);
    } catch (const std::exception& e) {
      throw InvalidArgument("config: cannot parse manifest " + file.string() + ": " + e.what());
    }
    if (!j.contains("config")) throw InvalidArgument("config: manifest has no config object");
    if (j.contains("subcommand") && j["subcommand"] != schema.subcommand)
      throw InvalidArgument("config: manifest belongs to subcommand " + j["subcommand"].get<std::string>());
    return config_from_json(schema, j["config"]);
  }
  return config_from_text(schema, text);
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256: digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& file) { return sha256_hex(read_file(file)); }

std::uint64_t stream_seed(std::uint64_t seed, const std::string& name, std::uint64_t index) {
  std::uint64_t h = splitmix64(seed);
  for (unsigned char c : name) h = splitmix64(h ^ c);
  return splitmix64(h ^ splitmix64(index + 0x9e3779b97f4a7c15ULL));
}

std::string format_real(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string read_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_atomic(const std::filesystem::path& file, const std::string& bytes) {
  auto tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, file);
}

std::string code_version() { return VWB_VERSION; }

RunOutputs::RunOutputs(std::filesystem::path dir, std::string subcommand, const Config& config, std::uint64_t seed,
                       int threads, bool reproducible)
    : dir_(std::move(dir)),
      subcommand_(std::move(subcommand)),
      config_(config.values()),
      seed_(seed),
      threads_(threads),
      reproducible_(reproducible) {
  std::filesystem::create_directories(dir_);
  started_ = reproducible ? "reproducible" : timestamp();
}

void RunOutputs::record(const std::string& name, const std::string& bytes) {
  Json entry = {{"file", name}, {"sha256", sha256_hex(bytes)}, {"bytes", bytes.size()}};
  for (auto& o : outputs_)
    if (o["file"] == name) {
      o = entry;
      return;
    }
  outputs_.push_back(entry);
}

void RunOutputs::write(const std::string& name, const std::string& bytes) {
  write_atomic(path(name), bytes);
  record(name, bytes);
}

void RunOutputs::add_existing(const std::string& name) { record(name, read_file(path(name))); }

std::string RunOutputs::finish() { return write_manifest(true); }

std::string RunOutputs::write_manifest(bool final) {
  Json m;
  const std::string id_source = subcommand_ + "\n" + config_.dump() + "\n" + std::to_string(seed_);
  m["run_id"] = sha256_hex(id_source).substr(0, 16);
  m["subcommand"] = subcommand_;
  m["config"] = config_;
  m["seed"] = seed_;
  m["threads"] = threads_;
  m["reproducible"] = reproducible_;
  m["started"] = started_;
  if (!final)
    m["finished"] = nullptr;
  else
    m["finished"] = reproducible_ ? "reproducible" : timestamp();
  m["code_version"] = code_version();
  m["outputs"] = outputs_;
  m["summary"] = summary_;
  const auto file = path("manifest.json");
  write_atomic(file, m.dump(2) + "\n");
  return file.string();
}

std::string encode_checkpoint(const Checkpoint& c) {
  std::string s(kMagic, kMagic + 8);
  const std::string meta = c.meta.dump();
  put_u64(s, meta.size());
  s += meta;
  put_u64(s, c.rng_states.size());
  for (const auto& r : c.rng_states) {
    put_u64(s, r.size());
    s += r;
  }
  put_u64(s, c.arrays.size());
  for (const auto& a : c.arrays) {
    put_u64(s, a.size());
    for (double v : a) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, 8);
      put_u64(s, bits);
    }
  }
  const std::string digest = sha256_hex(s);
  return s + digest;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 8 + 64 || std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw Corruption("checkpoint: bad magic header");
  const std::string body = bytes.substr(0, bytes.size() - 64);
  if (sha256_hex(body) != bytes.substr(bytes.size() - 64)) throw Corruption("checkpoint: digest mismatch");
  Checkpoint c;
  std::size_t pos = 8;
  const auto meta_len = get_u64(body, pos);
  try {
    c.meta = Json::parse(get_bytes(body, pos, meta_len));
  } catch (const nlohmann::json::exception&) {
    throw Corruption("checkpoint: unreadable metadata");
  }
  const auto nr = get_u64(body, pos);
  for (std::uint64_t i = 0; i < nr; ++i) c.rng_states.push_back(get_bytes(body, pos, get_u64(body, pos)));
  const auto na = get_u64(body, pos);
  for (std::uint64_t i = 0; i < na; ++i) {
    const auto n = get_u64(body, pos);
    if (n > body.size()) throw Corruption("checkpoint: truncated");
    std::vector<double> a(n);
    for (auto& v : a) {
      const std::uint64_t bits = get_u64(body, pos);
      std::memcpy(&v, &bits, 8);
    }
    c.arrays.push_back(std::move(a));
  }
  if (pos != body.size()) throw Corruption("checkpoint: trailing bytes");
  return c;
}

void save_checkpoint(const std::filesystem::path& file, const Checkpoint& c) { write_atomic(file, encode_checkpoint(c)); }

Checkpoint load_checkpoint(const std::filesystem::path& file) {
  const std::string bytes = read_file(file);
  Checkpoint c = decode_checkpoint(bytes);
  const auto manifest = file.parent_path() / "manifest.json";
  if (std::filesystem::exists(manifest)) {
    Json m = Json::parse(read_file(manifest), nullptr, false);
    if (!m.is_discarded() && m.contains("outputs"))
      for (const auto& o : m["outputs"])
        if (o.value("file", "") == file.filename().string() && o.value("sha256", "") != sha256_hex(bytes))
          throw Corruption("checkpoint: digest does not match the run manifest");
  }
  return c;
}

std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void restore_rng(std::mt19937_64& rng, const std::string& state) {
  std::istringstream is(state);
  is >> rng;
  if (!is) throw Corruption("checkpoint: unreadable random state");
}

}  // namespace vwb::run
