#include "microgrid/checkpoint.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <sstream>

#include "microgrid/errors.hpp"
#include "microgrid/schemes.hpp"

namespace microgrid {

namespace {

constexpr char kMagic[8] = {'M', 'G', 'Q', 'N', 'E', 'T', '0', '1'};
constexpr std::uint64_t kMaxHeaderBytes = 1u << 24;

using nlohmann::json;

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw DataError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

const char* stream_name(StreamKind kind) {
  switch (kind) {
    case StreamKind::kValue: return "value";
    case StreamKind::kAdvantage: return "advantage";
    case StreamKind::kQ: return "q";
  }
  return "?";
}

json header_of(const Checkpoint& c) {
  json layers = json::array();
  for (const auto& l : c.params.layers) {
    layers.push_back({{"stream", stream_name(l.stream)},
                      {"in", l.in},
                      {"out", l.out},
                      {"weight_offset", l.weight_offset},
                      {"bias_offset", l.bias_offset}});
  }
  return json{
      {"format", "microgrid-qnet"},
      {"version", 1},
      {"input_dim", c.params.input_dim},
      {"dueling", c.params.arch.dueling},
      {"double_q", c.double_q},
      {"update", to_string(c.update)},
      {"hidden_layers", c.params.arch.hidden_layers},
      {"hidden_units", c.params.arch.hidden_units},
      {"num_actions", kNumActions},
      {"scheme", to_string(c.scheme)},
      {"horizon", c.horizon},
      {"layers", layers},
      {"scaler",
       {{"price_min", c.scaler.price.min},
        {"price_max", c.scaler.price.max},
        {"carbon_min", c.scaler.carbon.min},
        {"carbon_max", c.scaler.carbon.max}}},
      {"env",
       {{"capacity_kwh", c.env.capacity_kwh},
        {"soc_max_kwh", c.env.soc_max_kwh},
        {"soc_min_kwh", c.env.soc_min_kwh},
        {"transfer_cap_kwh", c.env.transfer_cap_kwh},
        {"efficiency", c.env.efficiency},
        {"peak_limit_kw", c.env.peak_limit_kw},
        {"dt_h", c.env.dt_h},
        {"standby_loss_kw", c.env.standby_loss_kw},
        {"alpha", c.env.alpha},
        {"beta", c.env.beta},
        {"lambda", c.env.lambda}}},
  };
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, std::ostream& out) {
  const std::string header = header_of(ckpt).dump();
  out.write(kMagic, sizeof(kMagic));
  put_u64(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  put_u64(out, ckpt.params.num_params());
  for (Eigen::Index i = 0; i < ckpt.params.values.size(); ++i)
    put_u64(out, std::bit_cast<std::uint64_t>(ckpt.params.values[i]));
  if (!out) throw DataError("failed writing checkpoint");
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint '" + path.string() + "'");
  save_checkpoint(ckpt, out);
}

std::vector<unsigned char> serialize_checkpoint(const Checkpoint& ckpt) {
  std::ostringstream out(std::ios::binary);
  save_checkpoint(ckpt, out);
  const std::string s = out.str();
  return {s.begin(), s.end()};
}

Checkpoint load_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw DataError("not a microgrid checkpoint (bad magic)");
  const std::uint64_t header_len = get_u64(in);
  if (header_len > kMaxHeaderBytes) throw DataError("checkpoint header too large");
  std::string header_text(header_len, '\0');
  if (!in.read(header_text.data(), static_cast<std::streamsize>(header_len)))
    throw DataError("checkpoint truncated in header");

  Checkpoint c;
  try {
    const json h = json::parse(header_text);
    if (h.at("num_actions").get<int>() != kNumActions)
      throw DataError("checkpoint action count does not match");
    NetArchitecture arch{h.at("dueling").get<bool>(), h.at("hidden_layers").get<int>(),
                         h.at("hidden_units").get<int>()};
    c.params = make_params(h.at("input_dim").get<int>(), arch);
    const json& layers = h.at("layers");
    if (layers.size() != c.params.layers.size()) throw DataError("checkpoint layer count mismatch");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = c.params.layers[i];
      const json& j = layers[i];
      if (j.at("stream").get<std::string>() != stream_name(l.stream) || j.at("in").get<int>() != l.in ||
          j.at("out").get<int>() != l.out || j.at("weight_offset").get<std::size_t>() != l.weight_offset ||
          j.at("bias_offset").get<std::size_t>() != l.bias_offset)
        throw DataError("checkpoint layer " + std::to_string(i) + " shape mismatch");
    }
    c.double_q = h.at("double_q").get<bool>();
    c.update = parse_update_rule(h.at("update").get<std::string>());
    c.scheme = parse_scheme(h.at("scheme").get<std::string>());
    c.horizon = h.at("horizon").get<int>();
    const json& s = h.at("scaler");
    c.scaler.price = {s.at("price_min").get<double>(), s.at("price_max").get<double>()};
    c.scaler.carbon = {s.at("carbon_min").get<double>(), s.at("carbon_max").get<double>()};
    const json& e = h.at("env");
    c.env.capacity_kwh = e.at("capacity_kwh").get<double>();
    c.env.soc_max_kwh = e.at("soc_max_kwh").get<double>();
    c.env.soc_min_kwh = e.at("soc_min_kwh").get<double>();
    c.env.transfer_cap_kwh = e.at("transfer_cap_kwh").get<double>();
    c.env.efficiency = e.at("efficiency").get<double>();
    c.env.peak_limit_kw = e.at("peak_limit_kw").get<double>();
    c.env.dt_h = e.at("dt_h").get<double>();
    c.env.standby_loss_kw = e.at("standby_loss_kw").get<double>();
    c.env.alpha = e.at("alpha").get<double>();
    c.env.beta = e.at("beta").get<double>();
    c.env.lambda = e.at("lambda").get<double>();
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("malformed checkpoint header: ") + e.what());
  }
  if (static_cast<int>(state_dim(c.scheme, c.horizon)) != c.params.input_dim)
    throw DataError("checkpoint input dimension " + std::to_string(c.params.input_dim) +
                    " does not match scheme " + to_string(c.scheme) + " with horizon " +
                    std::to_string(c.horizon));

  const std::uint64_t count = get_u64(in);
  if (count != c.params.num_params())
    throw DataError("checkpoint stores " + std::to_string(count) + " parameters, layout needs " +
                    std::to_string(c.params.num_params()));
  for (Eigen::Index i = 0; i < c.params.values.size(); ++i)
    c.params.values[i] = std::bit_cast<double>(get_u64(in));
  return c;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  return load_checkpoint(in);
}

std::string sha256_hex(const std::vector<unsigned char>& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return sha256_hex(bytes);
}

}  // namespace microgrid
