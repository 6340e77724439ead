#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "microgrid/agent.hpp"
#include "microgrid/data.hpp"
#include "microgrid/env.hpp"
#include "microgrid/net.hpp"

namespace microgrid {

// A trained policy with everything needed to act: network, state scheme and
// horizon, data scaler and the microgrid constants used for normalisation.
struct Checkpoint {
  NetParams params;
  Scheme scheme = Scheme::kPredictionFree;
  int horizon = 24;
  bool double_q = true;
  UpdateRule update = UpdateRule::kSoft;
  Scaler scaler;
  MicrogridConfig env;
};

// File layout:
//   8 bytes   magic "MGQNET01"
//   u64 LE    header length H
//   H bytes   UTF-8 JSON header (architecture, shapes, scheme, scaler, env)
//   u64 LE    parameter count P
//   P x f64 LE parameter values, layer blocks in header order
void save_checkpoint(const Checkpoint& ckpt, std::ostream& out);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::vector<unsigned char> serialize_checkpoint(const Checkpoint& ckpt);

// Lower-case hex SHA-256 of a byte string or file.
std::string sha256_hex(const std::vector<unsigned char>& bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace microgrid
