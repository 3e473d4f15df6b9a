#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "spo/core/dataset_io.hpp"
#include "spo/core/sha256.hpp"
#include "spo/models/factory.hpp"

namespace spo {

// Layout: "SPOCKPT1\n", one JSON header line (kind, architecture, vocab_hash,
// round, num_parameters), then the parameters as little-endian IEEE-754 doubles.
inline constexpr const char* kCheckpointMagic = "SPOCKPT1";

struct Checkpoint {
  std::unique_ptr<Policy> policy;
  std::size_t round = 0;
};

inline std::string vocab_hash(const Vocab& v) { return sha256_hex(detail::vocab_to_json(v).dump()); }

inline std::string serialize_checkpoint(const Policy& policy, std::size_t round) {
  const auto params = policy.parameters();
  const nlohmann::json header{{"kind", to_string(policy.kind())},
                              {"architecture", policy.architecture()},
                              {"vocab_hash", vocab_hash(policy.vocab())},
                              {"round", round},
                              {"num_parameters", params.size()}};
  std::string out = std::string(kCheckpointMagic) + "\n" + header.dump() + "\n";
  out.reserve(out.size() + 8 * params.size());
  for (double v : params) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
  }
  return out;
}

inline Checkpoint parse_checkpoint(const std::string& bytes) {
  const std::string magic = std::string(kCheckpointMagic) + "\n";
  require(bytes.compare(0, magic.size(), magic) == 0, "checkpoint: bad magic");
  const auto eol = bytes.find('\n', magic.size());
  require(eol != std::string::npos, "checkpoint: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(magic.size(), eol - magic.size()));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("checkpoint header: ") + e.what());
  }
  const auto n = header.at("num_parameters").get<std::size_t>();
  const std::size_t body = eol + 1;
  require(bytes.size() == body + 8 * n, "checkpoint: parameter block has wrong length");
  std::vector<double> params(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[body + 8 * i + b])) << (8 * b);
    }
    params[i] = std::bit_cast<double>(bits);
  }
  Checkpoint ck;
  ck.policy = policy_from_architecture(header.at("architecture"), std::move(params));
  require(vocab_hash(ck.policy->vocab()) == header.at("vocab_hash").get<std::string>(), "checkpoint: vocab hash mismatch");
  ck.round = header.at("round").get<std::size_t>();
  return ck;
}

inline void save_checkpoint(const Policy& policy, std::size_t round, const std::filesystem::path& path) {
  detail::write_file(path, serialize_checkpoint(policy, round));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(detail::read_file(path));
}

}  // namespace spo
