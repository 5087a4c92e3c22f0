#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <openssl/sha.h>

#include "json.hpp"

#include "fgl/params.hpp"
#include "fgl/reference.hpp"

namespace fgl {

namespace detail {

inline std::string sha256_hex(const void* data, std::size_t len) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(static_cast<const unsigned char*>(data), len, digest);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * SHA256_DIGEST_LENGTH);
  for (unsigned char b : digest) {
    out.push_back(hex[b >> 4]);
    out.push_back(hex[b & 0xF]);
  }
  return out;
}

inline nlohmann::json initial_condition_json(const InitialCondition& ic) {
  if (const auto* c = std::get_if<initial::Custom>(&ic)) {
    return {{"kind", "custom"},
            {"rows", c->samples.rows()},
            {"cols", c->samples.cols()},
            {"sha256", sha256_hex(c->samples.data(), sizeof(Complex) * c->samples.size())}};
  }
  if (const auto* r = std::get_if<initial::RankR>(&ic))
    return {{"kind", "rank_r"}, {"rank", r->rank}, {"seed", r->seed}};
  return {{"kind", initial_condition_name(ic)}};
}

inline void put_f64le(std::vector<char>& buf, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) buf.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
}

inline double get_f64le(const char* p) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[b])) << (8 * b);
  return std::bit_cast<double>(bits);
}

inline void write_atomically(const std::filesystem::path& target, const std::string& bytes) {
  std::ostringstream tag;
  tag << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id());
  const std::filesystem::path tmp = target.string() + tag.str();
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot write " + tmp.string());
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw Error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

}  // namespace detail

/// Canonical description of a reference run; its SHA-256 names the cache files.
inline nlohmann::json reference_config(const FglParams& p, int n, int m_ref) {
  return {{"scheme", "lie-trotter-closed-form"},
          {"version", 1},
          {"nu", p.nu},
          {"eta", p.eta},
          {"kappa", p.kappa},
          {"xi", p.xi},
          {"gamma", p.gamma},
          {"alpha", p.alpha},
          {"beta", p.beta},
          {"domain", {p.domain.x_left, p.domain.x_right, p.domain.y_left, p.domain.y_right}},
          {"t_final", p.t_final},
          {"initial", detail::initial_condition_json(p.initial_condition)},
          {"n", n},
          {"m_ref", m_ref}};
}

/// Fields are stored as little-endian float64 (re, im) pairs in column-major order
/// (x index fastest) under cache/<sha256(config)>.bin, with a JSON sidecar <sha256>.json.
class ReferenceCache {
 public:
  explicit ReferenceCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  const std::filesystem::path& directory() const { return dir_; }

  static std::string key(const nlohmann::json& config) {
    const std::string canonical = config.dump();
    return detail::sha256_hex(canonical.data(), canonical.size());
  }

  std::filesystem::path bin_path(const std::string& key) const { return dir_ / (key + ".bin"); }
  std::filesystem::path json_path(const std::string& key) const { return dir_ / (key + ".json"); }

  /// Cached field, or nothing when absent, inconsistent or corrupt.
  std::optional<ComplexField> load(const nlohmann::json& config) const {
    const std::string k = key(config);
    std::ifstream js(json_path(k));
    if (!js) return std::nullopt;
    nlohmann::json side;
    try {
      js >> side;
    } catch (const nlohmann::json::exception&) {
      return std::nullopt;
    }
    if (!side.is_object() || side.value("hash", "") != k || side.value("config", nlohmann::json()) != config)
      return std::nullopt;
    const Index rows = side.value("rows", Index{-1});
    const Index cols = side.value("cols", Index{-1});
    if (rows < 1 || cols < 1) return std::nullopt;
    std::ifstream bs(bin_path(k), std::ios::binary);
    if (!bs) return std::nullopt;
    std::vector<char> bytes((std::istreambuf_iterator<char>(bs)), std::istreambuf_iterator<char>());
    if (bytes.size() != static_cast<std::size_t>(rows * cols * 16)) return std::nullopt;
    ComplexField u(rows, cols);
    for (Index idx = 0; idx < rows * cols; ++idx)
      u.data()[idx] = Complex(detail::get_f64le(&bytes[16 * idx]), detail::get_f64le(&bytes[16 * idx + 8]));
    return u;
  }

  void store(const nlohmann::json& config, const ComplexField& u) const {
    std::filesystem::create_directories(dir_);
    const std::string k = key(config);
    std::vector<char> buf;
    buf.reserve(static_cast<std::size_t>(u.size()) * 16);
    for (Index idx = 0; idx < u.size(); ++idx) {
      detail::put_f64le(buf, u.data()[idx].real());
      detail::put_f64le(buf, u.data()[idx].imag());
    }
    detail::write_atomically(bin_path(k), std::string(buf.begin(), buf.end()));
    const nlohmann::json side = {{"hash", k},
                                 {"config", config},
                                 {"rows", u.rows()},
                                 {"cols", u.cols()},
                                 {"format", "f64le-interleaved-colmajor"}};
    detail::write_atomically(json_path(k), side.dump(2) + "\n");
  }

 private:
  std::filesystem::path dir_;
};

/// Reference field at t_final, read from the cache when possible and recomputed otherwise.
inline ComplexField reference_solution(const FglParams& params, int n, int m_ref,
                                       const ReferenceCache* cache = nullptr,
                                       Index dense_limit = kDefaultDenseLimit) {
  params.validate();
  const nlohmann::json config = reference_config(params, n, m_ref);
  if (cache) {
    if (auto hit = cache->load(config)) return *hit;
  }
  ComplexField u = compute_reference(params, n, m_ref, dense_limit);
  if (cache) cache->store(config, u);
  return u;
}

}  // namespace fgl
