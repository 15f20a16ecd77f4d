// SPDX-License-Identifier: Apache-2.0
#pragma once

// Binary checkpoint, little-endian:
//   "GRNL" | version u32 | N u64 | time f64 | lambda f64 | model tag u32 |
//   params 3 x f64 | master seed u64 | step u64 | N x 3 f64 positions |
//   N x 3 f64 velocities

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <variant>

#include "granulite/ensemble.hpp"
#include "granulite/error.hpp"
#include "granulite/restitution.hpp"

namespace granulite {

inline constexpr std::array<char, 4> kCheckpointMagic{'G', 'R', 'N', 'L'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ParticleEnsemble ensemble;
  double lambda = 0.0;
  RestitutionModel model;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

namespace detail {

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T> && (sizeof(T) == 4 || sizeof(T) == 8));
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  const U bits = std::bit_cast<U>(value);
  char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(bytes, sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw FormatError("truncated checkpoint");
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<U>(bytes[i]) << (8 * i);
  return std::bit_cast<T>(bits);
}

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
  using detail::put_le;
  const auto& ens = ck.ensemble;
  if (ens.positions.size() != ens.velocities.size()) throw InputError("ensemble positions/velocities size mismatch");
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, ens.size());
  put_le<double>(out, ens.time);
  put_le<double>(out, ck.lambda);
  std::uint32_t tag = 0;
  std::array<double, 3> params{0.0, 0.0, 0.0};
  std::visit(
      [&](const auto& law) {
        using T = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<T, ConstantLaw>) {
          tag = 0;
          params[0] = law.e0;
        } else if constexpr (std::is_same_v<T, ViscoelasticLaw>) {
          tag = 1;
          params[0] = law.a;
        } else {
          tag = 2;
          params = {law.a, law.gamma, law.e_min};
        }
      },
      ck.model.law());
  put_le<std::uint32_t>(out, tag);
  for (double p : params) put_le<double>(out, p);
  put_le<std::uint64_t>(out, ck.seed);
  put_le<std::uint64_t>(out, ck.step);
  for (const auto& x : ens.positions)
    for (int d = 0; d < 3; ++d) put_le<double>(out, x[d]);
  for (const auto& v : ens.velocities)
    for (int d = 0; d < 3; ++d) put_le<double>(out, v[d]);
  if (!out) throw FormatError("checkpoint write failed");
}

inline Checkpoint read_checkpoint(std::istream& in) {
  using detail::get_le;
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kCheckpointMagic) throw FormatError("not a checkpoint (bad magic)");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  const auto n = get_le<std::uint64_t>(in);
  ck.ensemble.time = get_le<double>(in);
  ck.lambda = get_le<double>(in);
  const auto tag = get_le<std::uint32_t>(in);
  std::array<double, 3> p{};
  for (auto& x : p) x = get_le<double>(in);
  try {
    switch (tag) {
      case 0: ck.model = RestitutionModel::constant(p[0]); break;
      case 1: ck.model = RestitutionModel::viscoelastic(p[0]); break;
      case 2: ck.model = RestitutionModel::capped(p[0], p[1], p[2]); break;
      default: throw FormatError("unknown restitution tag " + std::to_string(tag));
    }
  } catch (const InputError& e) {
    throw FormatError(std::string("invalid restitution parameters: ") + e.what());
  }
  ck.seed = get_le<std::uint64_t>(in);
  ck.step = get_le<std::uint64_t>(in);
  if (n > (std::uint64_t{1} << 40)) throw FormatError("implausible particle count");
  ck.ensemble.positions.resize(n);
  ck.ensemble.velocities.resize(n);
  for (auto& x : ck.ensemble.positions)
    for (int d = 0; d < 3; ++d) x[d] = get_le<double>(in);
  for (auto& v : ck.ensemble.velocities)
    for (int d = 0; d < 3; ++d) v[d] = get_le<double>(in);
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_checkpoint(out, ck);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace granulite
