#include "phasect/rng.hpp"

#include <stdexcept>
#include <string>

#include "phasect/error.hpp"
#include "phasect/types.hpp"

namespace phasect {

namespace {

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t mix_seed(std::initializer_list<std::uint64_t> words) {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (std::uint64_t w : words) {
    std::uint64_t state = h ^ w;
    h = splitmix64(state);
  }
  return h;
}

Rng::Rng(std::uint64_t seed) {
  std::uint64_t state = seed;
  for (auto& word : s_) word = splitmix64(state);
}

Rng::result_type Rng::operator()() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t bound) {
  const std::uint64_t limit = max() - max() % bound;
  std::uint64_t x;
  do {
    x = (*this)();
  } while (x >= limit);
  return x % bound;
}

const char* to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::P1: return "p1";
    case ProblemKind::LP: return "lp";
    case ProblemKind::TV: return "tv";
  }
  return "?";
}

ProblemKind parse_problem_kind(const std::string& text) {
  if (text == "p1" || text == "P1") return ProblemKind::P1;
  if (text == "lp" || text == "LP") return ProblemKind::LP;
  if (text == "tv" || text == "TV") return ProblemKind::TV;
  throw InvalidArgument("unknown problem kind: " + text);
}

}  // namespace phasect
