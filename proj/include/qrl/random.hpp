#ifndef QRL_RANDOM_HPP
#define QRL_RANDOM_HPP

#include <cstdint>
#include <random>

namespace qrl {

using Engine = std::mt19937_64;

/// Independent random streams used while generating one record. Each purpose
/// draws from its own engine so that changing, say, the noise level leaves
/// the state-path draws untouched (common random numbers across sweeps).
enum class StreamPurpose : std::uint64_t {
  kInitialState = 1,
  kPath = 2,
  kPiPulse = 3,
  kNoise = 4,
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for record `index` of an ensemble, a pure function of both inputs.
inline constexpr std::uint64_t record_seed(std::uint64_t master_seed, std::uint64_t index) {
  return splitmix64(splitmix64(master_seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

/// Per-record bundle of purpose-keyed engines.
class RecordStreams {
 public:
  explicit RecordStreams(std::uint64_t seed)
      : initial_(derive(seed, StreamPurpose::kInitialState)),
        path_(derive(seed, StreamPurpose::kPath)),
        pi_(derive(seed, StreamPurpose::kPiPulse)),
        noise_(derive(seed, StreamPurpose::kNoise)) {}

  RecordStreams(std::uint64_t master_seed, std::uint64_t index)
      : RecordStreams(record_seed(master_seed, index)) {}

  Engine& initial() { return initial_; }
  Engine& path() { return path_; }
  Engine& pi() { return pi_; }
  Engine& noise() { return noise_; }

 private:
  static std::uint64_t derive(std::uint64_t seed, StreamPurpose purpose) {
    return splitmix64(seed ^ (static_cast<std::uint64_t>(purpose) * 0xd1b54a32d192ed03ULL));
  }

  Engine initial_;
  Engine path_;
  Engine pi_;
  Engine noise_;
};

}  // namespace qrl

#endif  // QRL_RANDOM_HPP
