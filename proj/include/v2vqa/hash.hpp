#ifndef V2VQA_HASH_HPP
#define V2VQA_HASH_HPP

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace v2vqa {

/// 64-bit FNV-1a, used for stable ids and provenance digests.
class Fnv1a {
 public:
  Fnv1a& update(std::string_view bytes) {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= 0x100000001b3ULL;
    }
    return *this;
  }

  /// Appends a field followed by a unit separator so ("ab","c") != ("a","bc").
  Fnv1a& field(std::string_view bytes) {
    update(bytes);
    return update(std::string_view("\x1f", 1));
  }

  std::uint64_t value() const { return state_; }

  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(state_));
    return buf;
  }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::string fnv1a_hex(std::string_view bytes) { return Fnv1a().update(bytes).hex(); }

}  // namespace v2vqa

#endif  // V2VQA_HASH_HPP
