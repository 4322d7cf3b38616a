// Debug-mode instrumentation hooks.
//
// RowSumRecorder observes every probability row the library normalizes
// (attention rows, GAT neighborhoods, walk transition distributions) and keeps
// the worst |sum - 1| seen, so a whole training run can be audited in O(1)
// memory. LeakageGuard counts structural reads of forbidden target-layer
// edges during feature construction; a clean run records zero.
#pragma once

#include <cstdint>
#include <unordered_set>

namespace mxlink {

struct RowSumRecorder {
  long rows = 0;
  double max_abs_deviation = 0.0;

  void note(double row_sum) {
    ++rows;
    const double dev = row_sum > 1.0 ? row_sum - 1.0 : 1.0 - row_sum;
    if (dev > max_abs_deviation) max_abs_deviation = dev;
  }
};

namespace detail {
inline RowSumRecorder*& row_sum_slot() {
  thread_local RowSumRecorder* slot = nullptr;
  return slot;
}
}  // namespace detail

inline void set_row_sum_recorder(RowSumRecorder* r) {
  detail::row_sum_slot() = r;
}
inline RowSumRecorder* row_sum_recorder() { return detail::row_sum_slot(); }

/// RAII scope for the thread-local recorder.
struct RowSumRecording {
  explicit RowSumRecording(RowSumRecorder& r) { set_row_sum_recorder(&r); }
  ~RowSumRecording() { set_row_sum_recorder(nullptr); }
  RowSumRecording(const RowSumRecording&) = delete;
  RowSumRecording& operator=(const RowSumRecording&) = delete;
};

/// Records reads of target-layer evaluation edges during feature
/// construction. Feature builders call note_edge for every edge they consume
/// as structure; edges of the target layer that sit in the validation or test
/// split are forbidden and increment `violations`.
class LeakageGuard {
 public:
  LeakageGuard(int target_layer, std::unordered_set<uint64_t> forbidden_keys)
      : target_layer_(target_layer), forbidden_(std::move(forbidden_keys)) {}

  static uint64_t key(int u, int v) {
    if (u > v) std::swap(u, v);
    return (static_cast<uint64_t>(static_cast<uint32_t>(u)) << 32) |
           static_cast<uint32_t>(v);
  }

  void note_edge(int layer, int u, int v) const {
    if (layer != target_layer_) return;
    if (forbidden_.count(key(u, v))) ++violations_;
  }

  int target_layer() const { return target_layer_; }
  long violations() const { return violations_; }

 private:
  int target_layer_;
  std::unordered_set<uint64_t> forbidden_;
  mutable long violations_ = 0;
};

}  // namespace mxlink
