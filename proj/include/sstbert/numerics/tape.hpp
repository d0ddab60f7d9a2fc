#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "sstbert/numerics/tensor.hpp"

namespace sstbert::numerics {

/// Ordered record of differentiable operations.
///
/// Operations append entries while a tape is active on the current thread
/// (see TapeScope). Entries are appended in execution order, so every
/// entry's parents are leaves or outputs of earlier entries; backward()
/// replays them once each in reverse.
class Tape {
 public:
  struct Entry {
    std::vector<std::uintptr_t> parents;
    std::uintptr_t output = 0;
    std::function<void()> backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::vector<std::uintptr_t> parents, std::uintptr_t output,
              std::function<void()> backward);

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

  /// Runs every entry's backward closure in reverse order, then clears.
  void replay_backward();

  /// Tape receiving records on this thread, or nullptr.
  static Tape* active();

 private:
  friend class TapeScope;
  std::vector<Entry> entries_;
};

/// Activates a tape on the current thread for the scope's lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

/// Disables recording on the current thread for the scope's lifetime.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

/// Seeds d(loss)/d(loss) = 1 and propagates through the active tape.
/// Gradients accumulate into every requires_grad tensor reached; the tape is
/// cleared afterwards.
template <typename T>
void backward(Tensor<T>& loss);

}  // namespace sstbert::numerics
