#include "sstbert/numerics/tape.hpp"

#include "sstbert/numerics/errors.hpp"

namespace sstbert::numerics {

namespace {
thread_local Tape* active_tape = nullptr;
}

void Tape::record(std::vector<std::uintptr_t> parents, std::uintptr_t output,
                  std::function<void()> backward) {
  entries_.push_back(Entry{std::move(parents), output, std::move(backward)});
}

void Tape::replay_backward() {
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) it->backward();
  entries_.clear();
}

Tape* Tape::active() { return active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(active_tape) { active_tape = &tape; }
TapeScope::~TapeScope() { active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(active_tape) { active_tape = nullptr; }
NoGradScope::~NoGradScope() { active_tape = previous_; }

template <typename T>
void backward(Tensor<T>& loss) {
  if (loss.size() != 1) throw NotScalar("backward() needs a scalar loss, got " + shape_string(loss.shape()));
  Tape* tape = Tape::active();
  if (tape == nullptr) throw NoActiveTape("backward() called without an active tape");
  loss.grad()[0] += T{1};
  tape->replay_backward();
}

template void backward<float>(Tensor<float>&);
template void backward<double>(Tensor<double>&);

}  // namespace sstbert::numerics
