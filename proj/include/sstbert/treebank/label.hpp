#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string_view>

namespace sstbert::treebank {

class InvalidLabel : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Five-way sentiment: 0 very negative, 1 negative, 2 neutral, 3 positive,
/// 4 very positive.
class SentimentLabel {
 public:
  static constexpr int kNumClasses = 5;

  /// Throws InvalidLabel outside [0, 4].
  explicit SentimentLabel(int value);

  int value() const { return value_; }
  std::string_view name() const;

  friend auto operator<=>(SentimentLabel, SentimentLabel) = default;

 private:
  std::uint8_t value_;
};

enum class BinaryLabel : std::uint8_t { negative = 0, positive = 1 };

std::string_view to_string(BinaryLabel label);

/// SST-2 projection: {0,1} -> negative, {3,4} -> positive, 2 -> none.
std::optional<BinaryLabel> to_binary(SentimentLabel label);

/// Human-readable names, indexed by class.
std::string_view sentiment_name(int value);

}  // namespace sstbert::treebank
