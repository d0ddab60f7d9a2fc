#include "sstbert/treebank/label.hpp"

#include <array>
#include <string>

namespace sstbert::treebank {

namespace {
constexpr std::array<std::string_view, 5> kNames = {"very negative", "negative", "neutral",
                                                    "positive", "very positive"};
}

SentimentLabel::SentimentLabel(int value) {
  if (value < 0 || value >= kNumClasses) {
    throw InvalidLabel("sentiment label must be in [0, 4], got " + std::to_string(value));
  }
  value_ = static_cast<std::uint8_t>(value);
}

std::string_view SentimentLabel::name() const { return kNames[value_]; }

std::string_view sentiment_name(int value) {
  return kNames.at(static_cast<std::size_t>(value));
}

std::string_view to_string(BinaryLabel label) {
  return label == BinaryLabel::negative ? "negative" : "positive";
}

std::optional<BinaryLabel> to_binary(SentimentLabel label) {
  switch (label.value()) {
    case 0:
    case 1:
      return BinaryLabel::negative;
    case 3:
    case 4:
      return BinaryLabel::positive;
    default:
      return std::nullopt;
  }
}

}  // namespace sstbert::treebank
