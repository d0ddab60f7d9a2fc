#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <stdexcept>

#include "sstbert/tokenizer/tokenizer.hpp"

namespace sstbert::tokenizer {

namespace {

bool is_punctuation(UChar32 c) {
  switch (u_charType(c)) {
    case U_DASH_PUNCTUATION:
    case U_START_PUNCTUATION:
    case U_END_PUNCTUATION:
    case U_CONNECTOR_PUNCTUATION:
    case U_OTHER_PUNCTUATION:
    case U_INITIAL_PUNCTUATION:
    case U_FINAL_PUNCTUATION:
      return true;
    default:
      return false;
  }
}

const icu::Normalizer2& nfd() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = icu::Normalizer2::getNFDInstance(status);
  if (U_FAILURE(status) || n == nullptr) throw std::runtime_error("ICU NFD normalizer unavailable");
  return *n;
}

}  // namespace

std::string canonicalize(std::string_view text) {
  icu::UnicodeString input = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  // Lowercase before decomposing: full case mapping can itself emit marks.
  input.toLower(icu::Locale::getRoot());
  UErrorCode status = U_ZERO_ERROR;
  const icu::UnicodeString decomposed = nfd().normalize(input, status);
  if (U_FAILURE(status)) throw std::runtime_error("NFD normalization failed");

  icu::UnicodeString out;
  bool pending_space = false;
  for (int32_t i = 0; i < decomposed.length();) {
    const UChar32 c = decomposed.char32At(i);
    i += U16_LENGTH(c);
    const int8_t type = u_charType(c);
    if (type == U_NON_SPACING_MARK || type == U_DECIMAL_DIGIT_NUMBER) continue;
    if (is_punctuation(c) || u_isUWhiteSpace(c)) {
      pending_space = !out.isEmpty();
      continue;
    }
    if (pending_space) {
      out.append(static_cast<UChar>(0x20));
      pending_space = false;
    }
    out.append(c);
  }
  std::string result;
  out.toUTF8String(result);
  return result;
}

std::vector<std::string> canonical_words(std::string_view text) {
  const std::string canon = canonicalize(text);
  std::vector<std::string> words;
  std::size_t start = 0;
  while (start < canon.size()) {
    std::size_t end = canon.find(' ', start);
    if (end == std::string::npos) end = canon.size();
    if (end > start) words.emplace_back(canon.substr(start, end - start));
    start = end + 1;
  }
  return words;
}

}  // namespace sstbert::tokenizer
