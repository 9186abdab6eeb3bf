#pragma once

#include <string_view>

// Data files compiled into the library (generated from data/ at configure time).
namespace cfd::embedded {

extern const std::string_view kStopwordsEn;
extern const std::string_view kDefaultPatterns;

}  // namespace cfd::embedded
