#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace caseflow {

// Enumerator values follow intensity: Prev < ES < RRH < TH.
enum class Intervention : int { Prev = 0, ES = 1, RRH = 2, TH = 3 };

inline constexpr std::size_t kNumInterventions = 4;

/// Least to most intensive.
inline constexpr std::array<Intervention, kNumInterventions> kByIntensity = {
    Intervention::Prev, Intervention::ES, Intervention::RRH, Intervention::TH};

/// Report order used in tables (mirrors the usual ES, TH, RRH, Prev listing).
inline constexpr std::array<Intervention, kNumInterventions> kReportOrder = {
    Intervention::ES, Intervention::TH, Intervention::RRH, Intervention::Prev};

inline constexpr std::size_t index_of(Intervention i) { return static_cast<std::size_t>(i); }

inline constexpr int intensity(Intervention i) { return static_cast<int>(i); }

inline std::string_view to_string(Intervention i) {
  switch (i) {
    case Intervention::Prev: return "Prev";
    case Intervention::ES: return "ES";
    case Intervention::RRH: return "RRH";
    case Intervention::TH: return "TH";
  }
  return "?";
}

inline std::string_view long_name(Intervention i) {
  switch (i) {
    case Intervention::Prev: return "Prevention";
    case Intervention::ES: return "Emergency Shelter";
    case Intervention::RRH: return "Rapid Re-Housing";
    case Intervention::TH: return "Transitional Housing";
  }
  return "?";
}

/// Accepts the short codes. PSH is not an intervention here and maps to nullopt.
inline std::optional<Intervention> parse_intervention(std::string_view s) {
  if (s == "Prev") return Intervention::Prev;
  if (s == "ES") return Intervention::ES;
  if (s == "RRH") return Intervention::RRH;
  if (s == "TH") return Intervention::TH;
  return std::nullopt;
}

/// Permanent supportive housing is excluded from the analysis at load time.
inline bool is_excluded_label(std::string_view s) { return s == "PSH"; }

}  // namespace caseflow
