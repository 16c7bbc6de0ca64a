#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "giraffe/neck.hpp"

namespace giraffe {

/// Exact non-negative rational; width coefficients like 0.85 stay exact.
struct Rational {
  long long num = 0;
  long long den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  friend bool operator==(const Rational&, const Rational&) = default;
};

/// Parses a decimal ("0.85") or fraction ("17/20") into a reduced rational.
Rational parse_rational(const std::string& text);
std::string to_string(const Rational& r);

inline constexpr int kBaseWidth = 256;

struct FamilyEntry {
  std::string name;
  int phi_d = 0;
  Rational phi_w;
  int derived_depth = 0;
  int derived_width = 0;
};

/// GFPN depth = phi_d, width = round_half_up(256 * phi_w).
std::pair<int, int> scale(int phi_d, const Rational& phi_w);

/// The six GiraffeDet variants D7..D29, ordered by phi_d.
const std::vector<FamilyEntry>& family_table();

/// Accepts "D11", "d11" or "GiraffeDet-D11".
std::optional<FamilyEntry> find_family_entry(const std::string& name);

/// GFPN config for a family member. The backbone is never scaled.
GfpnConfig instantiate(const FamilyEntry& entry, SkipMode skip_mode = SkipMode::kLog2n,
                       FusionStyle fusion_style = FusionStyle::kConcat,
                       std::optional<int> width_override = std::nullopt);

}  // namespace giraffe
