#include "giraffe/scaling.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>

#include "giraffe/error.hpp"

namespace giraffe {

Rational parse_rational(const std::string& text) {
  auto bad = [&]() -> Rational { fail_usage("'" + text + "' is not a positive decimal or fraction"); };
  if (text.empty()) return bad();
  long long num = 0;
  long long den = 1;
  const auto slash = text.find('/');
  auto digits = [](const std::string& s) {
    return !s.empty() && s.size() < 12 &&
           std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
  };
  if (slash != std::string::npos) {
    const std::string a = text.substr(0, slash);
    const std::string b = text.substr(slash + 1);
    if (!digits(a) || !digits(b)) return bad();
    num = std::stoll(a);
    den = std::stoll(b);
  } else {
    const auto dot = text.find('.');
    const std::string whole = text.substr(0, dot);
    const std::string frac = dot == std::string::npos ? "" : text.substr(dot + 1);
    if ((!whole.empty() && !digits(whole)) || (!frac.empty() && !digits(frac)) ||
        (whole.empty() && frac.empty()) || frac.size() > 9)
      return bad();
    for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
    num = (whole.empty() ? 0 : std::stoll(whole)) * den + (frac.empty() ? 0 : std::stoll(frac));
  }
  if (den == 0) return bad();
  const long long g = std::gcd(num, den);
  return g == 0 ? Rational{0, 1} : Rational{num / g, den / g};
}

std::string to_string(const Rational& r) {
  long long pow10 = 1;
  for (int digits = 0; digits <= 9; ++digits, pow10 *= 10) {
    if (pow10 % r.den != 0) continue;
    const long long scaled = r.num * (pow10 / r.den);
    std::string frac = std::to_string(scaled % pow10);
    frac.insert(0, static_cast<std::size_t>(digits) - std::min<std::size_t>(frac.size(), digits), '0');
    return std::to_string(scaled / pow10) + "." + (digits == 0 ? "0" : frac);
  }
  return std::to_string(r.num) + "/" + std::to_string(r.den);
}

std::pair<int, int> scale(int phi_d, const Rational& phi_w) {
  if (phi_d < 1) fail_validation("phi_d must be >= 1");
  if (phi_w.num <= 0 || phi_w.den <= 0) fail_validation("phi_w must be > 0");
  // floor(256 * num / den + 1/2) in integer arithmetic.
  const long long width = (2LL * kBaseWidth * phi_w.num + phi_w.den) / (2LL * phi_w.den);
  if (width < 1) fail_validation("phi_w yields a zero width");
  return {phi_d, static_cast<int>(width)};
}

const std::vector<FamilyEntry>& family_table() {
  static const std::vector<FamilyEntry> table = [] {
    const std::vector<std::pair<int, Rational>> rows = {
        {7, {7, 10}}, {11, {17, 20}}, {14, {19, 20}}, {16, {1, 1}}, {25, {23, 20}}, {29, {6, 5}},
    };
    std::vector<FamilyEntry> out;
    for (const auto& [d, w] : rows) {
      const auto [depth, width] = scale(d, w);
      out.push_back({"D" + std::to_string(d), d, w, depth, width});
    }
    return out;
  }();
  return table;
}

std::optional<FamilyEntry> find_family_entry(const std::string& name) {
  std::string key;
  for (char c : name) key.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  for (const char* prefix : {"GIRAFFEDET-", "GIRAFFE-"})
    if (key.rfind(prefix, 0) == 0) key.erase(0, std::string(prefix).size());
  for (const auto& e : family_table())
    if (e.name == key) return e;
  return std::nullopt;
}

GfpnConfig instantiate(const FamilyEntry& entry, SkipMode skip_mode, FusionStyle fusion_style,
                       std::optional<int> width_override) {
  GfpnConfig cfg;
  cfg.depth = entry.derived_depth;
  cfg.width = width_override.value_or(entry.derived_width);
  if (cfg.width < 1) fail_validation("width override must be positive");
  cfg.skip_mode = skip_mode;
  cfg.cross_scale = CrossScale::kQueen;
  cfg.fusion_style = fusion_style;
  return cfg;
}

}  // namespace giraffe
