#pragma once

#include <array>
#include <compare>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "samselect/raster_io.hpp"

namespace samselect {

// Raw bands assigned to red, green and blue in that order.
struct BandComposite {
  std::array<std::string, 3> bands;
  friend auto operator<=>(const BandComposite&, const BandComposite&) = default;
};

// (b1 - b2) / (b1 + b2).
struct NormalizedDifference {
  std::string b1;
  std::string b2;
  friend auto operator<=>(const NormalizedDifference&, const NormalizedDifference&) = default;
};

// Center band minus the value linearly interpolated between the flanking
// bands at the center wavelength.
struct SpectralShape {
  std::string minus;
  std::string center;
  std::string plus;
  friend auto operator<=>(const SpectralShape&, const SpectralShape&) = default;
};

using IndexSpec = std::variant<NormalizedDifference, SpectralShape>;

// Three index images as red, green, blue.
struct IndexComposite {
  std::array<IndexSpec, 3> channels;
  friend bool operator==(const IndexComposite&, const IndexComposite&) = default;
};

// Principal-component scores as red, green, blue (1-based component ranks).
struct PrincipalComponents {
  std::array<int, 3> components{1, 2, 3};
  friend auto operator<=>(const PrincipalComponents&, const PrincipalComponents&) = default;
};

using VizSpec =
    std::variant<BandComposite, NormalizedDifference, SpectralShape, IndexComposite,
                 PrincipalComponents>;

enum class VizKind { bc, ndi, ssi, sic, pca };

VizKind kind_of(const VizSpec& spec);
std::string_view kind_name(VizKind kind);  // "BC", "NDI", ...
// Accepts any case ("ndi", "NDI"). Throws ConfigError.
VizKind parse_kind(std::string_view text);

// Band ids and wavelengths a spec is checked against.
struct SpectralCatalog {
  std::vector<std::string> band_ids;
  std::vector<double> wavelengths_nm;

  static SpectralCatalog from(const MultibandImage& image);
  static SpectralCatalog from(const WavelengthTable& table);

  std::optional<std::size_t> find(std::string_view band_id) const;
  double wavelength(std::string_view band_id) const;
  std::size_t size() const noexcept { return band_ids.size(); }
  // Band ids sorted by ascending wavelength.
  std::vector<std::string> by_wavelength() const;
};

// Canonical expression: uppercase band ids, no whitespace, e.g.
// "SIC(NDI(B2,B8),SSI(B1,B8,B11),SSI(B2,B8,B11))".
std::string format_viz_expr(const VizSpec& spec);
std::string format_index_expr(const IndexSpec& spec);

// Grammar: BC(b,b,b) | NDI(b,b) | SSI(b,b,b) | SIC(idx,idx,idx) | PCA(n,n,n),
// idx := NDI(b,b) | SSI(b,b,b). Whitespace-insensitive, case-insensitive
// keywords and band ids. Throws ParseError on syntax errors and ConfigError
// on unknown bands or invalid combinations.
VizSpec parse_viz_expr(std::string_view text, const SpectralCatalog& catalog);
IndexSpec parse_index_expr(std::string_view text, const SpectralCatalog& catalog);

// Throws ConfigError when the spec is not renderable from the catalog's bands.
void validate_viz(const VizSpec& spec, const SpectralCatalog& catalog);

// BC: C(n,3) triples, red = longest wavelength. NDI: C(n,2) pairs, b1 =
// shorter wavelength. SSI: C(n,3) wavelength-ordered triples. SIC: C(m,3)
// triples of `top_indices` (ranked best first), red = best ranked.
// Output follows lexicographic order of the index combinations.
std::vector<VizSpec> enumerate_search_space(const SpectralCatalog& catalog, VizKind mode,
                                            std::span<const IndexSpec> top_indices = {});

std::size_t binomial(std::size_t n, std::size_t k);

}  // namespace samselect
