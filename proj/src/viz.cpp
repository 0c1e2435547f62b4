#include "samselect/viz.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <set>

#include "samselect/error.hpp"

namespace samselect {

VizKind kind_of(const VizSpec& spec) { return static_cast<VizKind>(spec.index()); }

std::string_view kind_name(VizKind kind) {
  switch (kind) {
    case VizKind::bc:
      return "BC";
    case VizKind::ndi:
      return "NDI";
    case VizKind::ssi:
      return "SSI";
    case VizKind::sic:
      return "SIC";
    case VizKind::pca:
      return "PCA";
  }
  return "?";
}

VizKind parse_kind(std::string_view text) {
  const std::string t = to_upper(text);
  for (VizKind k : {VizKind::bc, VizKind::ndi, VizKind::ssi, VizKind::sic, VizKind::pca})
    if (kind_name(k) == t) return k;
  throw ConfigError("unknown visualization mode '" + std::string(text) + "'");
}

SpectralCatalog SpectralCatalog::from(const MultibandImage& image) {
  return {image.band_ids, image.wavelengths_nm};
}

SpectralCatalog SpectralCatalog::from(const WavelengthTable& table) {
  SpectralCatalog cat;
  for (const auto& id : table.ids_by_wavelength()) {
    cat.band_ids.push_back(id);
    cat.wavelengths_nm.push_back(table.at(id));
  }
  return cat;
}

std::optional<std::size_t> SpectralCatalog::find(std::string_view band_id) const {
  const std::string key = to_upper(band_id);
  for (std::size_t i = 0; i < band_ids.size(); ++i)
    if (to_upper(band_ids[i]) == key) return i;
  return std::nullopt;
}

double SpectralCatalog::wavelength(std::string_view band_id) const {
  if (auto i = find(band_id)) return wavelengths_nm[*i];
  throw ConfigError("unknown band " + std::string(band_id));
}

std::vector<std::string> SpectralCatalog::by_wavelength() const {
  std::vector<std::size_t> order(band_ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return wavelengths_nm[a] < wavelengths_nm[b]; });
  std::vector<std::string> ids;
  for (auto i : order) ids.push_back(to_upper(band_ids[i]));
  return ids;
}

std::string format_index_expr(const IndexSpec& spec) {
  if (const auto* n = std::get_if<NormalizedDifference>(&spec))
    return "NDI(" + to_upper(n->b1) + "," + to_upper(n->b2) + ")";
  const auto& s = std::get<SpectralShape>(spec);
  return "SSI(" + to_upper(s.minus) + "," + to_upper(s.center) + "," + to_upper(s.plus) + ")";
}

std::string format_viz_expr(const VizSpec& spec) {
  struct Formatter {
    std::string operator()(const BandComposite& bc) const {
      return "BC(" + to_upper(bc.bands[0]) + "," + to_upper(bc.bands[1]) + "," +
             to_upper(bc.bands[2]) + ")";
    }
    std::string operator()(const NormalizedDifference& n) const { return format_index_expr(n); }
    std::string operator()(const SpectralShape& s) const { return format_index_expr(s); }
    std::string operator()(const IndexComposite& sic) const {
      return "SIC(" + format_index_expr(sic.channels[0]) + "," +
             format_index_expr(sic.channels[1]) + "," + format_index_expr(sic.channels[2]) + ")";
    }
    std::string operator()(const PrincipalComponents& pca) const {
      return "PCA(" + std::to_string(pca.components[0]) + "," +
             std::to_string(pca.components[1]) + "," + std::to_string(pca.components[2]) + ")";
    }
  };
  return std::visit(Formatter{}, spec);
}

namespace {

void require_band(const SpectralCatalog& catalog, const std::string& id) {
  if (!catalog.find(id)) throw ConfigError("unknown band " + id);
}

void validate_index(const IndexSpec& spec, const SpectralCatalog& catalog) {
  if (const auto* n = std::get_if<NormalizedDifference>(&spec)) {
    require_band(catalog, n->b1);
    require_band(catalog, n->b2);
    if (to_upper(n->b1) == to_upper(n->b2))
      throw ConfigError("NDI needs two distinct bands, got " + n->b1 + " twice");
    return;
  }
  const auto& s = std::get<SpectralShape>(spec);
  require_band(catalog, s.minus);
  require_band(catalog, s.center);
  require_band(catalog, s.plus);
  const double lm = catalog.wavelength(s.minus);
  const double lc = catalog.wavelength(s.center);
  const double lp = catalog.wavelength(s.plus);
  if (!(lm < lc && lc < lp))
    throw ConfigError("wavelength ordering violated in " + format_index_expr(s) + ": need " +
                      std::to_string(lm) + " < " + std::to_string(lc) + " < " +
                      std::to_string(lp) + " nm");
}

class Parser {
 public:
  Parser(std::string_view text, const SpectralCatalog& catalog)
      : text_(text), catalog_(catalog) {}

  VizSpec parse_viz() {
    const std::size_t start = skip_ws();
    const std::string kw = keyword();
    VizSpec spec;
    if (kw == "BC") {
      expect('(');
      BandComposite bc;
      bc.bands[0] = band();
      expect(',');
      bc.bands[1] = band();
      expect(',');
      bc.bands[2] = band();
      expect(')');
      spec = bc;
    } else if (kw == "NDI" || kw == "SSI") {
      pos_ = start;
      spec = std::visit([](auto&& v) -> VizSpec { return v; }, parse_index());
    } else if (kw == "SIC") {
      expect('(');
      IndexComposite sic{{parse_index(), NormalizedDifference{}, NormalizedDifference{}}};
      expect(',');
      sic.channels[1] = parse_index();
      expect(',');
      sic.channels[2] = parse_index();
      expect(')');
      spec = sic;
    } else if (kw == "PCA") {
      expect('(');
      PrincipalComponents pca;
      pca.components[0] = integer();
      expect(',');
      pca.components[1] = integer();
      expect(',');
      pca.components[2] = integer();
      expect(')');
      spec = pca;
    } else {
      throw ParseError("expected BC, NDI, SSI, SIC or PCA", start);
    }
    finish();
    try {
      validate_viz(spec, catalog_);
    } catch (const ParseError&) {
      throw;
    } catch (const ConfigError& e) {
      throw ParseError(e.what(), start);
    }
    return spec;
  }

  IndexSpec parse_index_only() {
    IndexSpec spec = parse_index();
    finish();
    return spec;
  }

 private:
  IndexSpec parse_index() {
    const std::size_t start = skip_ws();
    const std::string kw = keyword();
    IndexSpec spec;
    if (kw == "NDI") {
      expect('(');
      NormalizedDifference n;
      n.b1 = band();
      expect(',');
      n.b2 = band();
      expect(')');
      spec = n;
    } else if (kw == "SSI") {
      expect('(');
      SpectralShape s;
      s.minus = band();
      expect(',');
      s.center = band();
      expect(',');
      s.plus = band();
      expect(')');
      spec = s;
    } else {
      throw ParseError("expected NDI or SSI", start);
    }
    try {
      validate_index(spec, catalog_);
    } catch (const ConfigError& e) {
      throw ParseError(e.what(), start);
    }
    return spec;
  }

  std::size_t skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    return pos_;
  }

  std::string keyword() {
    skip_ws();
    std::string out;
    while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_])))
      out += static_cast<char>(std::toupper(static_cast<unsigned char>(text_[pos_++])));
    return out;
  }

  void expect(char ch) {
    skip_ws();
    if (pos_ >= text_.size())
      throw ParseError(std::string("expected '") + ch + "' but input ended", pos_);
    if (text_[pos_] != ch)
      throw ParseError(std::string("expected '") + ch + "', found '" + text_[pos_] + "'", pos_);
    ++pos_;
  }

  std::string band() {
    const std::size_t start = skip_ws();
    std::string tok;
    while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_])))
      tok += text_[pos_++];
    if (tok.empty()) {
      if (pos_ >= text_.size()) throw ParseError("expected a band id but input ended", pos_);
      throw ParseError(std::string("expected a band id, found '") + text_[pos_] + "'", pos_);
    }
    const auto idx = catalog_.find(tok);
    if (!idx) throw ParseError("unknown band token '" + tok + "'", start);
    return to_upper(catalog_.band_ids[*idx]);
  }

  int integer() {
    const std::size_t start = skip_ws();
    std::string tok;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
      tok += text_[pos_++];
    if (tok.empty() || tok.size() > 6) throw ParseError("expected a component number", start);
    return std::stoi(tok);
  }

  void finish() {
    skip_ws();
    if (pos_ != text_.size())
      throw ParseError(std::string("unexpected trailing '") + text_[pos_] + "'", pos_);
  }

  std::string_view text_;
  const SpectralCatalog& catalog_;
  std::size_t pos_ = 0;
};

}  // namespace

VizSpec parse_viz_expr(std::string_view text, const SpectralCatalog& catalog) {
  return Parser(text, catalog).parse_viz();
}

IndexSpec parse_index_expr(std::string_view text, const SpectralCatalog& catalog) {
  return Parser(text, catalog).parse_index_only();
}

void validate_viz(const VizSpec& spec, const SpectralCatalog& catalog) {
  if (const auto* bc = std::get_if<BandComposite>(&spec)) {
    std::set<std::string> seen;
    for (const auto& b : bc->bands) {
      require_band(catalog, b);
      if (!seen.insert(to_upper(b)).second)
        throw ConfigError("band composite repeats band " + b);
    }
  } else if (const auto* sic = std::get_if<IndexComposite>(&spec)) {
    std::set<std::string> seen;
    for (const auto& ch : sic->channels) {
      validate_index(ch, catalog);
      if (!seen.insert(format_index_expr(ch)).second)
        throw ConfigError("index composite repeats " + format_index_expr(ch));
    }
  } else if (const auto* pca = std::get_if<PrincipalComponents>(&spec)) {
    std::set<int> seen;
    for (int c : pca->components) {
      if (c < 1 || static_cast<std::size_t>(c) > catalog.size())
        throw ConfigError("principal component " + std::to_string(c) + " out of range 1.." +
                          std::to_string(catalog.size()));
      if (!seen.insert(c).second) throw ConfigError("principal components must be distinct");
    }
  } else if (const auto* n = std::get_if<NormalizedDifference>(&spec)) {
    validate_index(*n, catalog);
  } else {
    validate_index(std::get<SpectralShape>(spec), catalog);
  }
}

std::size_t binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  std::size_t r = 1;
  for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

std::vector<VizSpec> enumerate_search_space(const SpectralCatalog& catalog, VizKind mode,
                                            std::span<const IndexSpec> top_indices) {
  const auto ids = catalog.by_wavelength();
  const std::size_t n = ids.size();
  std::vector<VizSpec> out;
  switch (mode) {
    case VizKind::bc:
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
          for (std::size_t k = j + 1; k < n; ++k)
            out.emplace_back(BandComposite{{ids[k], ids[j], ids[i]}});
      break;
    case VizKind::ndi:
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
          out.emplace_back(NormalizedDifference{ids[i], ids[j]});
      break;
    case VizKind::ssi:
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
          for (std::size_t k = j + 1; k < n; ++k)
            out.emplace_back(SpectralShape{ids[i], ids[j], ids[k]});
      break;
    case VizKind::sic: {
      if (top_indices.size() < 3)
        throw ConfigError("SIC enumeration needs ranked stage-1 indices (got " +
                          std::to_string(top_indices.size()) + ")");
      const std::size_t m = top_indices.size();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j)
          for (std::size_t k = j + 1; k < m; ++k)
            out.emplace_back(IndexComposite{{top_indices[i], top_indices[j], top_indices[k]}});
      break;
    }
    case VizKind::pca:
      out.emplace_back(PrincipalComponents{});
      break;
  }
  return out;
}

}  // namespace samselect
