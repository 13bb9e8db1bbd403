#pragma once

// Threat rating algebra: majority over (reproducibility, impact,
// stealthiness), Medium when all three differ.

#include <json.hpp>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpsim {

enum class Rating : std::uint8_t { Low = 0, Medium = 1, High = 2 };

std::string_view to_string(Rating);
std::optional<Rating> rating_from_string(std::string_view);

struct CriteriaTriple {
    Rating reproducibility = Rating::Low;
    Rating impact = Rating::Low;
    Rating stealthiness = Rating::Low;

    friend bool operator==(const CriteriaTriple&, const CriteriaTriple&) = default;
};

Rating overall_risk(const CriteriaTriple& t);

struct CatalogRow {
    std::string row_ref;  // "III-A"
    std::string attack_id;
    CriteriaTriple triple;
    Rating published_overall = Rating::Low;
};

struct Tally {
    int high = 0;
    int medium = 0;
    int low = 0;

    void add(Rating r);
    friend bool operator==(const Tally&, const Tally&) = default;
};

struct RowResult {
    CatalogRow row;
    Rating computed = Rating::Low;
    bool match = true;
};

struct CatalogReport {
    std::vector<RowResult> rows;
    Tally computed;
    Tally published;
    std::optional<Tally> claimed;  // tally stated in prose, when the catalog carries one

    std::vector<std::string> mismatches() const;
};

class CatalogError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Throws CatalogError on duplicate row references.
CatalogReport evaluate_catalog(std::span<const CatalogRow> rows);

/// The sixteen row references of the threat tables (no III-J).
std::span<const std::string_view> published_row_refs();

struct Catalog {
    std::vector<CatalogRow> rows;
    std::optional<Tally> claimed;
};

Catalog parse_catalog(const nlohmann::json& j);
Catalog load_catalog(const std::string& path);

std::string render_report(const CatalogReport& report);

}  // namespace cpsim
