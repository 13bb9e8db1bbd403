#include "cpsim/risk.hpp"

#include <array>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace cpsim {

std::string_view to_string(Rating r) {
    switch (r) {
        case Rating::Low: return "Low";
        case Rating::Medium: return "Medium";
        case Rating::High: return "High";
    }
    return "?";
}

std::optional<Rating> rating_from_string(std::string_view s) {
    for (auto r : {Rating::Low, Rating::Medium, Rating::High})
        if (to_string(r) == s) return r;
    return std::nullopt;
}

Rating overall_risk(const CriteriaTriple& t) {
    const Rating a = t.reproducibility, b = t.impact, c = t.stealthiness;
    if (a == b || a == c) return a;
    if (b == c) return b;
    return Rating::Medium;
}

void Tally::add(Rating r) {
    switch (r) {
        case Rating::High: ++high; break;
        case Rating::Medium: ++medium; break;
        case Rating::Low: ++low; break;
    }
}

std::vector<std::string> CatalogReport::mismatches() const {
    std::vector<std::string> out;
    for (const auto& r : rows)
        if (!r.match) out.push_back(r.row.row_ref);
    return out;
}

CatalogReport evaluate_catalog(std::span<const CatalogRow> rows) {
    CatalogReport rep;
    std::set<std::string> seen;
    for (const auto& row : rows) {
        if (!seen.insert(row.row_ref).second) throw CatalogError("duplicate row_ref " + row.row_ref);
        RowResult rr{row, overall_risk(row.triple), false};
        rr.match = rr.computed == row.published_overall;
        rep.computed.add(rr.computed);
        rep.published.add(row.published_overall);
        rep.rows.push_back(std::move(rr));
    }
    return rep;
}

std::span<const std::string_view> published_row_refs() {
    static constexpr std::array<std::string_view, 16> refs = {
        "III-A", "III-B", "III-C", "III-D", "III-E", "III-F", "III-G", "III-H",
        "III-I", "III-K", "III-L", "III-M", "III-N", "IV-A",  "IV-B",  "IV-C",
    };
    return refs;
}

namespace {

Rating rating_field(const nlohmann::json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j[key].is_string()) throw CatalogError(where + ": missing " + key);
    auto r = rating_from_string(j[key].get<std::string>());
    if (!r) throw CatalogError(where + ": bad rating for " + key);
    return *r;
}

Tally tally_field(const nlohmann::json& j) {
    Tally t;
    try {
        t.high = j.at("high").get<int>();
        t.medium = j.at("medium").get<int>();
        t.low = j.at("low").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw CatalogError(std::string("claimed_tally: ") + e.what());
    }
    return t;
}

}  // namespace

Catalog parse_catalog(const nlohmann::json& j) {
    Catalog c;
    if (!j.is_object() || !j.contains("rows") || !j["rows"].is_array()) throw CatalogError("catalog needs a rows array");
    for (const auto& r : j["rows"]) {
        if (!r.is_object() || !r.contains("row_ref") || !r["row_ref"].is_string())
            throw CatalogError("row without row_ref");
        CatalogRow row;
        row.row_ref = r["row_ref"].get<std::string>();
        row.attack_id = r.value("attack_id", "");
        row.triple = {rating_field(r, "reproducibility", row.row_ref), rating_field(r, "impact", row.row_ref),
                      rating_field(r, "stealthiness", row.row_ref)};
        row.published_overall = rating_field(r, "published_overall", row.row_ref);
        c.rows.push_back(std::move(row));
    }
    if (j.contains("claimed_tally")) c.claimed = tally_field(j["claimed_tally"]);
    return c;
}

Catalog load_catalog(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CatalogError("cannot open " + path);
    try {
        return parse_catalog(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw CatalogError(path + ": " + e.what());
    }
}

namespace {

std::string tally_line(const char* label, const Tally& t) {
    std::ostringstream os;
    os << std::left << std::setw(22) << label << "High " << t.high << "  Medium " << t.medium << "  Low " << t.low;
    return os.str();
}

}  // namespace

std::string render_report(const CatalogReport& report) {
    std::ostringstream os;
    os << std::left << std::setw(7) << "row" << std::setw(11) << "attack" << std::setw(8) << "R" << std::setw(8)
       << "I" << std::setw(8) << "S" << std::setw(11) << "computed" << std::setw(11) << "published"
       << "status\n";
    for (const auto& r : report.rows) {
        const auto& t = r.row.triple;
        os << std::setw(7) << r.row.row_ref << std::setw(11) << r.row.attack_id << std::setw(8)
           << to_string(t.reproducibility) << std::setw(8) << to_string(t.impact) << std::setw(8)
           << to_string(t.stealthiness) << std::setw(11) << to_string(r.computed) << std::setw(11)
           << to_string(r.row.published_overall) << (r.match ? "match" : "MISMATCH") << "\n";
    }
    os << tally_line("computed tally:", report.computed) << "\n";
    os << tally_line("published column:", report.published) << "\n";
    if (report.claimed) os << tally_line("claimed in text:", *report.claimed) << "\n";
    const auto mm = report.mismatches();
    os << "mismatches: " << mm.size();
    for (const auto& m : mm) os << " " << m;
    os << "\n";
    return os.str();
}

}  // namespace cpsim
