#include "labelflux/network.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "labelflux/error.hpp"
#include "labelflux/xml.hpp"

namespace labelflux {

std::string_view to_string(SpeciesKind kind) {
    switch (kind) {
        case SpeciesKind::intermediate: return "intermediate";
        case SpeciesKind::input: return "input";
        case SpeciesKind::output: return "output";
    }
    return "?";
}

std::optional<std::size_t> NetworkDocument::species_index(std::string_view id) const {
    for (std::size_t i = 0; i < species.size(); ++i) {
        if (species[i].id == id) return i;
    }
    return std::nullopt;
}

std::optional<std::size_t> NetworkDocument::flux_index(std::string_view name) const {
    for (std::size_t i = 0; i < fluxes.size(); ++i) {
        if (fluxes[i].name == name) return i;
    }
    return std::nullopt;
}

std::vector<std::string> NetworkDocument::flux_names() const {
    std::vector<std::string> names;
    names.reserve(fluxes.size());
    for (const auto& f : fluxes) names.push_back(f.name);
    return names;
}

int letter_position(const std::string& letters, std::size_t index) {
    return static_cast<int>(letters.size() - index);
}

DirectedReaction directed(const NetworkDocument& doc, std::size_t flux) {
    const FluxDef& f = doc.fluxes.at(flux);
    const ReactionDef& r = doc.reactions.at(f.reaction);
    if (!f.backward) return {r.reactant_refs, r.product_refs, r.atom_map};

    DirectedReaction d{r.product_refs, r.reactant_refs, {}};
    d.atom_map.resize(r.reactant_refs.size());
    for (std::size_t i = 0; i < r.reactant_refs.size(); ++i) {
        d.atom_map[i].resize(r.reactant_letters[i].size());
    }
    for (std::size_t p = 0; p < r.atom_map.size(); ++p) {
        for (std::size_t pos = 0; pos < r.atom_map[p].size(); ++pos) {
            const CarbonSource& src = r.atom_map[p][pos];
            d.atom_map[src.reactant][static_cast<std::size_t>(src.position - 1)] =
                CarbonSource{p, static_cast<int>(pos + 1)};
        }
    }
    return d;
}

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string strip_spaces(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (!std::isspace(static_cast<unsigned char>(c))) out += c;
    }
    return out;
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (;;) {
        auto pos = s.find(sep, start);
        parts.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return parts;
}

std::string upper(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

struct LabelNotes {
    std::vector<LabelFraction> input;
    std::vector<std::string> measurement;
};

LabelNotes parse_label_notes(const std::string& species, std::string_view text) {
    static constexpr std::string_view kInput = "LABEL_INPUT";
    static constexpr std::string_view kMeasurement = "LABEL_MEASUREMENT";
    const std::string up = upper(text);

    struct Hit {
        std::size_t pos;
        bool input;
    };
    std::vector<Hit> hits;
    for (auto p = up.find(kMeasurement); p != std::string::npos; p = up.find(kMeasurement, p + 1)) {
        hits.push_back({p, false});
    }
    for (auto p = up.find(kInput); p != std::string::npos; p = up.find(kInput, p + 1)) {
        hits.push_back({p, true});
    }
    std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.pos < b.pos; });

    LabelNotes notes;
    for (std::size_t h = 0; h < hits.size(); ++h) {
        std::size_t begin = hits[h].pos + (hits[h].input ? kInput.size() : kMeasurement.size());
        std::size_t end = h + 1 < hits.size() ? hits[h + 1].pos : text.size();
        for (const auto& raw : split(text.substr(begin, end - begin), ',')) {
            std::string item = strip_spaces(raw);
            if (item.empty()) continue;
            if (!hits[h].input) {
                notes.measurement.push_back(item);
                continue;
            }
            auto eq = item.find('=');
            if (eq == std::string::npos) {
                notes.input.push_back({item, std::nullopt});
                continue;
            }
            double value = 0.0;
            try {
                std::size_t used = 0;
                value = std::stod(item.substr(eq + 1), &used);
                if (used != item.size() - eq - 1) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw ParseError("species " + species + ": bad label fraction '" + item + "'");
            }
            notes.input.push_back({item.substr(0, eq), value});
        }
    }
    return notes;
}

void check_pattern(const SpeciesDef& s, const std::string& pattern, std::string_view what) {
    if (pattern.size() != static_cast<std::size_t>(s.carbon_count)) {
        throw ParseError("species " + s.id + ": pattern length mismatch for " + std::string(what) + " '" +
                         pattern + "' (species has " + std::to_string(s.carbon_count) + " carbons)");
    }
    for (char c : pattern) {
        if (c != '0' && c != '1' && c != 'x') {
            throw ParseError("species " + s.id + ": invalid character '" + std::string(1, c) + "' in pattern '" +
                             pattern + "'");
        }
    }
}

int parse_stoichiometry(const std::string& reaction, const std::optional<std::string>& attr) {
    if (!attr) return 1;
    double value = 0.0;
    try {
        value = std::stod(*attr);
    } catch (const std::exception&) {
        throw ParseError("reaction " + reaction + ": bad stoichiometry '" + *attr + "'");
    }
    if (value < 1.0 || std::abs(value - std::round(value)) > 1e-12) {
        throw ParseError("reaction " + reaction + ": stoichiometry must be a positive integer, got " + *attr);
    }
    return static_cast<int>(std::round(value));
}

struct Side {
    std::vector<SpeciesRef> refs;
};

Side parse_side(const NetworkDocument& doc, const std::string& reaction, const xml::Element* list) {
    Side side;
    if (list == nullptr) return side;
    std::vector<int> seen(doc.species.size(), 0);
    for (const xml::Element* ref : list->children_named("speciesReference")) {
        auto id = ref->attribute("species");
        if (!id) throw ParseError("reaction " + reaction + ": speciesReference without species attribute");
        auto idx = doc.species_index(*id);
        if (!idx) throw ParseError("reaction " + reaction + ": unknown species '" + *id + "'");
        int count = parse_stoichiometry(reaction, ref->attribute("stoichiometry"));
        for (int c = 0; c < count; ++c) {
            side.refs.push_back({*idx, ++seen[*idx]});
        }
    }
    return side;
}

void parse_atom_map(ReactionDef& r, const std::string& notes) {
    const std::size_t nr = r.reactant_refs.size();
    const std::size_t np = r.product_refs.size();
    r.reactant_letters.assign(nr, "");
    r.product_letters.assign(np, "");
    r.atom_map.assign(np, {});

    std::string text = trim(notes);
    if (text.empty()) return;
    auto arrow = text.find('>');
    if (arrow == std::string::npos || text.find('>', arrow + 1) != std::string::npos) {
        throw ParseError("reaction " + r.id + ": atom map '" + text + "' must have the form LETTERS > LETTERS[+LETTERS...]");
    }
    auto left = split(std::string_view(text).substr(0, arrow), '+');
    auto right = split(std::string_view(text).substr(arrow + 1), '+');
    if (left.size() != nr || right.size() != np) {
        throw ParseError("reaction " + r.id + ": atom map has " + std::to_string(left.size()) + " reactant and " +
                         std::to_string(right.size()) + " product groups, reaction has " + std::to_string(nr) +
                         " reactant and " + std::to_string(np) + " product occurrences");
    }
    for (std::size_t i = 0; i < nr; ++i) r.reactant_letters[i] = strip_spaces(left[i]);
    for (std::size_t i = 0; i < np; ++i) r.product_letters[i] = strip_spaces(right[i]);

    auto letters_of = [&](const std::vector<std::string>& groups, std::string_view side) {
        std::multiset<char> all;
        for (const auto& g : groups) all.insert(g.begin(), g.end());
        for (char c : all) {
            if (all.count(c) > 1) {
                throw ParseError("reaction " + r.id + ": letter '" + std::string(1, c) + "' repeated on " +
                                 std::string(side) + " side of atom map");
            }
        }
        return all;
    };
    if (letters_of(r.reactant_letters, "reactant") != letters_of(r.product_letters, "product")) {
        throw ParseError("reaction " + r.id + ": atom-map letters unbalanced between sides in '" + text + "'");
    }

    for (std::size_t p = 0; p < np; ++p) {
        const std::string& pl = r.product_letters[p];
        r.atom_map[p].resize(pl.size());
        for (std::size_t li = 0; li < pl.size(); ++li) {
            for (std::size_t q = 0; q < nr; ++q) {
                auto at = r.reactant_letters[q].find(pl[li]);
                if (at == std::string::npos) continue;
                r.atom_map[p][static_cast<std::size_t>(letter_position(pl, li) - 1)] =
                    CarbonSource{q, letter_position(r.reactant_letters[q], at)};
                break;
            }
        }
    }
}

bool has_atom_map(const ReactionDef& r) {
    auto nonempty = [](const std::string& s) { return !s.empty(); };
    return std::any_of(r.reactant_letters.begin(), r.reactant_letters.end(), nonempty) ||
           std::any_of(r.product_letters.begin(), r.product_letters.end(), nonempty);
}

}  // namespace

NetworkDocument parse_network(std::string_view xml_text) {
    xml::Element root = xml::parse(xml_text);
    if (xml::local_name(root.name) != "sbml") throw ParseError("root element must be <sbml>, got <" + root.name + ">");
    const xml::Element* model = root.child("model");
    if (model == nullptr) throw ParseError("missing <model> element");

    NetworkDocument doc;
    doc.model_id = model->attribute("id").value_or("");

    std::vector<LabelNotes> notes;
    if (const xml::Element* list = model->child("listOfSpecies")) {
        for (const xml::Element* sp : list->children_named("species")) {
            auto id = sp->attribute("id");
            if (!id || id->empty()) throw ParseError("species without id");
            if (doc.species_index(*id)) throw ParseError("duplicate species id '" + *id + "'");
            SpeciesDef s;
            s.id = *id;
            s.compartment = sp->attribute("compartment").value_or("");
            const xml::Element* n = sp->child("notes");
            LabelNotes ln = n ? parse_label_notes(s.id, n->all_text()) : LabelNotes{};
            s.label_input = ln.input;
            s.label_measurement = ln.measurement;
            doc.species.push_back(std::move(s));
        }
    }

    std::unordered_set<std::string> reaction_ids;
    if (const xml::Element* list = model->child("listOfReactions")) {
        for (const xml::Element* rx : list->children_named("reaction")) {
            auto id = rx->attribute("id");
            if (!id || id->empty()) throw ParseError("reaction without id");
            if (!reaction_ids.insert(*id).second) throw ParseError("duplicate reaction id '" + *id + "'");
            ReactionDef r;
            r.id = *id;
            auto rev = rx->attribute("reversible");
            r.reversible = !rev || *rev == "true" || *rev == "1";
            r.reactant_refs = parse_side(doc, r.id, rx->child("listOfReactants")).refs;
            r.product_refs = parse_side(doc, r.id, rx->child("listOfProducts")).refs;
            const xml::Element* n = rx->child("notes");
            parse_atom_map(r, n ? n->all_text() : std::string());
            doc.reactions.push_back(std::move(r));
        }
    }

    for (std::size_t i = 0; i < doc.reactions.size(); ++i) {
        const ReactionDef& r = doc.reactions[i];
        if (r.reversible) {
            doc.fluxes.push_back({r.id + "_f", i, false});
            doc.fluxes.push_back({r.id + "_b", i, true});
        } else {
            doc.fluxes.push_back({r.id, i, false});
        }
    }
    {
        std::unordered_set<std::string> names;
        for (const auto& f : doc.fluxes) {
            if (!names.insert(f.name).second) throw ParseError("duplicate flux name '" + f.name + "'");
        }
    }

    // Carbon counts come from the first atom-mapped occurrence of each species.
    std::vector<bool> counted(doc.species.size(), false);
    for (const ReactionDef& r : doc.reactions) {
        if (!has_atom_map(r)) continue;
        for (std::size_t i = 0; i < r.reactant_refs.size(); ++i) {
            auto s = r.reactant_refs[i].species;
            if (!counted[s]) {
                doc.species[s].carbon_count = static_cast<int>(r.reactant_letters[i].size());
                counted[s] = true;
            }
        }
        for (std::size_t i = 0; i < r.product_refs.size(); ++i) {
            auto s = r.product_refs[i].species;
            if (!counted[s]) {
                doc.species[s].carbon_count = static_cast<int>(r.product_letters[i].size());
                counted[s] = true;
            }
        }
    }

    std::vector<bool> consumed(doc.species.size(), false), produced(doc.species.size(), false);
    for (std::size_t f = 0; f < doc.fluxes.size(); ++f) {
        DirectedReaction d = directed(doc, f);
        for (const auto& ref : d.reactants) consumed[ref.species] = true;
        for (const auto& ref : d.products) produced[ref.species] = true;
    }
    for (std::size_t s = 0; s < doc.species.size(); ++s) {
        SpeciesDef& sp = doc.species[s];
        if (consumed[s] && !produced[s]) {
            sp.kind = SpeciesKind::input;
        } else if (produced[s] && !consumed[s] && sp.label_measurement.empty()) {
            sp.kind = SpeciesKind::output;
        } else {
            sp.kind = SpeciesKind::intermediate;
        }
        if (sp.carbon_count > 30) throw ParseError("species " + sp.id + ": more than 30 carbons is not supported");
        double total = 0.0;
        for (const auto& lf : sp.label_input) {
            check_pattern(sp, lf.pattern, "LABEL_INPUT");
            if (lf.fraction) {
                if (*lf.fraction < 0.0 || *lf.fraction > 1.0) {
                    throw ParseError("species " + sp.id + ": label fraction outside [0,1] for '" + lf.pattern + "'");
                }
                total += *lf.fraction;
            }
        }
        if (total > 1.0 + 1e-12) throw ParseError("species " + sp.id + ": LABEL_INPUT fractions sum to more than 1");
        for (const auto& p : sp.label_measurement) check_pattern(sp, p, "LABEL_MEASUREMENT");
    }
    return doc;
}

NetworkDocument load_network(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open network file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_network(ss.str());
}

std::vector<std::string> ValidationReport::lines() const {
    std::vector<std::string> out;
    for (const auto& s : dangling) out.push_back("dangling species: " + s);
    for (const auto& s : zero_outflow) out.push_back("zero outflow: " + s);
    for (const auto& s : carbon_mismatch) out.push_back("carbon-count inconsistency: " + s);
    for (const auto& s : warnings) out.push_back("warning: " + s);
    return out;
}

ValidationReport validate_network(const NetworkDocument& doc) {
    ValidationReport report;
    const std::size_t ns = doc.species.size();
    std::vector<bool> used(ns, false), consumed(ns, false);
    for (std::size_t f = 0; f < doc.fluxes.size(); ++f) {
        DirectedReaction d = directed(doc, f);
        for (const auto& ref : d.reactants) used[ref.species] = consumed[ref.species] = true;
        for (const auto& ref : d.products) used[ref.species] = true;
    }
    for (std::size_t s = 0; s < ns; ++s) {
        const SpeciesDef& sp = doc.species[s];
        if (!used[s]) {
            report.dangling.push_back(sp.id);
            continue;
        }
        if (sp.kind == SpeciesKind::intermediate && !consumed[s]) report.zero_outflow.push_back(sp.id);
        if (sp.kind == SpeciesKind::input && sp.label_input.empty() && sp.carbon_count > 0) {
            report.warnings.push_back("input species " + sp.id + " has no LABEL_INPUT (treated as unlabeled)");
        }
        if (sp.kind != SpeciesKind::input && !sp.label_input.empty()) {
            report.warnings.push_back("LABEL_INPUT on non-input species " + sp.id + " is ignored");
        }
        if (sp.kind == SpeciesKind::input && !sp.label_measurement.empty()) {
            report.warnings.push_back("LABEL_MEASUREMENT on input species " + sp.id + " cannot be observed");
        }
    }
    for (const ReactionDef& r : doc.reactions) {
        if (!has_atom_map(r)) {
            for (const auto* refs : {&r.reactant_refs, &r.product_refs}) {
                for (const auto& ref : *refs) {
                    if (doc.species[ref.species].carbon_count > 0) {
                        report.carbon_mismatch.push_back(r.id + ": no atom map but species " +
                                                         doc.species[ref.species].id + " has carbons");
                    }
                }
            }
            continue;
        }
        auto check = [&](const std::vector<SpeciesRef>& refs, const std::vector<std::string>& letters) {
            for (std::size_t i = 0; i < refs.size(); ++i) {
                const SpeciesDef& sp = doc.species[refs[i].species];
                if (static_cast<int>(letters[i].size()) != sp.carbon_count) {
                    report.carbon_mismatch.push_back(r.id + ": species " + sp.id + " has " +
                                                     std::to_string(letters[i].size()) + " letters, expected " +
                                                     std::to_string(sp.carbon_count));
                }
            }
        };
        check(r.reactant_refs, r.reactant_letters);
        check(r.product_refs, r.product_letters);
    }
    return report;
}

}  // namespace labelflux
