#include "labelflux/annotate.hpp"

#include <set>
#include <sstream>

#include "labelflux/xml.hpp"

namespace labelflux {

namespace {

void write_cumomer(std::ostream& out, const std::string& indent, const NetworkDocument& doc, const CumomerIndex& c,
                   bool with_position) {
    const SpeciesDef& sp = doc.species[c.species];
    out << indent << "<smtb:cumomer id=\"" << xml::escape(cumomer_id(sp.id, c.mask)) << "\" species=\""
        << xml::escape(sp.id) << "\" weight=\"" << c.weight << "\" pattern=\"" << cumomer_pattern(c.mask, sp.carbon_count)
        << '"';
    if (with_position) out << " position=\"" << c.position << '"';
    out << ">\n";
    for (int pos = 1; pos <= sp.carbon_count; ++pos) {
        if (c.mask & (Mask{1} << (pos - 1))) out << indent << "  <smtb:carbon position=\"" << pos << "\"/>\n";
    }
    out << indent << "</smtb:cumomer>\n";
}

void write_notes(std::ostream& out, const std::string& indent, const std::string& body) {
    out << indent << "<notes>\n"
        << indent << "  <html xmlns=\"http://www.w3.org/1999/xhtml\">\n"
        << indent << "    <body> " << xml::escape(body) << " </body>\n"
        << indent << "  </html>\n"
        << indent << "</notes>\n";
}

std::string join(const std::vector<std::string>& items, const char* sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += sep;
        out += items[i];
    }
    return out;
}

std::string label_notes(const SpeciesDef& sp) {
    std::vector<std::string> parts;
    if (!sp.label_input.empty()) {
        std::vector<std::string> items;
        for (const auto& lf : sp.label_input) {
            std::ostringstream item;
            item.precision(17);
            item << lf.pattern;
            if (lf.fraction) item << '=' << *lf.fraction;
            items.push_back(item.str());
        }
        parts.push_back("LABEL_INPUT " + join(items, ","));
    }
    if (!sp.label_measurement.empty()) parts.push_back("LABEL_MEASUREMENT " + join(sp.label_measurement, ","));
    return join(parts, " ");
}

// Occurrence number of refs[i] among same-species references on its side.
int occurrence(const std::vector<SpeciesRef>& refs, std::size_t i) { return refs[i].occurrence; }

}  // namespace

std::string annotate_network(const NetworkDocument& doc, const CumomerBasis& basis) {
    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<sbml level=\"2\" version=\"1\" xmlns=\"http://www.sbml.org/sbml/level2\" xmlns:smtb=\"" << kSmtbNamespace
        << "\">\n"
        << "  <model id=\"" << xml::escape(doc.model_id) << "\">\n";

    std::set<std::string> compartments;
    for (const auto& sp : doc.species) {
        if (!sp.compartment.empty()) compartments.insert(sp.compartment);
    }
    if (!compartments.empty()) {
        out << "    <listOfCompartments>\n";
        for (const auto& c : compartments) out << "      <compartment id=\"" << xml::escape(c) << "\"/>\n";
        out << "    </listOfCompartments>\n";
    }

    out << "    <listOfSpecies>\n";
    for (std::size_t s = 0; s < doc.species.size(); ++s) {
        const SpeciesDef& sp = doc.species[s];
        out << "      <species";
        if (!sp.compartment.empty()) out << " compartment=\"" << xml::escape(sp.compartment) << '"';
        out << " id=\"" << xml::escape(sp.id) << "\" name=\"" << xml::escape(sp.id) << "\" type=\"" << to_string(sp.kind)
            << "\" carbons=\"" << sp.carbon_count << "\">\n";
        std::string notes = label_notes(sp);
        if (!notes.empty()) write_notes(out, "        ", notes);
        if (sp.kind == SpeciesKind::intermediate) {
            for (Mask m = 1; m < (Mask{1} << sp.carbon_count); ++m) {
                write_cumomer(out, "        ", doc, *basis.find(s, m), false);
            }
        }
        out << "      </species>\n";
    }
    out << "    </listOfSpecies>\n";

    out << "    <listOfReactions>\n";
    for (std::size_t ri = 0; ri < doc.reactions.size(); ++ri) {
        const ReactionDef& r = doc.reactions[ri];
        out << "      <reaction position=\"" << ri + 1 << "\" id=\"" << xml::escape(r.id) << "\" name=\""
            << xml::escape(r.id) << "\" reversible=\"" << (r.reversible ? "true" : "false") << "\">\n";
        bool mapped = false;
        for (const auto& l : r.reactant_letters) mapped = mapped || !l.empty();
        for (const auto& l : r.product_letters) mapped = mapped || !l.empty();
        if (mapped) write_notes(out, "        ", join(r.reactant_letters, "+") + " > " + join(r.product_letters, "+"));

        out << "        <listOfReactants>\n";
        for (std::size_t i = 0; i < r.reactant_refs.size(); ++i) {
            const std::string& letters = r.reactant_letters[i];
            out << "          <speciesReference species=\"" << xml::escape(doc.species[r.reactant_refs[i].species].id)
                << '"' << (letters.empty() ? "/>\n" : ">\n");
            if (letters.empty()) continue;
            for (std::size_t li = 0; li < letters.size(); ++li) {
                const int pos = letter_position(letters, li);
                for (std::size_t p = 0; p < r.atom_map.size(); ++p) {
                    for (std::size_t pp = 0; pp < r.atom_map[p].size(); ++pp) {
                        const CarbonSource& src = r.atom_map[p][pp];
                        if (src.reactant != i || src.position != pos) continue;
                        out << "            <smtb:carbon position=\"" << pos << "\" destination=\"" << pp + 1
                            << "\" occurence=\"" << occurrence(r.product_refs, p) << "\" species=\""
                            << xml::escape(doc.species[r.product_refs[p].species].id) << "\"/>\n";
                    }
                }
            }
            out << "          </speciesReference>\n";
        }
        out << "        </listOfReactants>\n";

        out << "        <listOfProducts>\n";
        for (std::size_t p = 0; p < r.product_refs.size(); ++p) {
            const std::string& letters = r.product_letters[p];
            out << "          <speciesReference species=\"" << xml::escape(doc.species[r.product_refs[p].species].id)
                << '"' << (letters.empty() ? "/>\n" : ">\n");
            if (letters.empty()) continue;
            for (std::size_t li = 0; li < letters.size(); ++li) {
                const int pos = letter_position(letters, li);
                const CarbonSource& src = r.atom_map[p][static_cast<std::size_t>(pos - 1)];
                out << "            <smtb:carbon position=\"" << pos << "\" destination=\"" << src.position
                    << "\" occurence=\"" << occurrence(r.reactant_refs, src.reactant) << "\" species=\""
                    << xml::escape(doc.species[r.reactant_refs[src.reactant].species].id) << "\"/>\n";
            }
            out << "          </speciesReference>\n";
        }
        out << "        </listOfProducts>\n";
        out << "      </reaction>\n";
    }
    out << "    </listOfReactions>\n";

    auto global_list = [&](const char* element, bool input) {
        out << "    <smtb:" << element << " xmlns:smtb=\"" << kSmtbNamespace << "\">\n";
        for (int k = 1; k <= basis.max_weight(); ++k) {
            const auto& cls = input ? basis.inputs(k) : basis.intermediates(k);
            if (cls.empty()) continue;
            out << "      <smtb:listOfCumomers weight=\"" << k << "\">\n";
            for (const auto& c : cls) write_cumomer(out, "        ", doc, c, true);
            out << "      </smtb:listOfCumomers>\n";
        }
        out << "    </smtb:" << element << ">\n";
    };
    global_list("listOfIntermediateCumomers", false);
    global_list("listOfInputCumomers", true);

    out << "  </model>\n</sbml>\n";
    return out.str();
}

}  // namespace labelflux
