#include "support/fixtures.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace labelflux::testing {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string data_path(const std::string& name) { return std::string(LABELFLUX_DATA_DIR) + "/" + name; }

std::string branching_xml() { return read_file(data_path("branching.xml")); }

NetworkDocument branching() { return parse_network(branching_xml()); }

Eigen::VectorXd branching_balanced_fluxes() {
    Eigen::VectorXd v(6);
    v << 1, 1, 1, 1, 3, 3;
    return v;
}

Eigen::VectorXd branching_random_fluxes(std::mt19937_64& rng, double total) {
    std::uniform_real_distribution<double> u(0.1, 1.0);
    const double a = u(rng), b = u(rng), c = u(rng);
    const double s = a + b + c;
    Eigen::VectorXd v(6);
    v << total * a / s, total * b / s, total * c / s, total * b / s, 0.0, total;
    v[4] = v[0] + v[2] + v[3];
    return v;
}

std::vector<std::vector<LabelFraction>> fully_labeled_inputs(const NetworkDocument& doc) {
    std::vector<std::vector<LabelFraction>> out(doc.species.size());
    for (std::size_t s = 0; s < doc.species.size(); ++s) {
        const auto& sp = doc.species[s];
        if (sp.kind == SpeciesKind::input && sp.carbon_count > 0) {
            out[s].push_back({std::string(static_cast<std::size_t>(sp.carbon_count), '1'), 1.0});
        }
    }
    return out;
}

std::vector<std::vector<LabelFraction>> random_inputs(const NetworkDocument& doc, std::mt19937_64& rng) {
    std::vector<std::vector<LabelFraction>> out(doc.species.size());
    for (std::size_t s = 0; s < doc.species.size(); ++s) {
        const auto& sp = doc.species[s];
        if (sp.kind != SpeciesKind::input || sp.carbon_count == 0) continue;
        const std::size_t n = std::size_t{1} << sp.carbon_count;
        std::vector<double> w(n);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        double total = 0.0;
        for (double& x : w) total += (x = u(rng));
        for (std::size_t iso = 1; iso < n; ++iso) {
            std::string p = cumomer_pattern(static_cast<Mask>(iso), sp.carbon_count);
            for (char& c : p) c = c == 'x' ? '0' : c;
            out[s].push_back({p, w[iso] / total});
        }
    }
    return out;
}

CumomerState random_state(const CumomerBasis& basis, std::mt19937_64& rng, bool input) {
    CumomerState x = input ? basis.zero_input_state() : basis.zero_state();
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& block : x) {
        for (Eigen::Index i = 0; i < block.size(); ++i) block[i] = u(rng);
    }
    return x;
}

double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor) {
    const double scale = std::max({a.lpNorm<Eigen::Infinity>(), b.lpNorm<Eigen::Infinity>(), floor});
    return (a - b).lpNorm<Eigen::Infinity>() / scale;
}

}  // namespace labelflux::testing

namespace labelflux::testing {

std::vector<std::vector<LabelFraction>> document_labels(const NetworkDocument& doc) {
    std::vector<std::vector<LabelFraction>> out(doc.species.size());
    for (std::size_t s = 0; s < doc.species.size(); ++s) {
        if (doc.species[s].kind == SpeciesKind::input) out[s] = doc.species[s].label_input;
    }
    return out;
}

}  // namespace labelflux::testing

namespace labelflux::testing {

NetworkDocument scalar() { return parse_network(read_file(data_path("scalar.xml"))); }

}  // namespace labelflux::testing
