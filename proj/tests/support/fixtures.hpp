#pragma once

#include <Eigen/Core>
#include <random>
#include <string>
#include <vector>

#include "labelflux/cumomer.hpp"
#include "labelflux/network.hpp"

namespace labelflux::testing {

std::string read_file(const std::string& path);
std::string data_path(const std::string& name);

/// The branching example network as published (data/branching.xml).
std::string branching_xml();
NetworkDocument branching();

/// v = (1,1,1,1,3,3): A inflow 3 = v1+v2+v3, v2 = v4, F outflow 3.
Eigen::VectorXd branching_balanced_fluxes();

/// A random balanced flux vector for branching with v6 = total.
Eigen::VectorXd branching_random_fluxes(std::mt19937_64& rng, double total = 3.0);

/// Label lists per species with every input species fully labeled.
std::vector<std::vector<LabelFraction>> fully_labeled_inputs(const NetworkDocument& doc);

/// Label lists per species with random isotopomer mixtures on inputs.
std::vector<std::vector<LabelFraction>> random_inputs(const NetworkDocument& doc, std::mt19937_64& rng);

/// Uniformly random cumomer-shaped state in [0,1] (not necessarily consistent).
CumomerState random_state(const CumomerBasis& basis, std::mt19937_64& rng, bool input);

/// Central-difference relative error ||a-b||inf / max(||a||inf, ||b||inf, floor).
double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor = 1e-300);

}  // namespace labelflux::testing

namespace labelflux::testing {

/// The LABEL_INPUT lists written in the document itself.
std::vector<std::vector<LabelFraction>> document_labels(const NetworkDocument& doc);

}  // namespace labelflux::testing

namespace labelflux::testing {

/// S -vin-> B -vout-> W, one carbon, S fully labeled (data/scalar.xml).
NetworkDocument scalar();

}  // namespace labelflux::testing
