#pragma once

// Per-repository figures from the published study, used as fixtures.

#include <string>
#include <vector>

namespace satd::testing {

inline const std::vector<std::string> kRepoNames = {"ADIOS2", "Trilinos", "dyninst", "hypre", "kokkos",
                                                    "legion", "spack",    "tau2",    "visit"};
inline const std::vector<double> kKlocPerContributor = {19.18, 73.28, 12.82, 22.75, 2.83, 17.18, 0.28, 79.96, 67.23};
inline const std::vector<double> kIntroduced = {526, 12871, 282, 1196, 1117, 435, 934, 1044, 548};
inline const std::vector<double> kRemoved = {147, 4760, 128, 416, 595, 172, 547, 299, 82};
inline const std::vector<double> kPublishedRate = {0.279, 0.370, 0.454, 0.348, 0.533, 0.395, 0.586, 0.286, 0.150};
inline const std::vector<double> kMedianDays = {2194.0, 3596.0, 6742.0, 1463.5, 1678.0,
                                                3112.5, 2309.0, 2870.0, 2824.5};

} // namespace satd::testing
