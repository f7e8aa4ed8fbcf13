/**
 * @file scenario.hpp
 * @brief Deployment geometry: jittered-grid AP placement, uniform UE drops,
 * 3D distances.
 */
#pragma once

#include <array>
#include <iosfwd>
#include <vector>

#include "cfm/rng.hpp"

namespace cfm {

using Point = std::array<double, 2>; // meters, (x, y)

struct Scenario {
    std::vector<Point> ap_positions; // meters, within [0, area_side]^2
    double area_side = 0.0;          // meters
    double height_diff = 0.0;        // meters, vertical AP-UE offset
    int L = 0;                       // AP count
    int N = 1;                       // antennas per AP
    std::vector<int> ap_order;       // fixed scheduling order, permutation of 0..L-1
};

struct UEDrop {
    std::vector<Point> ue_positions;
    int K = 0;
};

/// APs on a grid_side x grid_side layout: each sits at its cell center,
/// displaced per axis by Uniform(-j*s/2, +j*s/2) with s the cell pitch and
/// j the jitter fraction, then clamped into the area. Scheduling order is
/// the row-major grid order.
Scenario place_aps(int grid_side, double area_side, double jitter_fraction, Rng& rng,
                   double height_diff = 0.0, int antennas = 1);

/// K positions i.i.d. uniform over the square.
UEDrop sample_ue_drop(int K, double area_side, Rng& rng);

/// Euclidean distance with the fixed vertical offset between AP and UE planes.
double distance_3d(const Point& ap, const Point& ue, double height_diff);

void write_scenario(std::ostream& os, const Scenario& s);
Scenario read_scenario(std::istream& is);
void write_drops(std::ostream& os, const std::vector<UEDrop>& drops);
std::vector<UEDrop> read_drops(std::istream& is);

} // namespace cfm
