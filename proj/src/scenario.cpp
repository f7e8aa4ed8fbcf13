#include "cfm/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace cfm {

Scenario place_aps(int grid_side, double area_side, double jitter_fraction, Rng& rng,
                   double height_diff, int antennas) {
    if (grid_side < 1) throw std::invalid_argument("place_aps: grid_side must be >= 1");
    if (area_side <= 0.0) throw std::invalid_argument("place_aps: area_side must be positive");
    if (jitter_fraction < 0.0 || jitter_fraction > 1.0)
        throw std::invalid_argument("place_aps: jitter_fraction must lie in [0,1]");
    if (height_diff < 0.0) throw std::invalid_argument("place_aps: height_diff must be >= 0");
    if (antennas < 1) throw std::invalid_argument("place_aps: antennas must be >= 1");

    Scenario s;
    s.area_side = area_side;
    s.height_diff = height_diff;
    s.N = antennas;
    s.L = grid_side * grid_side;
    s.ap_positions.reserve(s.L);
    const double pitch = area_side / grid_side;
    const double half = jitter_fraction * pitch / 2.0;
    for (int row = 0; row < grid_side; ++row) {
        for (int col = 0; col < grid_side; ++col) {
            double x = (col + 0.5) * pitch;
            double y = (row + 0.5) * pitch;
            if (half > 0.0) {
                x += rng.uniform(-half, half);
                y += rng.uniform(-half, half);
            }
            x = std::clamp(x, 0.0, area_side);
            y = std::clamp(y, 0.0, area_side);
            s.ap_positions.push_back({x, y});
        }
    }
    s.ap_order.resize(s.L);
    for (int i = 0; i < s.L; ++i) s.ap_order[i] = i;
    return s;
}

UEDrop sample_ue_drop(int K, double area_side, Rng& rng) {
    if (K < 1) throw std::invalid_argument("sample_ue_drop: K must be >= 1");
    if (area_side <= 0.0) throw std::invalid_argument("sample_ue_drop: area_side must be positive");
    UEDrop d;
    d.K = K;
    d.ue_positions.reserve(K);
    for (int k = 0; k < K; ++k) {
        const double x = rng.uniform(0.0, area_side);
        const double y = rng.uniform(0.0, area_side);
        d.ue_positions.push_back({x, y});
    }
    return d;
}

double distance_3d(const Point& ap, const Point& ue, double height_diff) {
    if (height_diff < 0.0) throw std::invalid_argument("distance_3d: height_diff must be >= 0");
    const double dx = ap[0] - ue[0];
    const double dy = ap[1] - ue[1];
    return std::sqrt(dx * dx + dy * dy + height_diff * height_diff);
}

namespace {

std::string next_content_line(std::istream& is) {
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line[0] != '#') return line;
    }
    throw std::runtime_error("scenario/drops parse: unexpected end of file");
}

} // namespace

void write_scenario(std::ostream& os, const Scenario& s) {
    os << std::setprecision(17);
    os << "# cfm scenario v1\n";
    os << "area " << s.area_side << "\n";
    os << "height " << s.height_diff << "\n";
    os << "antennas " << s.N << "\n";
    os << "aps " << s.L << "\n";
    for (const auto& p : s.ap_positions) os << "ap " << p[0] << " " << p[1] << "\n";
}

Scenario read_scenario(std::istream& is) {
    Scenario s;
    auto expect = [](std::istringstream& ls, const char* key) {
        std::string tok;
        ls >> tok;
        if (tok != key) throw std::runtime_error(std::string("scenario parse: expected '") + key + "', got '" + tok + "'");
    };
    {
        std::istringstream ls(next_content_line(is));
        expect(ls, "area");
        ls >> s.area_side;
    }
    {
        std::istringstream ls(next_content_line(is));
        expect(ls, "height");
        ls >> s.height_diff;
    }
    {
        std::istringstream ls(next_content_line(is));
        expect(ls, "antennas");
        ls >> s.N;
    }
    {
        std::istringstream ls(next_content_line(is));
        expect(ls, "aps");
        ls >> s.L;
    }
    for (int i = 0; i < s.L; ++i) {
        std::istringstream ls(next_content_line(is));
        expect(ls, "ap");
        Point p{};
        ls >> p[0] >> p[1];
        s.ap_positions.push_back(p);
    }
    s.ap_order.resize(s.L);
    for (int i = 0; i < s.L; ++i) s.ap_order[i] = i;
    return s;
}

void write_drops(std::ostream& os, const std::vector<UEDrop>& drops) {
    os << std::setprecision(17);
    os << "# cfm drops v1\n";
    os << "drops " << drops.size() << "\n";
    for (size_t i = 0; i < drops.size(); ++i) {
        os << "drop " << i << " " << drops[i].K << "\n";
        for (const auto& p : drops[i].ue_positions) os << "ue " << p[0] << " " << p[1] << "\n";
    }
}

std::vector<UEDrop> read_drops(std::istream& is) {
    std::vector<UEDrop> out;
    size_t n = 0;
    {
        std::istringstream ls(next_content_line(is));
        std::string tok;
        ls >> tok >> n;
        if (tok != "drops") throw std::runtime_error("drops parse: expected 'drops'");
    }
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        std::istringstream ls(next_content_line(is));
        std::string tok;
        size_t idx = 0;
        int K = 0;
        ls >> tok >> idx >> K;
        if (tok != "drop") throw std::runtime_error("drops parse: expected 'drop'");
        UEDrop d;
        d.K = K;
        for (int k = 0; k < K; ++k) {
            std::istringstream ul(next_content_line(is));
            ul >> tok;
            if (tok != "ue") throw std::runtime_error("drops parse: expected 'ue'");
            Point p{};
            ul >> p[0] >> p[1];
            d.ue_positions.push_back(p);
        }
        out.push_back(std::move(d));
    }
    return out;
}

} // namespace cfm
