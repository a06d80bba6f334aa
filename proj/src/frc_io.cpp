#include "flowrecon/frc_io.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

static_assert(std::endian::native == std::endian::little,
              "FRC1 writes raw little-endian doubles");

namespace flowrecon {

using nlohmann::json;

std::string format_double(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

void write_frc1(const std::filesystem::path& dir, const FlowSeries& series) {
    std::filesystem::create_directories(dir);
    json meta;
    meta["nx"] = series.grid.nx;
    meta["ny"] = series.grid.ny;
    meta["dx"] = series.grid.dx;
    meta["dy"] = series.grid.dy;
    meta["count"] = series.size();
    meta["dtype"] = "f64";
    meta["layout"] = "u-block,v-block,row-major";
    meta["endianness"] = "little";
    std::ofstream mf(dir / "meta.json");
    mf << meta.dump(2) << "\n";
    if (!mf) throw std::runtime_error("write_frc1: cannot write meta.json in " + dir.string());

    std::ofstream bf(dir / "data.bin", std::ios::binary);
    for (const auto& s : series.snapshots) {
        bf.write(reinterpret_cast<const char*>(s.u.data()),
                 static_cast<std::streamsize>(s.u.size() * sizeof(double)));
        bf.write(reinterpret_cast<const char*>(s.v.data()),
                 static_cast<std::streamsize>(s.v.size() * sizeof(double)));
    }
    if (!bf) throw std::runtime_error("write_frc1: cannot write data.bin in " + dir.string());
}

FlowSeries read_frc1(const std::filesystem::path& dir) {
    std::ifstream mf(dir / "meta.json");
    if (!mf) throw std::invalid_argument("read_frc1: missing meta.json in " + dir.string());
    json meta = json::parse(mf);
    if (meta.value("dtype", "") != "f64" || meta.value("endianness", "") != "little" ||
        meta.value("layout", "") != "u-block,v-block,row-major") {
        throw std::invalid_argument("read_frc1: unsupported container flavor in " + dir.string());
    }
    const Grid grid(meta.at("nx").get<int>(), meta.at("ny").get<int>(),
                    meta.at("dx").get<double>(), meta.at("dy").get<double>());
    const std::size_t count = meta.at("count").get<std::size_t>();
    const std::size_t n = static_cast<std::size_t>(grid.n_points());

    std::ifstream bf(dir / "data.bin", std::ios::binary);
    if (!bf) throw std::invalid_argument("read_frc1: missing data.bin in " + dir.string());
    std::vector<FlowSnapshot> snaps;
    snaps.reserve(count);
    for (std::size_t s = 0; s < count; ++s) {
        std::vector<double> u(n), v(n);
        bf.read(reinterpret_cast<char*>(u.data()), static_cast<std::streamsize>(n * sizeof(double)));
        bf.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
        if (!bf) throw std::invalid_argument("read_frc1: data.bin truncated in " + dir.string());
        snaps.emplace_back(grid, std::move(u), std::move(v), static_cast<int>(s));
    }
    return FlowSeries(grid, std::move(snaps));
}

void write_sensor_layout(const std::filesystem::path& file, const SensorLayout& layout) {
    json j;
    j["locations"] = json::array();
    for (const auto& [i, jj] : layout.locations) j["locations"].push_back({i, jj});
    std::ofstream f(file);
    f << j.dump(2) << "\n";
    if (!f) throw std::runtime_error("write_sensor_layout: cannot write " + file.string());
}

SensorLayout read_sensor_layout(const std::filesystem::path& file) {
    std::ifstream f(file);
    if (!f) throw std::invalid_argument("read_sensor_layout: cannot open " + file.string());
    json j = json::parse(f);
    const json& locs = j.is_array() ? j : j.at("locations");
    std::vector<std::pair<int, int>> out;
    for (const auto& loc : locs) {
        out.emplace_back(loc.at(0).get<int>(), loc.at(1).get<int>());
    }
    return SensorLayout(std::move(out));
}

void write_measurements_csv(const std::filesystem::path& file, const SensorLayout& layout,
                            const std::vector<double>& m) {
    const std::size_t n = layout.locations.size();
    if (m.size() != 2 * n) {
        throw std::invalid_argument("write_measurements_csv: measurement length mismatch");
    }
    std::ofstream f(file);
    f << "i,j,u,v\n";
    for (std::size_t k = 0; k < n; ++k) {
        f << layout.locations[k].first << "," << layout.locations[k].second << ","
          << format_double(m[k]) << "," << format_double(m[n + k]) << "\n";
    }
    if (!f) throw std::runtime_error("write_measurements_csv: cannot write " + file.string());
}

std::pair<SensorLayout, std::vector<double>> read_measurements_csv(
    const std::filesystem::path& file) {
    std::ifstream f(file);
    if (!f) throw std::invalid_argument("read_measurements_csv: cannot open " + file.string());
    std::string line;
    std::getline(f, line); // header
    std::vector<std::pair<int, int>> locs;
    std::vector<double> us, vs;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string tok;
        int i = 0, j = 0;
        double u = 0.0, v = 0.0;
        std::getline(ss, tok, ',');
        i = std::stoi(tok);
        std::getline(ss, tok, ',');
        j = std::stoi(tok);
        std::getline(ss, tok, ',');
        u = std::stod(tok);
        std::getline(ss, tok, ',');
        v = std::stod(tok);
        locs.emplace_back(i, j);
        us.push_back(u);
        vs.push_back(v);
    }
    std::vector<double> m = us;
    m.insert(m.end(), vs.begin(), vs.end());
    return {SensorLayout(std::move(locs)), std::move(m)};
}

} // namespace flowrecon
