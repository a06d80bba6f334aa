#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "flowrecon/scvae.hpp"

namespace flowrecon {

using nlohmann::json;

void save_scvae_model(const std::filesystem::path& file, const ScvaeModel& model) {
    json header;
    header["fmt"] = "frcmodel-1";
    header["arch"] = model.architecture().to_json();
    header["grid"] = {{"nx", model.grid().nx},
                      {"ny", model.grid().ny},
                      {"dx", model.grid().dx},
                      {"dy", model.grid().dy}};
    json locs = json::array();
    for (const auto& [i, j] : model.layout().locations) locs.push_back({i, j});
    header["layout"] = locs;
    header["scaling"] = {{"u_center", model.scaling().u_center},
                         {"v_center", model.scaling().v_center},
                         {"u_halfwidth", model.scaling().u_halfwidth},
                         {"v_halfwidth", model.scaling().v_halfwidth}};
    json params = json::array();
    std::size_t offset = 0;
    for (std::size_t p = 0; p < model.params().size(); ++p) {
        const nn::Param& param = model.params().at(p);
        params.push_back({{"name", param.name},
                          {"shape", param.value.shape},
                          {"offset", offset},
                          {"count", param.value.size()}});
        offset += param.value.size();
    }
    header["params"] = params;

    std::ofstream f(file, std::ios::binary);
    f << header.dump() << "\n";
    for (std::size_t p = 0; p < model.params().size(); ++p) {
        const nn::Param& param = model.params().at(p);
        f.write(reinterpret_cast<const char*>(param.value.data.data()),
                static_cast<std::streamsize>(param.value.size() * sizeof(double)));
    }
    if (!f) throw std::runtime_error("save_scvae_model: cannot write " + file.string());
}

std::unique_ptr<ScvaeModel> load_scvae_model(const std::filesystem::path& file) {
    std::ifstream f(file, std::ios::binary);
    if (!f) throw std::invalid_argument("load_scvae_model: cannot open " + file.string());
    std::string line;
    std::getline(f, line);
    json header = json::parse(line);
    if (header.value("fmt", "") != "frcmodel-1") {
        throw std::invalid_argument("load_scvae_model: not a frcmodel-1 file");
    }
    const auto& g = header.at("grid");
    const Grid grid(g.at("nx").get<int>(), g.at("ny").get<int>(), g.at("dx").get<double>(),
                    g.at("dy").get<double>());
    std::vector<std::pair<int, int>> locs;
    for (const auto& loc : header.at("layout")) {
        locs.emplace_back(loc.at(0).get<int>(), loc.at(1).get<int>());
    }
    ScalingParams scaling;
    const auto& sc = header.at("scaling");
    scaling.u_center = sc.at("u_center").get<double>();
    scaling.v_center = sc.at("v_center").get<double>();
    scaling.u_halfwidth = sc.at("u_halfwidth").get<double>();
    scaling.v_halfwidth = sc.at("v_halfwidth").get<double>();

    auto model = std::make_unique<ScvaeModel>(ScvaeArchitecture::from_json(header.at("arch")),
                                              grid, SensorLayout(std::move(locs)), scaling,
                                              /*init_seed=*/0);

    std::size_t total = 0;
    for (const auto& p : header.at("params")) total += p.at("count").get<std::size_t>();
    if (total != model->params().total_values()) {
        throw std::invalid_argument("load_scvae_model: parameter manifest does not match "
                                    "architecture");
    }
    std::vector<double> flat(total);
    f.read(reinterpret_cast<char*>(flat.data()),
           static_cast<std::streamsize>(total * sizeof(double)));
    if (!f) throw std::invalid_argument("load_scvae_model: truncated blob in " + file.string());
    model->params().restore_values(flat);
    return model;
}

} // namespace flowrecon
