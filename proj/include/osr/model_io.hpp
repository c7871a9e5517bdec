#pragma once
// OpenMax model file (JSON).

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "osr/error.hpp"
#include "osr/openmax.hpp"

namespace osr {

inline constexpr std::string_view kModelFormatVersion = "osr-openmax-model/1";

inline nlohmann::ordered_json model_to_json(const OpenMaxModel& m) {
    nlohmann::ordered_json j;
    j["format_version"] = std::string(kModelFormatVersion);
    j["classes"] = m.labels().names();
    j["distance"] = "euclidean";
    j["alpha"] = m.alpha();
    j["tail_size"] = m.tail_size();
    j["weight_form"] = std::string(to_string(m.weight_form()));
    auto& cls = j["per_class"] = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < m.num_classes(); ++k) {
        const auto& w = m.weibulls()[k];
        nlohmann::ordered_json c;
        c["name"] = m.labels().names()[k];
        c["mav"] = m.mavs().means[k];
        c["mav_count"] = m.mavs().counts[k];
        c["tau"] = w.tau;
        c["lambda"] = w.lambda;
        c["kappa"] = w.kappa;
        c["tail_size"] = w.tail_size;
        c["n_fit"] = w.n_fit;
        c["tau_mode"] = std::string(to_string(w.tau_mode));
        cls.push_back(std::move(c));
    }
    return j;
}

inline std::string model_to_string(const OpenMaxModel& m) { return model_to_json(m).dump(2) + "\n"; }

inline OpenMaxModel model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format_version").get<std::string>() != kModelFormatVersion)
            throw ValidationError("unsupported model format version '" +
                                  j.at("format_version").get<std::string>() + "'");
        if (j.at("distance").get<std::string>() != "euclidean")
            throw ValidationError("unsupported distance '" + j.at("distance").get<std::string>() + "'");
        LabelMap labels(j.at("classes").get<std::vector<std::string>>());
        const auto form = parse_weight_form(j.at("weight_form").get<std::string>());
        if (!form)
            throw ValidationError("unknown weight_form '" + j.at("weight_form").get<std::string>() + "'");
        const auto& cls = j.at("per_class");
        if (!cls.is_array() || cls.size() != labels.size())
            throw ValidationError("model must list one entry per class");
        MavSet mavs;
        std::vector<WeibullModel> weibulls;
        for (std::size_t k = 0; k < cls.size(); ++k) {
            const auto& c = cls[k];
            if (c.at("name").get<std::string>() != labels.names()[k])
                throw ValidationError("per-class entry " + std::to_string(k) + " is out of order");
            mavs.means.push_back(c.at("mav").get<std::vector<double>>());
            mavs.counts.push_back(c.at("mav_count").get<std::size_t>());
            WeibullModel w;
            w.tau = c.at("tau").get<double>();
            w.lambda = c.at("lambda").get<double>();
            w.kappa = c.at("kappa").get<double>();
            w.tail_size = c.at("tail_size").get<std::size_t>();
            w.n_fit = c.at("n_fit").get<std::size_t>();
            const auto mode = parse_tau_mode(c.at("tau_mode").get<std::string>());
            if (!mode)
                throw ValidationError("unknown tau_mode '" + c.at("tau_mode").get<std::string>() + "'");
            w.tau_mode = *mode;
            weibulls.push_back(w);
        }
        return OpenMaxModel(std::move(labels), std::move(mavs), std::move(weibulls), j.at("alpha").get<std::size_t>(),
                            j.at("tail_size").get<std::size_t>(), *form);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed model file: ") + e.what());
    }
}

inline OpenMaxModel parse_model(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("malformed model file: ") + e.what());
    }
    return model_from_json(j);
}

inline OpenMaxModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open model file: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_model(ss.str());
}

inline void save_model(const std::filesystem::path& path, const OpenMaxModel& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ValidationError("cannot write model file: " + path.string());
    out << model_to_string(m);
}

} // namespace osr
