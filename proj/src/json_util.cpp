#include "bcih/json_util.hpp"

#include <cstdio>

#include "bcih/errors.hpp"

namespace bcih {

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string json_hash(const json& j) { return fnv1a_hex(j.dump()); }

json matrix_to_json(const Eigen::MatrixXd& m) {
    json data = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (rows < 0 || cols < 0 || data.size() != static_cast<std::size_t>(rows * cols))
        throw InputError("matrix JSON: data length does not match rows*cols");
    Eigen::MatrixXd m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[k++].get<double>();
    return m;
}

json vec2_to_json(Vec2 v) { return json::array({v.x, v.y}); }

Vec2 vec2_from_json(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

}  // namespace bcih
