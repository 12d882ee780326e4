#include "fmc/config.hpp"

#include "fmc/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <variant>

namespace fmc {

namespace {

using Field = std::variant<double ModelParams::*, int ModelParams::*>;

struct FieldEntry {
    const char* name;
    Field field;
};

constexpr double kSumTolerance = 1e-9;

const std::vector<FieldEntry>& fields() {
    static const std::vector<FieldEntry> table = {
        {"lambda_n", &ModelParams::lambda_n},
        {"mu", &ModelParams::mu},
        {"p_m", &ModelParams::p_m},
        {"capacity_B", &ModelParams::capacity_B},
        {"max_alloc_C", &ModelParams::max_alloc_C},
        {"max_distance_D", &ModelParams::max_distance_D},
        {"income_finish", &ModelParams::income_finish},
        {"income_migrate", &ModelParams::income_migrate},
        {"loss_reject_nr", &ModelParams::loss_reject_nr},
        {"cost_migrate", &ModelParams::cost_migrate},
        {"loss_interrupt", &ModelParams::loss_interrupt},
        {"price_resource", &ModelParams::price_resource},
        {"weight_delay", &ModelParams::weight_delay},
        {"weight_occupancy", &ModelParams::weight_occupancy},
        {"weight_nr", &ModelParams::weight_nr},
        {"weight_mr", &ModelParams::weight_mr},
        {"max_reject_nr", &ModelParams::max_reject_nr},
        {"max_reject_mr", &ModelParams::max_reject_mr},
    };
    return table;
}

const FieldEntry& find_field(std::string_view key) {
    for (const auto& f : fields())
        if (key == f.name) return f;
    throw ValidationError("unknown config key '" + std::string(key) + "'");
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

bool in_unit_interval(double x) { return x >= 0.0 && x <= 1.0; }

void require(bool ok, const char* what) {
    if (!ok) throw ValidationError(what);
}

// Shortest representation that parses back to the same double.
std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

} // namespace

ModelParams validate(const ModelParams& p) {
    require(std::isfinite(p.lambda_n) && p.lambda_n > 0.0, "lambda_n must be > 0");
    require(in_unit_interval(p.mu), "mu must lie in [0,1]");
    require(in_unit_interval(p.p_m), "p_m must lie in [0,1]");
    require(p.capacity_B >= 1, "capacity_B must be >= 1");
    require(p.max_alloc_C >= 1, "max_alloc_C must be >= 1");
    require(p.max_alloc_C <= p.capacity_B, "max_alloc exceeds capacity");
    require(p.max_distance_D >= 1, "max_distance_D must be >= 1");
    require(p.income_finish >= 0.0 && p.income_migrate >= 0.0, "incomes must be >= 0");
    require(p.loss_reject_nr >= 0.0, "loss_reject_nr must be >= 0");
    require(p.cost_migrate >= 0.0, "cost_migrate must be >= 0");
    require(p.loss_interrupt >= 0.0, "loss_interrupt must be >= 0");
    require(p.price_resource >= 0.0, "price_resource must be >= 0");
    require(in_unit_interval(p.weight_delay) && in_unit_interval(p.weight_occupancy),
            "weight_delay and weight_occupancy must lie in [0,1]");
    require(std::abs(p.weight_delay + p.weight_occupancy - 1.0) <= kSumTolerance,
            "weight_delay+weight_occupancy ≠ 1");
    require(in_unit_interval(p.weight_nr) && in_unit_interval(p.weight_mr),
            "weight_nr and weight_mr must lie in [0,1]");
    require(std::abs(p.weight_nr + p.weight_mr - 1.0) <= kSumTolerance,
            "weight_nr+weight_mr ≠ 1");
    require(in_unit_interval(p.max_reject_nr) && in_unit_interval(p.max_reject_mr),
            "max_reject_nr and max_reject_mr must lie in [0,1]");
    return p;
}

double mr_arrival_rate(const ModelParams& p) {
    return p.lambda_n * (1.0 - p.mu) * p.p_m;
}

double rejection_threshold(const ModelParams& p) {
    return p.weight_nr * p.max_reject_nr + p.weight_mr * p.max_reject_mr;
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& f : fields()) k.emplace_back(f.name);
        return k;
    }();
    return keys;
}

void set_param(ModelParams& p, std::string_view key, std::string_view value) {
    const auto& entry = find_field(key);
    value = trim(value);
    const auto bad = [&] {
        return ValidationError("cannot parse value '" + std::string(value) + "' for key '" +
                               std::string(key) + "'");
    };
    std::visit(
        [&](auto member) {
            using T = std::remove_reference_t<decltype(p.*member)>;
            T parsed{};
            auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), parsed);
            if (ec != std::errc{} || ptr != value.data() + value.size()) throw bad();
            p.*member = parsed;
        },
        entry.field);
}

std::string get_param(const ModelParams& p, std::string_view key) {
    const auto& entry = find_field(key);
    return std::visit(
        [&](auto member) -> std::string {
            if constexpr (std::is_same_v<decltype(member), int ModelParams::*>)
                return std::to_string(p.*member);
            else
                return format_double(p.*member);
        },
        entry.field);
}

ModelParams parse_config(std::string_view text, ModelParams base) {
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        auto line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);

        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ValidationError("config line " + std::to_string(line_no) +
                                  ": expected 'key = value'");
        set_param(base, trim(line.substr(0, eq)), line.substr(eq + 1));
    }
    return base;
}

ModelParams load_config(const std::filesystem::path& path, ModelParams base) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), base);
}

std::string to_config_text(const ModelParams& p) {
    std::string out;
    for (const auto& f : fields()) {
        out += f.name;
        out += " = ";
        out += get_param(p, f.name);
        out += '\n';
    }
    return out;
}

} // namespace fmc
