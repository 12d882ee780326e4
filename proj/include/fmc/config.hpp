#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fmc {

/// Scalar parameters of the single-DC model. Rates are per unit time;
/// incomes and losses are lump sums; price_resource is per unit per time.
struct ModelParams {
    double lambda_n = 4.0;          ///< NR arrival rate
    double mu = 0.3;                ///< service completion rate
    double p_m = 0.5;               ///< cross-area movement rate
    int capacity_B = 8;             ///< resource units in the DC
    int max_alloc_C = 3;            ///< max units per service
    int max_distance_D = 3;         ///< max service distance (hops)

    double income_finish = 10.0;    ///< G_t
    double income_migrate = 8.0;    ///< G_m
    double loss_reject_nr = 4.0;    ///< C_l
    double cost_migrate = 2.0;      ///< C_m
    double loss_interrupt = 40.0;   ///< C_d
    double price_resource = 1.0;    ///< C_r

    double weight_delay = 0.5;
    double weight_occupancy = 0.5;
    double weight_nr = 0.3;
    double weight_mr = 0.7;
    double max_reject_nr = 0.05;
    double max_reject_mr = 0.05;

    bool operator==(const ModelParams&) const = default;
};

/// Returns p unchanged or throws ValidationError naming the first violated invariant.
ModelParams validate(const ModelParams& p);

/// lambda_m = lambda_n (1 - mu) p_m
double mr_arrival_rate(const ModelParams& p);

/// rho = w_n * max_reject_nr + w_m * max_reject_mr
double rejection_threshold(const ModelParams& p);

// Key/value config file support. Keys are the field names above.

const std::vector<std::string>& config_keys();

/// Assigns one field from its textual value. Throws ValidationError on
/// unknown keys or unparsable values; does not run validate().
void set_param(ModelParams& p, std::string_view key, std::string_view value);

std::string get_param(const ModelParams& p, std::string_view key);

/// Parses "key = value" lines with '#' comments, starting from `base`.
ModelParams parse_config(std::string_view text, ModelParams base = {});

ModelParams load_config(const std::filesystem::path& path, ModelParams base = {});

/// Serializes every key, one per line, in config_keys() order.
std::string to_config_text(const ModelParams& p);

} // namespace fmc
