#include "fmc/config.hpp"
#include "fmc/error.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace fmc;

namespace {

std::string validation_message(const ModelParams& p) {
    try {
        validate(p);
    } catch (const ValidationError& e) {
        return e.what();
    }
    return {};
}

} // namespace

TEST_CASE("validate accepts a consistent parameter set") {
    ModelParams p;
    p.weight_delay = 0.5;
    p.weight_occupancy = 0.5;
    p.weight_nr = 0.6;
    p.weight_mr = 0.4;
    CHECK(validate(p) == p);
    CHECK(validate(validate(p)) == validate(p));
}

TEST_CASE("validate names the violated invariant") {
    ModelParams p;
    p.weight_delay = 0.7;
    p.weight_occupancy = 0.7;
    CHECK(validation_message(p).find("weight_delay+weight_occupancy ≠ 1") != std::string::npos);

    ModelParams q;
    q.capacity_B = 4;
    q.max_alloc_C = 5;
    CHECK(validation_message(q).find("max_alloc exceeds capacity") != std::string::npos);

    ModelParams r;
    r.weight_nr = 0.9;
    CHECK_FALSE(validation_message(r).empty());

    ModelParams s;
    s.lambda_n = 0.0;
    CHECK(validation_message(s).find("lambda_n") != std::string::npos);

    ModelParams t;
    t.max_distance_D = 0;
    CHECK_FALSE(validation_message(t).empty());

    ModelParams u;
    u.loss_interrupt = -1.0;
    CHECK(validation_message(u).find("loss_interrupt") != std::string::npos);
}

TEST_CASE("mr_arrival_rate") {
    ModelParams p;
    p.lambda_n = 2.0;
    p.mu = 0.5;
    p.p_m = 0.4;
    CHECK(mr_arrival_rate(p) == doctest::Approx(0.4).epsilon(1e-15));
    p.mu = 1.0;
    CHECK(mr_arrival_rate(p) == 0.0);
    p.mu = 0.5;
    p.p_m = 0.0;
    CHECK(mr_arrival_rate(p) == 0.0);
}

TEST_CASE("mr_arrival_rate monotonicity") {
    ModelParams p;
    for (double x = 0.1; x < 0.95; x += 0.1) {
        ModelParams a = p, b = p;
        a.lambda_n = x;
        b.lambda_n = x + 0.1;
        CHECK(mr_arrival_rate(a) < mr_arrival_rate(b));
        a = b = p;
        a.p_m = x;
        b.p_m = x + 0.05;
        CHECK(mr_arrival_rate(a) < mr_arrival_rate(b));
        a = b = p;
        a.mu = x;
        b.mu = x + 0.05;
        CHECK(mr_arrival_rate(a) > mr_arrival_rate(b));
    }
}

TEST_CASE("rejection_threshold") {
    ModelParams p;
    p.weight_nr = 0.6;
    p.weight_mr = 0.4;
    p.max_reject_nr = 0.1;
    p.max_reject_mr = 0.05;
    CHECK(rejection_threshold(p) == doctest::Approx(0.08).epsilon(1e-14));
    p.max_reject_nr = p.max_reject_mr = 0.0;
    CHECK(rejection_threshold(p) == 0.0);
    p.max_reject_nr = p.max_reject_mr = 1.0;
    CHECK(rejection_threshold(p) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("config text round-trips every key") {
    ModelParams p;
    p.lambda_n = 0.1 + 0.2;  // not exactly representable in short decimal
    p.capacity_B = 11;
    p.income_migrate = 1.0 / 3.0;
    const ModelParams q = parse_config(to_config_text(p));
    CHECK(q == p);
    CHECK(config_keys().size() == 18);
    for (const auto& k : config_keys()) CHECK(get_param(q, k) == get_param(p, k));
}

TEST_CASE("parse_config handles comments, blanks and overrides") {
    const std::string text =
        "# header\n"
        "\n"
        "lambda_n = 2.5   # trailing comment\n"
        "  capacity_B=12\n"
        "max_alloc_C = 4\n";
    const ModelParams p = parse_config(text);
    CHECK(p.lambda_n == 2.5);
    CHECK(p.capacity_B == 12);
    CHECK(p.max_alloc_C == 4);
    CHECK(p.mu == ModelParams{}.mu);

    CHECK_THROWS_AS(parse_config("nonsense = 1\n"), ValidationError);
    CHECK_THROWS_AS(parse_config("lambda_n = fast\n"), ValidationError);
    CHECK_THROWS_AS(parse_config("capacity_B = 2.5\n"), ValidationError);
    CHECK_THROWS_AS(parse_config("lambda_n\n"), ValidationError);
}

TEST_CASE("load_config reads a file without touching it") {
    const auto path = std::filesystem::temp_directory_path() / "fmc_test_config.conf";
    {
        std::ofstream f(path);
        f << "lambda_n = 3\nweight_nr = 0.25\nweight_mr = 0.75\n";
    }
    const auto before = std::filesystem::last_write_time(path);
    const ModelParams p = load_config(path);
    CHECK(p.lambda_n == 3.0);
    CHECK(p.weight_mr == 0.75);
    CHECK(std::filesystem::last_write_time(path) == before);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_config(path), Error);
}

TEST_CASE("shipped default config equals the built-in defaults") {
    const ModelParams p = load_config(FMC_SOURCE_DIR "/configs/default.conf");
    CHECK(p == ModelParams{});
    CHECK(validate(p) == p);
}
