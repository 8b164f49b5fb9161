#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "vpgrav/config.hpp"
#include "vpgrav/snapshot.hpp"

using namespace vpgrav;
namespace fs = std::filesystem;

namespace {
std::string temp_path(const std::string& name) {
    return (fs::temp_directory_path() / name).string();
}
}  // namespace

TEST_CASE("snapshot round trip is bit-exact") {
    auto sg = SpatialGrid::refined(2, 3, 12, 5.0, 1.1);
    auto vg = VelocityGrid::cube(4, 5, 6, 3.0);
    Distribution f = Distribution::zeros(sg, vg, Role::perturbation_f, 1.75);
    std::uint64_t s = 99;
    for (auto& v : f.values) {
        s = s * 6364136223846793005ull + 1442695040888963407ull;
        v = static_cast<double>(s >> 11) * 0x1.0p-53 - 0.5;
    }
    std::string path = temp_path("vpgrav_roundtrip.vps");
    write_distribution_snapshot(path, f, 2.5);
    Distribution g = read_distribution_snapshot(path);
    REQUIRE(g.values.size() == f.values.size());
    for (std::size_t i = 0; i < f.values.size(); ++i) {
        // bitwise equality, not approximate
        CHECK(std::memcmp(&f.values[i], &g.values[i], 8) == 0);
    }
    CHECK(g.role == f.role);
    CHECK(g.beta == f.beta);
    CHECK(g.sg.L3 == f.sg.L3);
    for (int j = 0; j <= sg.n3; ++j) CHECK(g.sg.x3[j] == f.sg.x3[j]);
    fs::remove(path);
}

TEST_CASE("snapshot rejects corruption") {
    auto sg = SpatialGrid::uniform(1, 1, 4, 1.0);
    DensityField rho;
    rho.sg = sg;
    rho.values.assign(sg.num_nodes(), 1.0);
    std::string path = temp_path("vpgrav_corrupt.vps");
    write_density_snapshot(path, rho, 1.0, 1.0, "density");

    SUBCASE("wrong magic") {
        std::ifstream in(path, std::ios::binary);
        std::string all((std::istreambuf_iterator<char>(in)), {});
        in.close();
        all[0] = 'X';
        std::ofstream out(path, std::ios::binary);
        out << all;
        out.close();
        CHECK_THROWS_AS(read_snapshot(path), SnapshotError);
    }
    SUBCASE("truncated payload") {
        auto size = fs::file_size(path);
        fs::resize_file(path, size - 5);
        CHECK_THROWS_AS(read_snapshot(path), SnapshotError);
    }
    SUBCASE("count inconsistent with dims") {
        std::ifstream in(path, std::ios::binary);
        std::string all((std::istreambuf_iterator<char>(in)), {});
        in.close();
        auto pos = all.find("count 5");
        REQUIRE(pos != std::string::npos);
        all.replace(pos, 7, "count 4");
        std::ofstream out(path, std::ios::binary);
        out << all;
        out.close();
        CHECK_THROWS_AS(read_snapshot(path), SnapshotError);
    }
    fs::remove(path);
}

TEST_CASE("minimal config applies the documented defaults") {
    RunConfig cfg = parse_config_text("[physics]\ng = 2\n");
    CHECK(cfg.g == 2.0);
    CHECK(cfg.eta == 1);
    CHECK(cfg.beta == 2.0);
    CHECK(cfg.n3 == 128);
    CHECK(cfg.boundary_kind == "maxwellian");
    CHECK(cfg.seed == 42);
}

TEST_CASE("config validation names the offending field") {
    CHECK_THROWS_WITH_AS(parse_config_text("[physics]\ng = -1\n"),
                         "physics.g must be positive", ConfigError);
    CHECK_THROWS_WITH_AS(parse_config_text("[physics]\neta = 0\n"),
                         "physics.eta must be +1 or -1", ConfigError);
    CHECK_THROWS_AS(parse_config_text("[physics]\nbogus = 3\n"), ConfigError);
    try {
        parse_config_text("[grid]\nwidth = 3\n");
        FAIL("expected a parse error");
    } catch (const ConfigError& e) {
        std::string msg = e.what();
        CHECK(msg.find("width") != std::string::npos);
        CHECK(msg.find("grid") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config_text("g = 1\n"), ConfigError);       // key outside section
    CHECK_THROWS_AS(parse_config_text("[physics]\ng 1\n"), ConfigError);  // missing '='
}

TEST_CASE("config echo round-trips exactly") {
    RunConfig cfg;
    cfg.g = 3.7219341238192e-2;
    cfg.beta = 1.0 / 3.0;
    cfg.n3 = 77;
    cfg.boundary_kind = "vacuum";
    cfg.predictor_corrector = true;
    cfg.seed = 1234567890123ull;
    std::string echoed = echo_config(cfg);
    RunConfig back = parse_config_text(echoed);
    CHECK(back.g == cfg.g);  // bit-identical through %.17g
    CHECK(back.beta == cfg.beta);
    CHECK(back.n3 == cfg.n3);
    CHECK(back.boundary_kind == cfg.boundary_kind);
    CHECK(back.predictor_corrector == cfg.predictor_corrector);
    CHECK(back.seed == cfg.seed);
    CHECK(echo_config(back) == echoed);  // idempotent echo
}

TEST_CASE("config file parsing with comments") {
    std::string path = temp_path("vpgrav_cfg.cfg");
    {
        std::ofstream out(path);
        out << "# run setup\n[physics]\ng = 1.5  # strong\nbeta = 1\n\n[grid]\nn3 = 32\n";
    }
    RunConfig cfg = parse_config(path);
    CHECK(cfg.g == 1.5);
    CHECK(cfg.n3 == 32);
    fs::remove(path);
    CHECK_THROWS_AS(parse_config(path), ConfigError);  // missing file
}

TEST_CASE("tabulated inflow loads through the configured table path") {
    std::string path = temp_path("vpgrav_table.vps");
    int mv = 5;
    double vmax = 3.0;
    SnapshotMeta meta;
    meta.role = "inflow_table";
    meta.dims = {1, 1, 5, 5, 5};
    meta.vmax = vmax;
    meta.beta = 1.0;
    meta.g = 1.0;
    std::vector<double> samples(static_cast<std::size_t>(mv) * mv * mv);
    for (int k1 = 0; k1 < mv; ++k1)
        for (int k2 = 0; k2 < mv; ++k2)
            for (int k3 = 0; k3 < mv; ++k3) {
                double hx = 2.0 * vmax / (mv - 1), h3 = vmax / (mv - 1);
                double v1 = -vmax + k1 * hx, v2 = -vmax + k2 * hx, v3 = k3 * h3;
                samples[(static_cast<std::size_t>(k1) * mv + k2) * mv + k3] =
                    0.25 * std::exp(-(v1 * v1 + v2 * v2 + v3 * v3));
            }
    write_snapshot(path, meta, samples);

    RunConfig cfg = parse_config_text("[boundary]\nkind = tabulated\ntable = " + path +
                                      "\namplitude = 0.25\ndecay = 1\n");
    BoundaryDatum G = cfg.boundary();
    CHECK(G.kind() == BoundaryDatum::Kind::tabulated);
    CHECK(G.value({0, 0}, {0, 0, 0}) == doctest::Approx(0.25));
    CHECK(G.sup_norm() >= 0.25);
    fs::remove(path);

    CHECK_THROWS_AS(parse_config_text("[boundary]\nkind = tabulated\n"), ConfigError);
}
