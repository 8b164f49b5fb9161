#include "vpgrav/snapshot.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <sstream>

namespace vpgrav {

namespace {

constexpr const char* kMagic = "VPGRAV1";

void put_le(std::ostream& os, double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    if constexpr (std::endian::native == std::endian::big) {
        std::uint64_t r = 0;
        for (int i = 0; i < 8; ++i) r |= ((u >> (8 * i)) & 0xff) << (8 * (7 - i));
        u = r;
    }
    char buf[8];
    std::memcpy(buf, &u, 8);
    os.write(buf, 8);
}

double get_le(std::istream& is) {
    char buf[8];
    is.read(buf, 8);
    if (is.gcount() != 8) throw SnapshotError("truncated payload");
    std::uint64_t u;
    std::memcpy(&u, buf, 8);
    if constexpr (std::endian::native == std::endian::big) {
        std::uint64_t r = 0;
        for (int i = 0; i < 8; ++i) r |= ((u >> (8 * i)) & 0xff) << (8 * (7 - i));
        u = r;
    }
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

std::string now_stamp() {
    std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void write_snapshot(const std::string& path, const SnapshotMeta& meta,
                    const std::vector<double>& payload) {
    std::size_t expect = 1;
    for (std::size_t d : meta.dims) expect *= d;
    if (!meta.dims.empty() && expect != payload.size())
        throw SnapshotError("payload length does not match the dimensioned metadata");

    std::ofstream os(path, std::ios::binary);
    if (!os) throw SnapshotError("cannot open for writing: " + path);
    os << kMagic << "\n";
    os << "role " << meta.role << "\n";
    os << "dims";
    for (std::size_t d : meta.dims) os << " " << d;
    os << "\n";
    if (!meta.x3_nodes.empty()) {
        os << "x3";
        for (double v : meta.x3_nodes) os << " " << fmt(v);
        os << "\n";
    }
    os << "vmax " << fmt(meta.vmax) << "\n";
    os << "beta " << fmt(meta.beta) << "\n";
    os << "g " << fmt(meta.g) << "\n";
    os << "created " << (meta.created.empty() ? now_stamp() : meta.created) << "\n";
    os << "count " << payload.size() << "\n";
    os << "end\n";
    for (double v : payload) put_le(os, v);
    if (!os) throw SnapshotError("write failure: " + path);
}

Snapshot read_snapshot(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw SnapshotError("cannot open: " + path);

    std::string line;
    if (!std::getline(is, line) || line != kMagic)
        throw SnapshotError("bad magic (expected VPGRAV1)");
    Snapshot snap;
    std::size_t count = 0;
    bool have_count = false;
    while (std::getline(is, line)) {
        if (line == "end") break;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "role") {
            ls >> snap.meta.role;
        } else if (key == "dims") {
            std::size_t d;
            while (ls >> d) snap.meta.dims.push_back(d);
        } else if (key == "x3") {
            double v;
            while (ls >> v) snap.meta.x3_nodes.push_back(v);
        } else if (key == "vmax") {
            ls >> snap.meta.vmax;
        } else if (key == "beta") {
            ls >> snap.meta.beta;
        } else if (key == "g") {
            ls >> snap.meta.g;
        } else if (key == "created") {
            ls >> snap.meta.created;
        } else if (key == "count") {
            ls >> count;
            have_count = true;
        } else {
            throw SnapshotError("unknown header key: " + key);
        }
    }
    if (line != "end") throw SnapshotError("header not terminated");
    if (!have_count) throw SnapshotError("header lacks the payload count");
    std::size_t expect = 1;
    for (std::size_t d : snap.meta.dims) expect *= d;
    if (!snap.meta.dims.empty() && expect != count)
        throw SnapshotError("payload length does not match the dimensioned metadata");
    snap.payload.resize(count);
    for (std::size_t i = 0; i < count; ++i) snap.payload[i] = get_le(is);
    char extra;
    if (is.read(&extra, 1) && is.gcount() == 1)
        throw SnapshotError("trailing bytes after the payload");
    for (double v : snap.payload)
        if (!std::isfinite(v)) throw SnapshotError("payload holds non-finite values");
    return snap;
}

void write_distribution_snapshot(const std::string& path, const Distribution& f, double g) {
    SnapshotMeta meta;
    meta.role = role_name(f.role);
    meta.dims = {static_cast<std::size_t>(f.sg.n1), static_cast<std::size_t>(f.sg.n2),
                 static_cast<std::size_t>(f.sg.n3 + 1), static_cast<std::size_t>(f.vg.m1),
                 static_cast<std::size_t>(f.vg.m2), static_cast<std::size_t>(f.vg.m3)};
    meta.x3_nodes = f.sg.x3;
    meta.vmax = f.vg.vmax;
    meta.beta = f.beta;
    meta.g = g;
    write_snapshot(path, meta, f.values);
}

Distribution read_distribution_snapshot(const std::string& path) {
    Snapshot snap = read_snapshot(path);
    if (snap.meta.dims.size() != 6)
        throw SnapshotError("distribution snapshot needs 6 dims");
    int n1 = static_cast<int>(snap.meta.dims[0]);
    int n2 = static_cast<int>(snap.meta.dims[1]);
    int n3 = static_cast<int>(snap.meta.dims[2]) - 1;
    int m1 = static_cast<int>(snap.meta.dims[3]);
    int m2 = static_cast<int>(snap.meta.dims[4]);
    int m3 = static_cast<int>(snap.meta.dims[5]);
    if (snap.meta.x3_nodes.size() != static_cast<std::size_t>(n3 + 1))
        throw SnapshotError("vertical node list does not match dims");

    Distribution f;
    f.sg.n1 = n1;
    f.sg.n2 = n2;
    f.sg.n3 = n3;
    f.sg.x3 = snap.meta.x3_nodes;
    f.sg.L3 = snap.meta.x3_nodes.back();
    f.vg = VelocityGrid::cube(m1, m2, m3, snap.meta.vmax);
    f.role = role_from_name(snap.meta.role);
    f.beta = snap.meta.beta;
    f.values = std::move(snap.payload);
    return f;
}

void write_density_snapshot(const std::string& path, const DensityField& rho, double beta,
                            double g, const std::string& role) {
    SnapshotMeta meta;
    meta.role = role;
    meta.dims = {static_cast<std::size_t>(rho.sg.n1), static_cast<std::size_t>(rho.sg.n2),
                 static_cast<std::size_t>(rho.sg.n3 + 1)};
    meta.x3_nodes = rho.sg.x3;
    meta.beta = beta;
    meta.g = g;
    write_snapshot(path, meta, rho.values);
}

}  // namespace vpgrav
