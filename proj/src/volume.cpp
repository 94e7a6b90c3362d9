#include "stereotrace/volume.hpp"

#include <cstring>
#include <fstream>

namespace stereotrace {

static void put_u32(std::ofstream& f, uint32_t v) {
    unsigned char b[4] = {
        (unsigned char)(v & 0xff),
        (unsigned char)((v >> 8) & 0xff),
        (unsigned char)((v >> 16) & 0xff),
        (unsigned char)((v >> 24) & 0xff),
    };
    f.write(reinterpret_cast<const char*>(b), 4);
}

static uint32_t get_u32(std::ifstream& f) {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

void write_volume(const CostVolume& vc, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    require(bool(f), "cannot open for writing: " + path);
    f.write("CSTV", 4);
    put_u32(f, uint32_t(vc.height));
    put_u32(f, uint32_t(vc.width));
    put_u32(f, uint32_t(vc.dmax));
    std::vector<float> buf(vc.cost.data.size());
    for (size_t i = 0; i < buf.size(); ++i) buf[i] = float(vc.cost.data[i]);
    f.write(reinterpret_cast<const char*>(buf.data()),
            std::streamsize(buf.size() * sizeof(float)));
    require(bool(f), "write failed: " + path);
}

CostVolume read_volume(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(bool(f), "cannot open: " + path);
    char magic[4];
    f.read(magic, 4);
    require(bool(f) && std::memcmp(magic, "CSTV", 4) == 0, "bad volume magic: " + path);
    const uint32_t h = get_u32(f);
    const uint32_t w = get_u32(f);
    const uint32_t d = get_u32(f);
    require(bool(f) && h > 0 && w > 0 && d > 0, "bad volume header: " + path);
    CostVolume vc{int(w), int(h), int(d)};
    std::vector<float> buf(vc.cost.data.size());
    f.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size() * sizeof(float)));
    require(bool(f), "truncated volume file: " + path);
    for (size_t i = 0; i < buf.size(); ++i) vc.cost.data[i] = double(buf[i]);
    return vc;
}

}  // namespace stereotrace
