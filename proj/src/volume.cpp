#include "igcn/volume.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace igcn {

static_assert(std::endian::native == std::endian::little,
              "volume payload assumes a little-endian host");

double VoxelVolume::sample(const Vec3& p) const {
    // Voxel-center coordinates; clamp extends the border values.
    const auto axis = [&](double w, double o, double s, int n) {
        double g = (w - o) / s - 0.5;
        if (g < 0.0) g = 0.0;
        if (g > n - 1) g = n - 1;
        return g;
    };
    const double gx = axis(p.x, origin.x, spacing[0], dims[0]);
    const double gy = axis(p.y, origin.y, spacing[1], dims[1]);
    const double gz = axis(p.z, origin.z, spacing[2], dims[2]);
    const int i0 = std::min(static_cast<int>(gx), dims[0] > 1 ? dims[0] - 2 : 0);
    const int j0 = std::min(static_cast<int>(gy), dims[1] > 1 ? dims[1] - 2 : 0);
    const int k0 = std::min(static_cast<int>(gz), dims[2] > 1 ? dims[2] - 2 : 0);
    const double fx = dims[0] > 1 ? gx - i0 : 0.0;
    const double fy = dims[1] > 1 ? gy - j0 : 0.0;
    const double fz = dims[2] > 1 ? gz - k0 : 0.0;
    const int i1 = dims[0] > 1 ? i0 + 1 : i0;
    const int j1 = dims[1] > 1 ? j0 + 1 : j0;
    const int k1 = dims[2] > 1 ? k0 + 1 : k0;
    const double c00 = at(i0, j0, k0) * (1 - fx) + at(i1, j0, k0) * fx;
    const double c10 = at(i0, j1, k0) * (1 - fx) + at(i1, j1, k0) * fx;
    const double c01 = at(i0, j0, k1) * (1 - fx) + at(i1, j0, k1) * fx;
    const double c11 = at(i0, j1, k1) * (1 - fx) + at(i1, j1, k1) * fx;
    const double c0 = c00 * (1 - fy) + c10 * fy;
    const double c1 = c01 * (1 - fy) + c11 * fy;
    return c0 * (1 - fz) + c1 * fz;
}

VoxelVolume load_volume(const std::filesystem::path& header_path) {
    std::ifstream in(header_path);
    if (!in) throw ValidationError("volume: cannot open " + header_path.string());
    VoxelVolume vol;
    std::string raw_name;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key == "dims")
            ss >> vol.dims[0] >> vol.dims[1] >> vol.dims[2];
        else if (key == "spacing")
            ss >> vol.spacing[0] >> vol.spacing[1] >> vol.spacing[2];
        else if (key == "origin")
            ss >> vol.origin.x >> vol.origin.y >> vol.origin.z;
        else if (key == "data")
            ss >> raw_name;
    }
    if (vol.dims[0] <= 0 || vol.dims[1] <= 0 || vol.dims[2] <= 0)
        throw ValidationError("volume: bad dims in header");
    if (raw_name.empty()) throw ValidationError("volume: header missing data entry");
    const auto raw_path = header_path.parent_path() / raw_name;
    std::ifstream rin(raw_path, std::ios::binary);
    if (!rin) throw ValidationError("volume: cannot open " + raw_path.string());
    const std::size_t count =
        static_cast<std::size_t>(vol.dims[0]) * vol.dims[1] * vol.dims[2];
    vol.values.resize(count);
    rin.read(reinterpret_cast<char*>(vol.values.data()),
             static_cast<std::streamsize>(count * sizeof(float)));
    if (!rin) throw ValidationError("volume: truncated payload " + raw_path.string());
    return vol;
}

void save_volume(const VoxelVolume& volume, const std::filesystem::path& header_path) {
    auto raw_path = header_path;
    raw_path.replace_extension(".raw");
    {
        std::ofstream out(header_path);
        if (!out) throw ValidationError("volume: cannot write " + header_path.string());
        char buf[160];
        out << "dims " << volume.dims[0] << ' ' << volume.dims[1] << ' ' << volume.dims[2] << '\n';
        std::snprintf(buf, sizeof(buf), "spacing %.17g %.17g %.17g\n", volume.spacing[0],
                      volume.spacing[1], volume.spacing[2]);
        out << buf;
        std::snprintf(buf, sizeof(buf), "origin %.17g %.17g %.17g\n", volume.origin.x,
                      volume.origin.y, volume.origin.z);
        out << buf;
        out << "data " << raw_path.filename().string() << '\n';
    }
    std::ofstream rout(raw_path, std::ios::binary);
    if (!rout) throw ValidationError("volume: cannot write " + raw_path.string());
    rout.write(reinterpret_cast<const char*>(volume.values.data()),
               static_cast<std::streamsize>(volume.values.size() * sizeof(float)));
}

} // namespace igcn
