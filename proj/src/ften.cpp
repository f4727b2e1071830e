#include "fame/ften.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "fame/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "FTEN I/O assumes a little-endian host");

namespace fame {

void write_ften(const std::string& path, const Tensor& t) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::io, "ften: cannot open for write: " + path);
    f.write("FTEN", 4);
    const char version = static_cast<char>(kFtenVersion);
    f.write(&version, 1);
    const std::uint32_t rank = static_cast<std::uint32_t>(t.rank());
    f.write(reinterpret_cast<const char*>(&rank), 4);
    for (std::size_t d : t.shape()) {
        const std::uint64_t dim = d;
        f.write(reinterpret_cast<const char*>(&dim), 8);
    }
    f.write(reinterpret_cast<const char*>(t.data().data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!f) throw Error(ErrorKind::io, "ften: write failed: " + path);
}

Tensor read_ften(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::io, "ften: cannot open for read: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "FTEN", 4) != 0) {
        throw Error(ErrorKind::io, "ften: bad magic: " + path);
    }
    char version;
    f.read(&version, 1);
    if (!f || static_cast<unsigned char>(version) != kFtenVersion) {
        throw Error(ErrorKind::io, "ften: unsupported version: " + path);
    }
    std::uint32_t rank = 0;
    f.read(reinterpret_cast<char*>(&rank), 4);
    if (!f || rank == 0 || rank > 8) {
        throw Error(ErrorKind::io, "ften: bad rank: " + path);
    }
    std::vector<std::size_t> shape(rank);
    std::size_t total = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        std::uint64_t dim = 0;
        f.read(reinterpret_cast<char*>(&dim), 8);
        if (!f || dim == 0) throw Error(ErrorKind::io, "ften: bad dim: " + path);
        shape[i] = static_cast<std::size_t>(dim);
        total *= shape[i];
    }
    std::vector<double> data(total);
    f.read(reinterpret_cast<char*>(data.data()),
           static_cast<std::streamsize>(total * sizeof(double)));
    if (!f) throw Error(ErrorKind::io, "ften: truncated payload: " + path);
    return Tensor(std::move(shape), std::move(data));
}

}  // namespace fame
