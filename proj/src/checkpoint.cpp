#include "nowcast/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "nowcast/common.hpp"

namespace nowcast {

static_assert(std::endian::native == std::endian::little,
              "SMCK I/O assumes a little-endian host");

namespace {
constexpr char kMagic[4] = {'S', 'M', 'C', 'K'};
constexpr std::uint16_t kVersion = 1;
}  // namespace

void write_smck(const std::string& path, const CheckpointBlob& blob) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot create '" + path + "'");
    out.write(kMagic, 4);
    const std::uint16_t version = kVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof version);

    std::string spec;
    for (const auto& [k, v] : blob.spec_kv) spec += k + "=" + v + "\n";
    const auto spec_len = static_cast<std::uint32_t>(spec.size());
    out.write(reinterpret_cast<const char*>(&spec_len), sizeof spec_len);
    out.write(spec.data(), static_cast<std::streamsize>(spec.size()));

    const auto count = static_cast<std::uint32_t>(blob.tensors.size());
    out.write(reinterpret_cast<const char*>(&count), sizeof count);
    for (const auto& t : blob.tensors) {
        const auto name_len = static_cast<std::uint16_t>(t.name.size());
        out.write(reinterpret_cast<const char*>(&name_len), sizeof name_len);
        out.write(t.name.data(), name_len);
        const auto ndim = static_cast<std::uint8_t>(t.shape.size());
        out.write(reinterpret_cast<const char*>(&ndim), sizeof ndim);
        std::uint64_t numel = 1;
        for (std::int64_t d : t.shape) {
            const auto d32 = static_cast<std::uint32_t>(d);
            out.write(reinterpret_cast<const char*>(&d32), sizeof d32);
            numel *= d32;
        }
        if (numel != t.data.size())
            throw DataError("tensor '" + t.name + "' shape does not match its data length");
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    }
    out.flush();
    if (!out) throw DataError("write to '" + path + "' failed");
}

CheckpointBlob read_smck(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::size_t offset = 0;
    auto read = [&](void* dst, std::size_t n) {
        in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in.gcount()) != n)
            throw DataError("'" + path + "' is truncated at byte offset " +
                            std::to_string(offset + static_cast<std::size_t>(in.gcount())));
        offset += n;
    };

    char magic[4];
    read(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("'" + path + "' is not an SMCK checkpoint (bad magic)");
    std::uint16_t version;
    read(&version, sizeof version);
    if (version != kVersion)
        throw DataError("'" + path + "' has unsupported SMCK version " + std::to_string(version));

    CheckpointBlob blob;
    std::uint32_t spec_len;
    read(&spec_len, sizeof spec_len);
    std::string spec(spec_len, '\0');
    if (spec_len > 0) read(spec.data(), spec_len);
    std::size_t pos = 0;
    while (pos < spec.size()) {
        const std::size_t eol = spec.find('\n', pos);
        const std::string line = spec.substr(pos, eol == std::string::npos ? eol : eol - pos);
        pos = eol == std::string::npos ? spec.size() : eol + 1;
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError("'" + path + "' spec block line lacks '=': " + line);
        blob.spec_kv.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    }

    std::uint32_t count;
    read(&count, sizeof count);
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedTensorBlob t;
        std::uint16_t name_len;
        read(&name_len, sizeof name_len);
        t.name.resize(name_len);
        if (name_len > 0) read(t.name.data(), name_len);
        std::uint8_t ndim;
        read(&ndim, sizeof ndim);
        std::uint64_t numel = 1;
        for (std::uint8_t d = 0; d < ndim; ++d) {
            std::uint32_t ext;
            read(&ext, sizeof ext);
            t.shape.push_back(ext);
            numel *= ext;
        }
        t.data.resize(numel);
        if (numel > 0) read(t.data.data(), numel * sizeof(float));
        blob.tensors.push_back(std::move(t));
    }
    return blob;
}

}  // namespace nowcast
