#include "nowcast/data.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace nowcast {

static_assert(std::endian::native == std::endian::little,
              "STWF I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'S', 'T', 'W', 'F'};
constexpr std::uint16_t kVersion = 1;

class Reader {
public:
    Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
        if (!in_) throw DataError("cannot open '" + path + "'");
    }

    void read(void* dst, std::size_t n) {
        in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n)
            throw DataError("'" + path_ + "' is truncated at byte offset " +
                            std::to_string(offset_ + static_cast<std::size_t>(in_.gcount())));
        offset_ += n;
    }

    template <typename T>
    T scalar() {
        T v;
        read(&v, sizeof(T));
        return v;
    }

    std::string name() {
        const auto len = scalar<std::uint16_t>();
        std::string s(len, '\0');
        if (len > 0) read(s.data(), len);
        return s;
    }

    bool at_eof() {
        return in_.peek() == std::char_traits<char>::eof();
    }

private:
    std::ifstream in_;
    std::string path_;
    std::size_t offset_ = 0;
};

class Writer {
public:
    Writer(const std::string& path) : out_(path, std::ios::binary), path_(path) {
        if (!out_) throw DataError("cannot create '" + path + "'");
    }

    void write(const void* src, std::size_t n) {
        out_.write(static_cast<const char*>(src), static_cast<std::streamsize>(n));
    }

    template <typename T>
    void scalar(T v) {
        write(&v, sizeof(T));
    }

    void name(const std::string& s) {
        if (s.size() > UINT16_MAX) throw DataError("channel name longer than 65535 bytes");
        scalar<std::uint16_t>(static_cast<std::uint16_t>(s.size()));
        write(s.data(), s.size());
    }

    void close() {
        out_.flush();
        if (!out_) throw DataError("write to '" + path_ + "' failed");
    }

private:
    std::ofstream out_;
    std::string path_;
};

}  // namespace

void FrameDataset::validate() const {
    check_dim(frames >= 0 && dyn_channels >= 1 && static_channels >= 0 && height >= 1 &&
                  width >= 1,
              "dataset dimensions invalid");
    if (static_cast<std::int64_t>(dynamic.size()) != frames * dyn_channels * plane_size())
        throw DataError("dynamic payload size mismatch");
    if (static_cast<std::int64_t>(statics.size()) != static_channels * plane_size())
        throw DataError("static payload size mismatch");
    if (static_cast<std::int64_t>(mean.size()) != dyn_channels ||
        static_cast<std::int64_t>(stddev.size()) != dyn_channels)
        throw DataError("stats table size mismatch");
    for (float sd : stddev)
        if (!(sd > 0)) throw DataError("per-channel std must be positive");
    if (static_cast<std::int64_t>(channel_names.size()) != dyn_channels + static_channels)
        throw DataError("channel-name table size mismatch");
}

FrameDataset read_stwf(const std::string& path) {
    Reader r(path);
    char magic[4];
    r.read(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("'" + path + "' is not an STWF file (bad magic)");
    const auto version = r.scalar<std::uint16_t>();
    if (version != kVersion)
        throw DataError("'" + path + "' has unsupported STWF version " + std::to_string(version));

    FrameDataset ds;
    ds.frames = r.scalar<std::uint32_t>();
    ds.dyn_channels = r.scalar<std::uint32_t>();
    ds.static_channels = r.scalar<std::uint32_t>();
    ds.height = r.scalar<std::uint32_t>();
    ds.width = r.scalar<std::uint32_t>();
    ds.cadence_minutes = r.scalar<std::uint16_t>();

    const auto n_names = r.scalar<std::uint16_t>();
    if (n_names != ds.dyn_channels + ds.static_channels)
        throw DataError("'" + path + "' channel-name table has " + std::to_string(n_names) +
                        " entries, expected " +
                        std::to_string(ds.dyn_channels + ds.static_channels));
    for (std::uint16_t i = 0; i < n_names; ++i) ds.channel_names.push_back(r.name());

    ds.mean.resize(static_cast<std::size_t>(ds.dyn_channels));
    ds.stddev.resize(static_cast<std::size_t>(ds.dyn_channels));
    for (std::int64_t c = 0; c < ds.dyn_channels; ++c) {
        ds.mean[static_cast<std::size_t>(c)] = r.scalar<float>();
        ds.stddev[static_cast<std::size_t>(c)] = r.scalar<float>();
    }

    ds.dynamic.resize(static_cast<std::size_t>(ds.frames * ds.dyn_channels * ds.plane_size()));
    if (!ds.dynamic.empty()) r.read(ds.dynamic.data(), ds.dynamic.size() * sizeof(float));
    ds.statics.resize(static_cast<std::size_t>(ds.static_channels * ds.plane_size()));
    if (!ds.statics.empty()) r.read(ds.statics.data(), ds.statics.size() * sizeof(float));

    ds.validate();
    return ds;
}

void write_stwf(const FrameDataset& ds, const std::string& path) {
    ds.validate();
    Writer w(path);
    w.write(kMagic, 4);
    w.scalar<std::uint16_t>(kVersion);
    w.scalar<std::uint32_t>(static_cast<std::uint32_t>(ds.frames));
    w.scalar<std::uint32_t>(static_cast<std::uint32_t>(ds.dyn_channels));
    w.scalar<std::uint32_t>(static_cast<std::uint32_t>(ds.static_channels));
    w.scalar<std::uint32_t>(static_cast<std::uint32_t>(ds.height));
    w.scalar<std::uint32_t>(static_cast<std::uint32_t>(ds.width));
    w.scalar<std::uint16_t>(ds.cadence_minutes);
    w.scalar<std::uint16_t>(static_cast<std::uint16_t>(ds.channel_names.size()));
    for (const auto& n : ds.channel_names) w.name(n);
    for (std::int64_t c = 0; c < ds.dyn_channels; ++c) {
        w.scalar<float>(ds.mean[static_cast<std::size_t>(c)]);
        w.scalar<float>(ds.stddev[static_cast<std::size_t>(c)]);
    }
    if (!ds.dynamic.empty()) w.write(ds.dynamic.data(), ds.dynamic.size() * sizeof(float));
    if (!ds.statics.empty()) w.write(ds.statics.data(), ds.statics.size() * sizeof(float));
    w.close();
}

std::pair<float, float> compute_stats(const FrameDataset& ds, std::int64_t channel) {
    check_dim(channel >= 0 && channel < ds.dyn_channels,
              "channel " + std::to_string(channel) + " out of range");
    // population statistics in double, order-independent up to permutation
    double sum = 0, sq = 0;
    const std::int64_t n = ds.frames * ds.plane_size();
    for (std::int64_t t = 0; t < ds.frames; ++t) {
        const float* p = ds.frame(t, channel);
        for (std::int64_t i = 0; i < ds.plane_size(); ++i) {
            sum += p[i];
            sq += static_cast<double>(p[i]) * p[i];
        }
    }
    const double mean = n > 0 ? sum / static_cast<double>(n) : 0.0;
    double var = n > 0 ? sq / static_cast<double>(n) - mean * mean : 0.0;
    if (var < 0) var = 0;
    const double sd = std::sqrt(var);
    return {static_cast<float>(mean), static_cast<float>(sd < 1e-6 ? 1e-6 : sd)};
}

void refresh_stats(FrameDataset& ds) {
    ds.mean.resize(static_cast<std::size_t>(ds.dyn_channels));
    ds.stddev.resize(static_cast<std::size_t>(ds.dyn_channels));
    for (std::int64_t c = 0; c < ds.dyn_channels; ++c) {
        const auto [m, sd] = compute_stats(ds, c);
        ds.mean[static_cast<std::size_t>(c)] = m;
        ds.stddev[static_cast<std::size_t>(c)] = sd;
    }
}

FrameDataset slice_time(const FrameDataset& ds, std::int64_t t0, std::int64_t t1) {
    check_dim(0 <= t0 && t0 <= t1 && t1 <= ds.frames,
              "time slice [" + std::to_string(t0) + ", " + std::to_string(t1) +
                  ") out of range for T=" + std::to_string(ds.frames));
    FrameDataset out = ds;
    out.frames = t1 - t0;
    const std::int64_t stride = ds.dyn_channels * ds.plane_size();
    out.dynamic.assign(ds.dynamic.begin() + static_cast<std::ptrdiff_t>(t0 * stride),
                       ds.dynamic.begin() + static_cast<std::ptrdiff_t>(t1 * stride));
    return out;
}

DatasetSplits split_dataset(const FrameDataset& ds, const SplitFractions& f) {
    check_config(f.train >= 0 && f.valid >= 0 && f.train + f.valid <= 1.0,
                 "split fractions must be non-negative and sum to at most 1");
    const auto t1 = static_cast<std::int64_t>(static_cast<double>(ds.frames) * f.train);
    const auto t2 = t1 + static_cast<std::int64_t>(static_cast<double>(ds.frames) * f.valid);
    DatasetSplits s;
    s.train = slice_time(ds, 0, t1);
    s.valid = slice_time(ds, t1, t2);
    s.test = slice_time(ds, t2, ds.frames);
    return s;
}

}  // namespace nowcast
