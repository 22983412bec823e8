#include "uedsr/evs_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "uedsr/errors.hpp"

namespace uedsr {
namespace {

static_assert(std::endian::native == std::endian::little, "EVS I/O assumes a little-endian host");

constexpr std::array<char, 4> kMagic{'E', 'V', 'S', '1'};
constexpr std::size_t kHeaderBytes = 4 + 4 + 4 + 8 + 8 + 8;
constexpr std::size_t kRecordBytes = 8 + 2 + 2 + 1 + 1;

template <typename T>
void put(std::vector<char>& out, T value) {
    const auto* raw = reinterpret_cast<const char*>(&value);
    out.insert(out.end(), raw, raw + sizeof(T));
}

template <typename T>
T get(const char* data) {
    T value;
    std::memcpy(&value, data, sizeof(T));
    return value;
}

}  // namespace

void write_evs(const std::filesystem::path& path, const EventStream& stream) {
    if (stream.t_start() < 0) throw RangeError("evs stores unsigned timestamps; interval starts below 0");
    if (stream.width() > 65536 || stream.height() > 65536) throw GeometryError("evs coordinates are 16-bit");
    std::vector<char> buffer;
    buffer.reserve(kHeaderBytes + stream.size() * kRecordBytes);
    buffer.insert(buffer.end(), kMagic.begin(), kMagic.end());
    put<std::uint32_t>(buffer, static_cast<std::uint32_t>(stream.width()));
    put<std::uint32_t>(buffer, static_cast<std::uint32_t>(stream.height()));
    put<std::uint64_t>(buffer, static_cast<std::uint64_t>(stream.t_start()));
    put<std::uint64_t>(buffer, static_cast<std::uint64_t>(stream.t_end()));
    put<std::uint64_t>(buffer, static_cast<std::uint64_t>(stream.size()));
    for (const Event& e : stream.events()) {
        put<std::uint64_t>(buffer, static_cast<std::uint64_t>(e.t));
        put<std::uint16_t>(buffer, static_cast<std::uint16_t>(e.x));
        put<std::uint16_t>(buffer, static_cast<std::uint16_t>(e.y));
        put<std::int8_t>(buffer, e.p);
        put<std::uint8_t>(buffer, 0);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IntegrityError(path.string(), "cannot open for writing");
    out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    if (!out) throw IntegrityError(path.string(), "write failed");
}

EventStream read_evs(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IntegrityError(path.string(), "cannot open event file");
    std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (data.size() < kHeaderBytes) throw IntegrityError(path.string(), "truncated header");
    if (std::memcmp(data.data(), kMagic.data(), kMagic.size()) != 0)
        throw IntegrityError(path.string(), "bad magic, expected EVS1");
    const char* p = data.data() + 4;
    const auto width = get<std::uint32_t>(p);
    const auto height = get<std::uint32_t>(p + 4);
    const auto t_start = get<std::uint64_t>(p + 8);
    const auto t_end = get<std::uint64_t>(p + 16);
    const auto count = get<std::uint64_t>(p + 24);
    if (count > (data.size() - kHeaderBytes) / kRecordBytes ||
        data.size() != kHeaderBytes + count * kRecordBytes) {
        throw IntegrityError(path.string(), "truncated or oversized event records (header says " +
                                                std::to_string(count) + ")");
    }
    std::vector<Event> events(static_cast<std::size_t>(count));
    const char* r = data.data() + kHeaderBytes;
    for (auto& e : events) {
        e.t = static_cast<Microseconds>(get<std::uint64_t>(r));
        e.x = get<std::uint16_t>(r + 8);
        e.y = get<std::uint16_t>(r + 10);
        e.p = get<std::int8_t>(r + 12);
        r += kRecordBytes;
    }
    try {
        return EventStream(static_cast<int>(width), static_cast<int>(height),
                           static_cast<Microseconds>(t_start), static_cast<Microseconds>(t_end),
                           std::move(events));
    } catch (const ValidationError& err) {
        throw IntegrityError(path.string(), err.what());
    }
}

EventStream read_events_csv(const std::filesystem::path& path, std::optional<CsvGeometry> geometry) {
    std::ifstream in(path);
    if (!in) throw IntegrityError(path.string(), "cannot open event csv");
    std::vector<Event> events;
    std::optional<CsvGeometry> header;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.rfind("# width=", 0) == 0) {
            CsvGeometry h;
            long long t0 = 0, t1 = 0;
            if (std::sscanf(line.c_str(), "# width=%d height=%d t_start=%lld t_end=%lld", &h.width,
                            &h.height, &t0, &t1) == 4) {
                h.t_start = t0;
                h.t_end = t1;
                header = h;
            }
            continue;
        }
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("t,", 0) == 0) continue;
        std::istringstream row(line);
        long long t = 0;
        int x = 0, y = 0, p = 0;
        char c1 = 0, c2 = 0, c3 = 0;
        if (!(row >> t >> c1 >> x >> c2 >> y >> c3 >> p) || c1 != ',' || c2 != ',' || c3 != ',') {
            throw IntegrityError(path.string(), "malformed row " + std::to_string(line_no));
        }
        events.push_back({t, x, y, static_cast<std::int8_t>(p)});
    }
    CsvGeometry g;
    if (geometry) {
        g = *geometry;
    } else if (header) {
        g = *header;
    } else {
        for (const Event& e : events) {
            g.width = std::max(g.width, e.x + 1);
            g.height = std::max(g.height, e.y + 1);
        }
        g.width = std::max(g.width, 1);
        g.height = std::max(g.height, 1);
        if (!events.empty()) {
            g.t_start = events.front().t;
            g.t_end = events.back().t;
        }
    }
    try {
        return EventStream(g.width, g.height, g.t_start, g.t_end, std::move(events));
    } catch (const ValidationError& err) {
        throw IntegrityError(path.string(), err.what());
    }
}

void write_events_csv(const std::filesystem::path& path, const EventStream& stream) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IntegrityError(path.string(), "cannot open for writing");
    out << "# width=" << stream.width() << " height=" << stream.height() << " t_start=" << stream.t_start()
        << " t_end=" << stream.t_end() << "\n";
    for (const Event& e : stream.events()) out << e.t << ',' << e.x << ',' << e.y << ',' << int(e.p) << '\n';
}

}  // namespace uedsr
